"""Squeezed light and entangled photon pairs from atoms chirally coupled to a waveguide.

Modules: :mod:`physics` (weak-drive theory), :mod:`synth` (synthetic homodyne
data), :mod:`estimator` and :mod:`pipeline` (analysis), :mod:`oracle`
(master-equation ground truth) and :mod:`cli`.
"""

__version__ = "0.1.0"

from .physics import (  # noqa: E402
    ComplexSpectrum,
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    SqueezingSpectrum,
    compose_entangled_spectrum,
    squeezing_spectrum,
)

__all__ = [
    "__version__",
    "ComplexSpectrum",
    "Drive",
    "EmitterEnsemble",
    "FrequencyGrid",
    "SqueezingSpectrum",
    "compose_entangled_spectrum",
    "squeezing_spectrum",
]
