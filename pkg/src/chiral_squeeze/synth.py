"""Synthetic balanced-homodyne photocurrents with a prescribed noise spectrum.

Currents are dimensionless with shot noise normalized to unit power
spectral density.  A record of ``n`` samples is built directly in the
discrete Fourier domain, so the expected periodogram ``|rfft(x)|^2 / n``
equals the target spectrum exactly at every bin.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .formats import TraceRecord, TraceSet
from .physics import (
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    SqueezingSpectrum,
    compose_entangled_spectrum,
)

__all__ = [
    "SynthConfig",
    "Repetition",
    "shape_gaussian_process",
    "bin_frequencies",
    "probe_psd",
    "iter_repetitions",
    "synthesize_run",
    "record_rng",
    "uniform_theta_schedule",
    "max_workers",
]

THREADS_ENV = "CHIRAL_SQUEEZE_THREADS"
_PROBE, _BEAT, _VACUUM = 0, 1, 2


def max_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    limit = os.cpu_count() or 1
    if raw:
        try:
            limit = max(1, int(raw))
        except ValueError:
            pass
    return limit


@dataclass(frozen=True)
class SynthConfig:
    """Experiment emulated by :func:`synthesize_run`.

    ``ensemble.gamma_tot`` is in rad/s; ``f_het`` and ``sample_rate`` are in
    Hz, ``duration`` in seconds.  ``electronic_noise`` is the white detector
    noise power in units of shot noise.
    """

    ensemble: EmitterEnsemble
    drive: Drive
    eta: float = 0.22
    electronic_noise: float = 0.0
    f_het: float = 1e6
    n_repetitions: int = 1
    duration: float = 41e-6
    sample_rate: float = 100e6
    beat_amplitude: float = 50.0
    grid: FrequencyGrid = field(default_factory=FrequencyGrid.symmetric)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.electronic_noise < 0:
            raise ValueError("electronic_noise must be >= 0")
        if self.n_repetitions < 1:
            raise ValueError("n_repetitions must be >= 1")
        if not 0 < self.f_het < self.sample_rate / 2:
            raise ValueError("f_het must lie below the Nyquist frequency")
        if self.n_samples < 4:
            raise ValueError("duration too short for the sample rate")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass
class Repetition:
    index: int
    theta: float
    probe: np.ndarray
    beat: np.ndarray
    vacuum: np.ndarray


def record_rng(seed: int, record_index: int) -> np.random.Generator:
    """Independent stream per record, so generation order never matters."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(record_index)]))


def uniform_theta_schedule(n: int, seed: int) -> np.ndarray:
    """LO phases drawn uniformly from [0, 2 pi), as for a free-drifting phase lock."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), 2**62]))
    return rng.uniform(0.0, 2.0 * math.pi, size=int(n))


def bin_frequencies(n_samples: int, sample_rate: float) -> np.ndarray:
    return np.fft.rfftfreq(n_samples, d=1.0 / sample_rate)


def _draw_shaped(psd: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Real Gaussian record whose periodogram expectation is ``psd`` (rfft bins)."""
    n_bins = n_samples // 2 + 1
    z = rng.standard_normal((2, n_bins))
    coeff = np.sqrt(psd * n_samples / 2.0) * (z[0] + 1j * z[1])
    # DC and Nyquist coefficients are real; their variance carries the full psd
    coeff[0] = math.sqrt(psd[0] * n_samples) * z[0, 0]
    if n_samples % 2 == 0:
        coeff[-1] = math.sqrt(psd[-1] * n_samples) * z[0, -1]
    return np.fft.irfft(coeff, n=n_samples)


def _interp_to_bins(grid: FrequencyGrid, values: np.ndarray, omega_bins: np.ndarray) -> np.ndarray:
    # flat extrapolation beyond the grid edges
    if np.iscomplexobj(values):
        return np.interp(omega_bins, grid.omega, values.real) + 1j * np.interp(omega_bins, grid.omega, values.imag)
    return np.interp(omega_bins, grid.omega, values)


def shape_gaussian_process(
    target: SqueezingSpectrum,
    sample_rate: float,
    n_samples: int,
    seed,
    gamma_tot: float,
) -> np.ndarray:
    """Stationary Gaussian record realizing a shot-noise normalized spectrum.

    ``target`` must be symmetric-ordered (``1 + 4 S``); its grid is in units
    of ``gamma_tot`` (rad/s) and is linearly interpolated onto the FFT bins.
    """
    if target.ordering != "symmetric":
        raise ValueError("target must be the symmetric-ordered spectrum 1 + 4 S")
    omega_bins = 2.0 * math.pi * bin_frequencies(n_samples, sample_rate) / gamma_tot
    psd = _interp_to_bins(target.grid, target.values, omega_bins)
    if np.any(psd < 0):
        bad = int(np.argmin(psd))
        raise ValueError(
            f"negative spectral density {psd[bad]:.3g} at {omega_bins[bad]:.3g} gamma "
            "(normally ordered spectrum below -1/4)"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _draw_shaped(psd, n_samples, rng)


class _ProbeModel:
    """Entangled spectrum on the FFT bins, computed once per configuration."""

    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        ens = cfg.ensemble
        n = cfg.n_samples
        self.freqs = bin_frequencies(n, cfg.sample_rate)
        omega_bins = 2.0 * math.pi * self.freqs / ens.gamma_tot
        if ens.n_atoms == 0 or ens.beta == 0:
            self.phi_bins = np.zeros(omega_bins.size, dtype=complex)
        else:
            phi = compose_entangled_spectrum(ens, cfg.grid)
            self.phi_bins = _interp_to_bins(cfg.grid, phi.values, omega_bins)
        self.prefactor = 0.0 if ens.beta == 0 else cfg.drive.s / (16.0 * ens.beta)

    def normal_spectrum(self, theta: float) -> np.ndarray:
        return -self.prefactor * np.real(np.exp(2j * theta) * self.phi_bins)

    def psd(self, theta: float) -> np.ndarray:
        psd = 1.0 + 4.0 * self.cfg.eta * self.normal_spectrum(theta) + self.cfg.electronic_noise
        if np.any(psd < 0):
            raise ValueError("negative spectral density: squeezing exceeds the no-noise bound")
        return psd


def probe_psd(cfg: SynthConfig, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(freqs_hz, 1 + 4 eta S_theta + electronic_noise)`` on the record's FFT bins."""
    model = _ProbeModel(cfg)
    return model.freqs, model.psd(theta)


def _make_repetition(model: _ProbeModel, i: int, theta: float, seed: int) -> Repetition:
    cfg = model.cfg
    n = cfg.n_samples
    base = 3 * i
    probe = _draw_shaped(model.psd(theta), n, record_rng(seed, base + _PROBE))
    t = np.arange(n) / cfg.sample_rate
    beat = cfg.beat_amplitude * np.cos(2.0 * math.pi * cfg.f_het * t + theta)
    beat = beat + record_rng(seed, base + _BEAT).standard_normal(n)
    vac_psd = np.full(n // 2 + 1, 1.0 + cfg.electronic_noise)
    vacuum = _draw_shaped(vac_psd, n, record_rng(seed, base + _VACUUM))
    return Repetition(i, float(theta), probe, beat, vacuum)


def iter_repetitions(cfg: SynthConfig, theta_schedule, seed: int, chunk: int = 256):
    """Yield one :class:`Repetition` per entry of ``theta_schedule``, in order.

    Chunks of repetitions are generated concurrently (bounded by
    ``CHIRAL_SQUEEZE_THREADS``); output is identical for any thread count.
    """
    thetas = np.asarray(theta_schedule, dtype=float).ravel()
    if thetas.size == 0:
        raise ValueError("theta schedule is empty")
    model = _ProbeModel(cfg)
    workers = min(max_workers(), chunk)
    if workers <= 1:
        for i, th in enumerate(thetas):
            yield _make_repetition(model, i, th, seed)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, thetas.size, chunk):
            idx = range(start, min(start + chunk, thetas.size))
            yield from pool.map(lambda i: _make_repetition(model, i, thetas[i], seed), idx)


def synthesize_run(cfg: SynthConfig, theta_schedule, seed: int) -> TraceSet:
    """Probe, beat and vacuum record for every LO phase in ``theta_schedule``."""
    records: list[TraceRecord] = []
    for rep in iter_repetitions(cfg, theta_schedule, seed):
        records.append(TraceRecord("probe", rep.probe, rep.theta))
        records.append(TraceRecord("beat", rep.beat, rep.theta))
        records.append(TraceRecord("vacuum", rep.vacuum))
    return TraceSet(cfg.sample_rate, cfg.n_samples, records, int(seed))
