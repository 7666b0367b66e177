"""Randomized invariants of the composed spectra.

Runs under the active hypothesis profile (``HYPOTHESIS_PROFILE=thorough`` gives
1000 cases); the acceptance suite reruns every property at 1000 cases.
"""

import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, example, given
from hypothesis import strategies as st

from chiral_squeeze.physics import (
    ComplexSpectrum,
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    GridTruncationWarning,
    LeadingOrderWarning,
    compose_entangled_spectrum,
    integrated_wavefunction_at_zero,
    single_atom_spectrum,
    squeezing_spectrum,
    to_time_domain,
)
from chiral_squeeze.fitting import levenberg_marquardt

GRID = FrequencyGrid.symmetric(20.0, 801)

betas = st.floats(1e-4, 1.0)
n_atoms = st.integers(0, 400)
detunings = st.floats(-3.0, 3.0)
thetas = st.floats(0.0, 2 * math.pi)
drives = st.floats(1e-4, 1.0)

pytestmark = pytest.mark.filterwarnings(
    "ignore::chiral_squeeze.physics.GridTruncationWarning",
    "ignore::chiral_squeeze.physics.LeadingOrderWarning",
)


def _phi(beta, n, delta=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridTruncationWarning)
        ens = EmitterEnsemble(beta, 1.0, delta, n)
        return ens, compose_entangled_spectrum(ens, GRID)


def _spectrum(beta, n, delta, s, theta):
    ens, phi = _phi(beta, n, delta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LeadingOrderWarning)
        return squeezing_spectrum(phi, Drive(s, theta), ens).values


NO_NOISE_REASON = "leading-order S is linear in s; a single emitter gives S(0) = -beta s < -1/4 once beta s > 1/4"
COHERENT_REASON = "the deviation from N phi_1 is ~3.5 beta N relative to N phi_1, so N times the stated bound"


@pytest.mark.xfail(strict=True, reason=NO_NOISE_REASON)
@given(betas, n_atoms, detunings, drives, thetas)
@example(1.0, 1, 0.0, 1.0, 0.0)
def test_no_noise_bound(beta, n, delta, s, theta):
    assume(beta * n <= 3)
    assert _spectrum(beta, n, delta, s, theta).min() >= -0.25


@given(betas, n_atoms, detunings, st.floats(1e-4, 0.1), thetas)
def test_no_noise_bound_weak_drive(beta, n, delta, s, theta):
    # the leading-order spectrum is linear in s, so the bound needs s * max|S/s| <= 1/4
    assume(beta * n <= 3)
    assert _spectrum(beta, n, delta, s, theta).min() >= -0.25


@given(betas, n_atoms, detunings, drives, thetas)
def test_theta_period(beta, n, delta, s, theta):
    assume(beta * n <= 3)
    a = _spectrum(beta, n, delta, s, theta)
    b = _spectrum(beta, n, delta, s, theta + math.pi)
    scale = max(np.max(np.abs(a)), 1e-300)
    assert np.max(np.abs(a - b)) <= 1e-12 * scale


@given(st.floats(1e-3, 0.5), st.integers(1, 200), detunings, st.integers(0, 800))
def test_theta_dependence_is_cosine(beta, n, delta, k):
    ens, phi = _phi(beta, n, delta)
    th = np.linspace(0, math.pi, 12, endpoint=False)
    values = np.array([squeezing_spectrum(phi, Drive(0.3, t), ens).values[k] for t in th])
    scale = np.max(np.abs(values))
    assume(scale > 0)
    y = values / scale
    lin = np.linalg.lstsq(np.column_stack([np.cos(2 * th), np.sin(2 * th)]), y, rcond=None)[0]
    a0, p0 = math.hypot(*lin), math.atan2(-lin[1], lin[0])
    fit = levenberg_marquardt(
        lambda p: p[0] * np.cos(2 * th + p[1]) - y,
        lambda p: np.column_stack([np.cos(2 * th + p[1]), -p[0] * np.sin(2 * th + p[1])]),
        [a0, p0],
        ["A", "phi0"],
    )
    assert fit.residual_rms < 1e-12


@given(betas, n_atoms, detunings)
def test_evenness(beta, n, delta):
    assume(beta * n <= 3)
    _, phi = _phi(beta, n, delta)
    v = phi.values
    assert np.max(np.abs(v - v[::-1])) <= 1e-10 * max(np.max(np.abs(v)), 1e-300)


@given(betas, n_atoms)
def test_resonant_reality(beta, n):
    assume(beta * n <= 3)
    _, phi = _phi(beta, n)
    assert np.max(np.abs(phi.values.imag)) <= 1e-10 * max(np.max(np.abs(phi.values)), 1e-300)


@given(betas, st.integers(1, 400), detunings)
def test_parseval(beta, n, delta):
    assume(beta * n <= 3)
    _, phi = _phi(beta, n, delta)
    wf = to_time_domain(phi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridTruncationWarning)
        zero = integrated_wavefunction_at_zero(phi)
    at0 = wf.values[np.argmin(np.abs(wf.tau))]
    assert abs(at0 - zero) <= 1e-10 * max(abs(zero), np.max(np.abs(wf.values)))


@given(betas, n_atoms, detunings, st.floats(1e-4, 0.5), thetas)
def test_linear_in_s(beta, n, delta, s, theta):
    assume(beta * n <= 3)
    a = _spectrum(beta, n, delta, s, theta)
    b = _spectrum(beta, n, delta, 2 * s, theta)
    assert np.max(np.abs(b - 2 * a)) <= 1e-12 * max(np.max(np.abs(b)), 1e-300)


@pytest.mark.xfail(strict=True, reason=COHERENT_REASON)
@given(st.floats(1e-5, 1e-2), st.integers(1, 1000))
@example(1e-3, 10)
def test_coherent_enhancement(beta, n):
    assume(beta * n <= 0.01)
    _, phi = _phi(beta, n)
    single = single_atom_spectrum(beta, GRID.omega)
    assert np.max(np.abs(phi.values - n * single)) <= 5 * beta * n * np.max(single)


@given(st.floats(1e-5, 1e-2), st.integers(1, 1000))
def test_coherent_enhancement_relative(beta, n):
    # deviation from the coherent sum relative to the sum itself is first order in beta N
    assume(beta * n <= 0.01)
    _, phi = _phi(beta, n)
    single = single_atom_spectrum(beta, GRID.omega)
    assert np.max(np.abs(phi.values - n * single)) <= 5 * beta * n * n * np.max(single)


@given(st.one_of(st.just(0.0), betas), n_atoms, detunings, drives, thetas)
def test_empty_or_uncoupled_is_coherent(beta, n, delta, s, theta):
    assume(beta == 0 or n == 0)
    assert not np.any(_spectrum(beta, n, delta, s, theta))
