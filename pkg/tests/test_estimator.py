import math

import numpy as np
import pytest

from chiral_squeeze.estimator import (
    LowConfidenceError,
    NoisePoint,
    RealSpectrum,
    averaged_periodogram,
    band_noise,
    bin_spectra_by_theta,
    fit_beta_n,
    fit_cosine,
    extract_theta,
    normalized_squeezing_spectrum,
    reconstruct_magnitude,
    reconstruct_phase,
    reconstruct_wavefunction,
)
from chiral_squeeze.lambert import lambert_beer_transmission
from chiral_squeeze.physics import (
    ComplexSpectrum,
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    compose_entangled_spectrum,
    saturation_power,
    to_time_domain,
)

GAMMA = 2 * math.pi * 5.2e6
FS = 100e6
N_SAMPLES = 4100


class TestPeriodogram:
    def test_white_noise(self, rng):
        p = averaged_periodogram(rng.standard_normal((200, 1024)), FS)
        assert p.values[1:-1].mean() == pytest.approx(1.0, abs=0.01)
        assert p.n_records == 200 and p.freq_hz[1] == pytest.approx(FS / 1024)

    def test_sinusoid(self):
        n, k, a = 1000, 37, 0.8
        x = a * np.cos(2 * math.pi * k * np.arange(n) / n)
        p = averaged_periodogram([x], FS).values
        # both signed frequencies together carry a^2 n / 2
        assert 2 * p[k] == pytest.approx(a**2 * n / 2)
        assert np.sum(p > 1e-20) == 1

    def test_errors(self):
        with pytest.raises(ValueError):
            averaged_periodogram([], FS)
        with pytest.raises(ValueError):
            averaged_periodogram([np.zeros(4), np.zeros(5)], FS)

    def test_window_flag(self, rng):
        p = averaged_periodogram(rng.standard_normal((200, 1024)), FS, window="hann")
        assert p.values[5:-5].mean() == pytest.approx(1.0, abs=0.02)
        with pytest.raises(ValueError):
            averaged_periodogram(rng.standard_normal((2, 8)), FS, window="kaiser")


class TestNormalization:
    def _spec(self, values):
        return RealSpectrum(np.arange(len(values), dtype=float), np.asarray(values, dtype=float))

    def test_coherent(self):
        s = normalized_squeezing_spectrum(self._spec([2.0, 3.0]), self._spec([2.0, 3.0]))
        assert np.array_equal(s.symmetric, [1.0, 1.0]) and np.array_equal(s.normal, [0.0, 0.0])

    def test_no_noise(self):
        s = normalized_squeezing_spectrum(self._spec([0.0, 0.0]), self._spec([1.0, 2.0]))
        assert np.array_equal(s.normal, [-0.25, -0.25])

    def test_ordering_identity_bin_exact(self, rng):
        probe, vac = rng.uniform(0.5, 1.5, 50), rng.uniform(0.5, 1.5, 50)
        s = normalized_squeezing_spectrum(self._spec(probe), self._spec(vac))
        assert np.array_equal(s.normal, (s.symmetric - 1) / 4)

    def test_dead_vacuum_bin(self):
        with pytest.raises(ValueError, match="vacuum"):
            normalized_squeezing_spectrum(self._spec([1.0, 1.0]), self._spec([1.0, 0.0]))

    def test_mirror(self):
        s = normalized_squeezing_spectrum(self._spec([1.0, 0.9, 0.8]), self._spec([1.0, 1.0, 1.0]))
        sq = s.to_squeezing_spectrum(2 * math.pi)
        assert np.allclose(sq.grid.omega, [-2, -1, 0, 1, 2])
        assert np.allclose(sq.values, [-0.05, -0.025, 0, -0.025, -0.05])


class TestTheta:
    def test_noiseless(self):
        t = np.arange(N_SAMPLES) / FS
        for theta in (0.7, 0.7 + 2 * math.pi):
            beat = 3.0 * np.cos(2 * math.pi * 1e6 * t + theta)
            assert extract_theta(beat, FS, 1e6) == pytest.approx(0.7, abs=1e-12)

    def test_range(self):
        t = np.arange(N_SAMPLES) / FS
        assert extract_theta(np.cos(2 * math.pi * 1e6 * t - 0.5), FS, 1e6) == pytest.approx(2 * math.pi - 0.5)

    def test_off_bin(self):
        t = np.arange(N_SAMPLES) / FS
        f = 1.01e6
        beat = np.cos(2 * math.pi * f * t + 1.0)
        assert extract_theta(beat, FS, f) == pytest.approx(1.0, abs=0.05)

    def test_low_confidence(self, rng):
        with pytest.raises(LowConfidenceError):
            extract_theta(rng.standard_normal(N_SAMPLES), FS, 1e6)


class TestBandNoise:
    def test_flat(self):
        spec = RealSpectrum(np.linspace(0, 50e6, 101), np.ones(101))
        assert band_noise(spec, 1.5e6, 23e6) == 1.0

    def test_lorentzian(self):
        f = np.linspace(0, 50e6, 1001)
        s = -0.01 / (1 + (f / 5e6) ** 2)
        spec = RealSpectrum(f, 1 + 4 * s)
        assert band_noise(spec, 0.0, 50e6) == pytest.approx(1 + 4 * s.mean(), rel=1e-14)

    def test_empty(self):
        spec = RealSpectrum(np.linspace(0, 10, 11), np.ones(11))
        with pytest.raises(ValueError):
            band_noise(spec, 3.2, 3.8)
        with pytest.raises(ValueError):
            band_noise(spec, 5.0, 1.0)


def _cos_points(a, phi, c, n=24):
    th = np.linspace(0, 2 * math.pi, n, endpoint=False)
    return [NoisePoint(t, -a * math.cos(2 * t + phi) + c) for t in th]


class TestCosineFit:
    def test_noiseless_recovery(self):
        fit = fit_cosine(_cos_points(0.003, 0.1 * math.pi, 1.0))
        assert fit.converged
        assert np.allclose(fit.params, [0.003, 0.1 * math.pi, 1.0], rtol=0, atol=1e-10)
        assert fit.residual_rms < 1e-10

    def test_amplitude_sign_convention(self):
        fit = fit_cosine(_cos_points(-0.002, 0.2, 1.0))
        assert fit["A"] == pytest.approx(0.002)
        assert fit["varphi"] == pytest.approx(0.2 - math.pi)

    def test_flat_data(self):
        fit = fit_cosine(_cos_points(0.0, 0.0, 1.0))
        assert fit.converged
        assert fit["A"] == pytest.approx(0.0, abs=1e-14)
        assert np.isinf(fit.covariance[1, 1])

    def test_preconditions(self):
        with pytest.raises(ValueError):
            fit_cosine(_cos_points(0.1, 0, 1, n=5))
        narrow = [NoisePoint(t, 1.0 + 0.01 * t) for t in np.linspace(0, 2.0, 10)]
        with pytest.raises(ValueError, match="span"):
            fit_cosine(narrow)

    def test_weights(self, rng):
        pts = _cos_points(0.01, 0.3, 1.0, n=36)
        noisy = [NoisePoint(p.theta, p.noise + 1e-3 * rng.standard_normal(), 1e6) for p in pts]
        fit = fit_cosine(noisy)
        assert fit.stderr("A") == pytest.approx(math.sqrt(2 / 36) * 1e-3, rel=0.05)

    def test_noise_point_positive(self):
        with pytest.raises(ValueError):
            NoisePoint(0.0, 0.0)


def _theory_block(beta, n_atoms, delta, s, eta, thetas, n_samples=N_SAMPLES):
    """Noiseless normally ordered spectra on FFT bins, and the phi they came from."""
    grid = FrequencyGrid.symmetric()
    phi = compose_entangled_spectrum(EmitterEnsemble(beta, 1.0, delta, n_atoms), grid)
    freqs = np.fft.rfftfreq(n_samples, 1 / FS)
    omega = 2 * math.pi * freqs / GAMMA
    phi_bins = np.interp(omega, grid.omega, phi.values.real) + 1j * np.interp(omega, grid.omega, phi.values.imag)
    spectra = -(eta * s / (16 * beta)) * np.real(np.exp(2j * np.asarray(thetas))[:, None] * phi_bins[None, :])
    return freqs, phi_bins, spectra


class TestMagnitude:
    @pytest.mark.parametrize("eta", [1.0, 0.22])
    def test_recovers_known_phi(self, eta):
        thetas = np.repeat([0.0, math.pi / 2, math.pi, 1.5 * math.pi], 3) + np.tile([-0.01, 0.0, 0.01], 4)
        freqs, phi_bins, spectra = _theory_block(0.007, 169, 0.0, 0.51, eta, thetas)
        binned = bin_spectra_by_theta(thetas, spectra, freqs)
        res = reconstruct_magnitude(binned, Drive(0.51), EmitterEnsemble(0.007, GAMMA, 0, 169), eta)
        assert np.allclose(res.magnitude, np.abs(phi_bins), rtol=2e-4, atol=1e-12)

    def test_zero(self):
        thetas = np.array([0.0, math.pi / 2, math.pi, 1.5 * math.pi])
        binned = bin_spectra_by_theta(thetas, np.zeros((4, 10)), np.arange(10.0))
        res = reconstruct_magnitude(binned, Drive(0.5), EmitterEnsemble(0.007, GAMMA), 0.22)
        assert not np.any(res.magnitude)

    def test_missing_bin(self):
        thetas = np.array([0.0, math.pi / 2, math.pi])
        binned = bin_spectra_by_theta(thetas, np.zeros((3, 4)), np.arange(4.0))
        with pytest.raises(ValueError, match="270 deg"):
            reconstruct_magnitude(binned, Drive(0.5), EmitterEnsemble(0.007, GAMMA), 0.22)

    def test_window(self):
        thetas = np.array([math.radians(17.9), math.radians(18.1), 2 * math.pi - 0.1])
        binned = bin_spectra_by_theta(thetas, np.ones((3, 2)), np.arange(2.0))
        assert binned.counts[0] == 2


def _fit_phase(delta, thetas=None):
    thetas = np.linspace(0, 2 * math.pi, 24, endpoint=False) if thetas is None else thetas
    freqs, phi_bins, spectra = _theory_block(0.007, 140, delta, 0.37, 0.22, thetas)
    res = reconstruct_phase(thetas, spectra, freqs, Drive(0.37), EmitterEnsemble(0.007, GAMMA, delta * GAMMA, 140), 0.22)
    return freqs, phi_bins, res


class TestPhase:
    def test_noiseless_complex_recovery(self):
        _, phi_bins, res = _fit_phase(1.0)
        assert np.allclose(res.phi, phi_bins, rtol=0, atol=1e-12 * np.abs(phi_bins).max())

    def test_resonant_phase_zero(self):
        _, phi_bins, res = _fit_phase(0.0)
        assert np.max(np.abs(res.phi.imag)) < 1e-12 * np.abs(phi_bins).max()

    def test_conjugate_detunings(self):
        _, _, plus = _fit_phase(0.8)
        _, _, minus = _fit_phase(-0.8)
        assert np.allclose(plus.phase, -minus.phase, atol=1e-9)

    def test_detuning_ordering(self):
        freqs, _, _ = _fit_phase(0.0)
        band = (freqs > 1e6) & (freqs < 6e6)
        means = [np.mean(_fit_phase(d)[2].phase[band]) for d in (1.9, 0.8, 0.0, -1.0, -1.9)]
        assert means == sorted(means, reverse=True)
        assert means[2] == pytest.approx(0.0, abs=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            _fit_phase(0.0, np.linspace(0, math.pi, 5))

    def test_stderr_scaling(self, rng):
        thetas = rng.uniform(0, 2 * math.pi, 400)
        freqs, phi_bins, spectra = _theory_block(0.007, 140, 1.0, 0.37, 0.22, thetas)
        noisy = spectra + 1e-3 * rng.standard_normal(spectra.shape)
        res = reconstruct_phase(thetas, noisy, freqs, Drive(0.37), EmitterEnsemble(0.007, GAMMA, GAMMA, 140), 0.22)
        z = (res.phi.real - phi_bins.real) / res.re_stderr
        assert np.std(z) == pytest.approx(1.0, abs=0.05)


class TestWavefunction:
    def test_noiseless_round_trip(self):
        freqs, phi_bins, res = _fit_phase(1.0)
        est = reconstruct_wavefunction(res, GAMMA, tau_max=5.0)
        d_omega = 2 * math.pi * (freqs[1] - freqs[0]) / GAMMA
        grid = FrequencyGrid.from_spacing(d_omega, freqs.size - 1)
        full = to_time_domain(ComplexSpectrum(grid, np.concatenate([phi_bins[:0:-1], phi_bins])))
        keep = np.abs(full.tau) <= 5.0
        assert np.allclose(est.time_domain.values, full.values[keep], atol=1e-12 * np.abs(full.values).max())
        assert np.all(est.re_stderr < 1e-10)


class TestFitBeta:
    def _curve(self, beta=0.007, n=169, points=20):
        s = np.logspace(math.log10(0.03), math.log10(15), points)
        power = s * saturation_power(beta)
        return power, lambert_beer_transmission(s, beta, n)

    def test_exact_recovery(self):
        power, t = self._curve()
        fit = fit_beta_n(power, t)
        assert fit.converged
        assert fit["beta"] == pytest.approx(0.007, rel=1e-8)
        assert fit["n_atoms"] == pytest.approx(169, rel=1e-8)

    def test_non_identifiable(self):
        fit = fit_beta_n(np.logspace(-12, -9, 10), np.full(10, 0.5))
        assert not fit.converged and "non-identifiable" in fit.message

    def test_preconditions(self):
        power, t = self._curve(points=4)
        with pytest.raises(ValueError):
            fit_beta_n(power, t)
        with pytest.raises(ValueError, match="decade"):
            fit_beta_n(np.linspace(1e-10, 2e-10, 6), np.full(6, 0.2))
