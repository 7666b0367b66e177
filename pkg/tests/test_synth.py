import math

import numpy as np
import pytest

from chiral_squeeze.estimator import averaged_periodogram, extract_theta, periodograms
from chiral_squeeze.formats import encode_traces
from chiral_squeeze.physics import Drive, EmitterEnsemble, FrequencyGrid, SqueezingSpectrum
from chiral_squeeze.synth import (
    THREADS_ENV,
    SynthConfig,
    bin_frequencies,
    iter_repetitions,
    probe_psd,
    shape_gaussian_process,
    synthesize_run,
    uniform_theta_schedule,
)

GAMMA = 2 * math.pi * 5.2e6


def reference_config(**kw):
    base = dict(ensemble=EmitterEnsemble(0.007, GAMMA, 0.0, 169), drive=Drive(0.51))
    base.update(kw)
    return SynthConfig(**base)


def flat_target(level):
    g = FrequencyGrid.symmetric(50.0, 101)
    return SqueezingSpectrum(g, np.full(g.size, level), ordering="symmetric")


class TestShaping:
    def test_white_noise_variance(self):
        x = shape_gaussian_process(flat_target(1.0), 1e8, 2**18, 1, GAMMA)
        assert x.var() == pytest.approx(1.0, abs=5 * math.sqrt(2 / x.size))

    def test_scaled_variance(self):
        x = shape_gaussian_process(flat_target(0.99), 1e8, 2**18, 2, GAMMA)
        assert x.var() == pytest.approx(0.99, abs=5 * 0.99 * math.sqrt(2 / x.size))

    def test_periodogram_expectation(self):
        g = FrequencyGrid.symmetric(20.0, 401)
        target = SqueezingSpectrum(g, 1 + 0.5 / (1 + g.omega**2), ordering="symmetric")
        n, reps = 512, 800
        rng = np.random.default_rng(3)
        recs = np.array([shape_gaussian_process(target, 1e8, n, rng, GAMMA) for _ in range(reps)])
        p = averaged_periodogram(recs, 1e8).values
        omega = 2 * math.pi * bin_frequencies(n, 1e8) / GAMMA
        expected = np.interp(omega, g.omega, target.values)
        z = (p - expected) / (expected / math.sqrt(reps))
        # DC and Nyquist are chi-square with one degree of freedom
        assert np.mean(np.abs(z[1:-1]) > 3) < 0.01

    def test_rejects_normal_ordering(self):
        g = FrequencyGrid.symmetric(1.0, 3)
        with pytest.raises(ValueError):
            shape_gaussian_process(SqueezingSpectrum(g, np.zeros(3)), 1e8, 64, 0, GAMMA)

    def test_negative_psd(self):
        with pytest.raises(ValueError, match="negative spectral density"):
            shape_gaussian_process(flat_target(-0.1), 1e8, 64, 0, GAMMA)


class TestConfig:
    def test_defaults(self):
        cfg = reference_config()
        assert cfg.n_samples == 4100 and cfg.f_het == 1e6

    @pytest.mark.parametrize(
        "kw", [dict(f_het=60e6), dict(n_repetitions=0), dict(electronic_noise=-1.0), dict(eta=1.5)]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            reference_config(**kw)


class TestRun:
    def test_deterministic_bytes(self):
        cfg = reference_config()
        sched = uniform_theta_schedule(4, 9)
        assert encode_traces(synthesize_run(cfg, sched, 9)) == encode_traces(synthesize_run(cfg, sched, 9))
        assert encode_traces(synthesize_run(cfg, sched, 9)) != encode_traces(synthesize_run(cfg, sched, 10))

    def test_thread_count_invariance(self, monkeypatch):
        cfg = reference_config()
        sched = uniform_theta_schedule(40, 4)
        monkeypatch.setenv(THREADS_ENV, "1")
        one = [r.probe for r in iter_repetitions(cfg, sched, 4, chunk=8)]
        monkeypatch.setenv(THREADS_ENV, "6")
        many = [r.probe for r in iter_repetitions(cfg, sched, 4, chunk=8)]
        assert all(np.array_equal(a, b) for a, b in zip(one, many))

    def test_record_layout(self):
        ts = synthesize_run(reference_config(), [0.1, 0.2], 1)
        assert [r.kind for r in ts.records] == ["probe", "beat", "vacuum"] * 2
        assert ts.records[0].theta_true == 0.1 and ts.records[2].theta_true is None

    def test_empty_schedule(self):
        with pytest.raises(ValueError):
            synthesize_run(reference_config(), [], 1)

    def test_no_atoms_probe_is_vacuum(self):
        cfg = reference_config(ensemble=EmitterEnsemble(0.007, GAMMA, 0.0, 0))
        freqs, psd = probe_psd(cfg, 0.0)
        assert np.array_equal(psd, np.ones_like(freqs))
        reps = list(iter_repetitions(cfg, np.zeros(300), 5))
        p = periodograms([r.probe for r in reps]).mean(axis=0)
        v = periodograms([r.vacuum for r in reps]).mean(axis=0)
        assert abs(p[1:-1].mean() - v[1:-1].mean()) < 5 * math.sqrt(2 / (300 * p.size))

    def test_vacuum_normalization(self):
        cfg = reference_config(electronic_noise=0.3)
        reps = list(iter_repetitions(cfg, np.zeros(200), 6))
        v = periodograms([r.vacuum for r in reps]).mean(axis=0)
        assert v[1:-1].mean() == pytest.approx(1.3, abs=5 * 1.3 / math.sqrt(200 * (v.size - 2)))

    def test_probe_psd_contains_squeezing(self):
        freqs, psd = probe_psd(reference_config(), 0.0)
        band = (freqs >= 1.5e6) & (freqs <= 23e6)
        assert psd[band].mean() < 1.0
        _, anti = probe_psd(reference_config(), math.pi / 2)
        assert anti[band].mean() > 1.0

    def test_perfect_detection_bounded(self):
        cfg = reference_config(eta=1.0, drive=Drive(1.0))
        _, psd = probe_psd(cfg, 0.0)
        assert psd.min() >= 0

    def test_psd_fidelity_welch_sized(self):
        cfg = reference_config(duration=4096 / 100e6)
        assert cfg.n_samples == 4096
        reps = list(iter_repetitions(cfg, np.zeros(1000), 21))
        p = periodograms([r.probe for r in reps]).mean(axis=0)
        _, target = probe_psd(cfg, 0.0)
        z = (p - target) / (target / math.sqrt(1000))
        assert np.mean(np.abs(z[1:-1]) > 3) < 0.01

    def test_beat_phase(self):
        cfg = reference_config()
        sched = uniform_theta_schedule(200, 8)
        err = [
            math.remainder(extract_theta(r.beat, cfg.sample_rate, cfg.f_het) - r.theta, 2 * math.pi)
            for r in iter_repetitions(cfg, sched, 8)
        ]
        assert np.sqrt(np.mean(np.square(err))) < 1e-3
