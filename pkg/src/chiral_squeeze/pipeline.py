"""End-to-end analysis of repeated homodyne runs: noise versus LO phase and the entangled wavefunction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .estimator import (
    MAGNITUDE_TARGETS,
    MagnitudeResult,
    PhaseResult,
    WavefunctionEstimate,
    band_mask,
    bin_noise_by_theta,
    bin_spectra_by_theta,
    extract_theta,
    fit_cosine,
    periodograms,
    reconstruct_magnitude,
    reconstruct_phase,
    reconstruct_wavefunction,
)
from .fitting import FitResult
from .formats import TraceSet
from .physics import Drive, EmitterEnsemble

__all__ = ["AnalysisSettings", "AnalysisResult", "analyze", "analyze_arrays", "repetitions_from_traces", "repetitions_from_synth"]


@dataclass(frozen=True)
class AnalysisSettings:
    """Known experimental parameters; ``ensemble.gamma_tot`` in rad/s, frequencies in Hz."""

    ensemble: EmitterEnsemble
    drive: Drive
    eta: float
    sample_rate: float
    f_het: float = 1e6
    f_min: float = 1.5e6
    f_max: float = 23e6
    n_theta_bins: int = 36
    theta_half_width: float = math.radians(18.0)
    tau_max: float = 10.0
    window: str | None = None
    chunk: int = 256


@dataclass(eq=False)
class AnalysisResult:
    freq_hz: np.ndarray
    theta: np.ndarray
    theta_true: np.ndarray | None
    band_noise: np.ndarray
    cosine: FitResult
    normal_spectra: np.ndarray
    """Per-repetition normally ordered spectra, one row each."""
    vacuum: np.ndarray
    magnitude: MagnitudeResult | None
    phase: PhaseResult | None
    wavefunction: WavefunctionEstimate | None
    warnings: list[str] = field(default_factory=list)

    @property
    def min_noise(self) -> float:
        return self.cosine.extra["min_noise"]

    @property
    def squeezing_percent(self) -> float:
        """Band-averaged noise reduction below shot noise at the optimal LO phase, in percent."""
        return 100.0 * (1.0 - self.min_noise)

    def noise_table(self, n_bins: int = 36):
        return [(p.theta, p.noise, p.weight) for p in bin_noise_by_theta(self.theta, self.band_noise, n_bins)]


def repetitions_from_traces(ts: TraceSet):
    for probe, beat, vacuum in ts.repetitions():
        yield probe.data, beat.data, vacuum.data, probe.theta_true


def repetitions_from_synth(reps):
    for rep in reps:
        yield rep.probe, rep.beat, rep.vacuum, rep.theta


def _chunks(items, size):
    block = []
    for item in items:
        block.append(item)
        if len(block) == size:
            yield block
            block = []
    if block:
        yield block


def analyze(repetitions: Iterable, settings: AnalysisSettings) -> AnalysisResult:
    """Consume ``(probe, beat, vacuum, theta_true)`` tuples and run the full estimator chain.

    Probe periodograms are normalized by the vacuum periodogram averaged over
    all repetitions, since the shot-noise reference does not depend on the
    LO phase.
    """
    thetas, truths, probe_rows = [], [], []
    vac_sum = None
    n_rep = 0
    n_samples = 0
    for block in _chunks(repetitions, settings.chunk):
        n_samples = len(block[0][0])
        probe_rows.append(periodograms(np.array([b[0] for b in block]), settings.window))
        vac = periodograms(np.array([b[2] for b in block]), settings.window).sum(axis=0)
        vac_sum = vac if vac_sum is None else vac_sum + vac
        for probe, beat, vacuum, truth in block:
            thetas.append(extract_theta(beat, settings.sample_rate, settings.f_het))
            truths.append(np.nan if truth is None else float(truth))
        n_rep += len(block)
    if n_rep == 0:
        raise ValueError("no repetitions to analyze")
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / settings.sample_rate)
    return _finish(freqs, np.vstack(probe_rows), vac_sum / n_rep, np.array(thetas), np.array(truths), settings)


def analyze_arrays(probe_periodograms, vacuum_mean, theta, freq_hz, settings: AnalysisSettings, theta_true=None):
    """Same chain starting from precomputed periodograms."""
    truths = np.full(len(theta), np.nan) if theta_true is None else np.asarray(theta_true, dtype=float)
    return _finish(np.asarray(freq_hz), np.asarray(probe_periodograms), np.asarray(vacuum_mean), np.asarray(theta), truths, settings)


def _finish(freqs, probe, vacuum, theta, truths, settings: AnalysisSettings) -> AnalysisResult:
    notes: list[str] = []
    if np.any(vacuum <= 0):
        raise ValueError("vacuum reference vanishes in some bins")
    symmetric = probe / vacuum
    normal = (symmetric - 1.0) / 4.0
    band = band_mask(freqs, settings.f_min, settings.f_max)
    noise = symmetric[:, band].mean(axis=1)
    points = bin_noise_by_theta(theta, noise, settings.n_theta_bins)
    cosine = fit_cosine(points)
    if not cosine.converged:
        notes.append(f"cosine fit: {cosine.message}")
    ens, drive = settings.ensemble, settings.drive

    magnitude = phase = wavefunction = None
    if ens.beta > 0 and drive.s > 0 and settings.eta > 0:
        binned = bin_spectra_by_theta(theta, normal, freqs, MAGNITUDE_TARGETS, settings.theta_half_width)
        try:
            magnitude = reconstruct_magnitude(binned, drive, ens, settings.eta)
            if magnitude.mask.any():
                notes.append(f"magnitude: {int(magnitude.mask.sum())} bins masked by the sign-consistency check")
        except ValueError as exc:
            notes.append(f"magnitude: {exc}")
        try:
            phase = reconstruct_phase(theta, normal, freqs, drive, ens, settings.eta)
            wavefunction = reconstruct_wavefunction(phase, ens.gamma_tot, settings.tau_max)
        except ValueError as exc:
            notes.append(f"phase: {exc}")
    truths = None if np.all(np.isnan(truths)) else truths
    return AnalysisResult(freqs, theta, truths, noise, cosine, normal, vacuum, magnitude, phase, wavefunction, notes)
