"""Analysis chain from homodyne photocurrents to the entangled two-photon wavefunction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fitting import FitResult, levenberg_marquardt
from .lambert import lambert_beer_transmission, lambert_w_log
from .physics import (
    ComplexSpectrum,
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    SqueezingSpectrum,
    TimeDomainWavefunction,
    saturation_power,
    to_time_domain,
)

__all__ = [
    "RealSpectrum",
    "NormalizedSpectrum",
    "NoisePoint",
    "LowConfidenceError",
    "periodograms",
    "averaged_periodogram",
    "normalized_squeezing_spectrum",
    "extract_theta",
    "band_noise",
    "band_mask",
    "bin_noise_by_theta",
    "fit_cosine",
    "ThetaBinnedSpectra",
    "bin_spectra_by_theta",
    "MagnitudeResult",
    "reconstruct_magnitude",
    "PhaseResult",
    "reconstruct_phase",
    "WavefunctionEstimate",
    "reconstruct_wavefunction",
    "fit_beta_n",
]

TWO_PI = 2.0 * math.pi
MAGNITUDE_TARGETS = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)


class LowConfidenceError(ValueError):
    """Beat note too weak to define the LO phase."""


@dataclass(frozen=True, eq=False)
class RealSpectrum:
    """Power spectral density on non-negative FFT bins (two-sided density values)."""

    freq_hz: np.ndarray
    values: np.ndarray
    n_records: int = 1


@dataclass(frozen=True, eq=False)
class NormalizedSpectrum:
    """Vacuum-normalized spectrum ``symmetric = probe / vacuum`` and ``normal = (symmetric - 1) / 4``."""

    freq_hz: np.ndarray
    symmetric: np.ndarray
    normal: np.ndarray

    def to_squeezing_spectrum(
        self, gamma_tot: float, theta: float = 0.0, ordering: str = "normal"
    ) -> SqueezingSpectrum:
        """Mirror onto a symmetric grid in units of ``gamma_tot`` (rad/s)."""
        grid, mirror = _mirrored_grid(self.freq_hz, gamma_tot)
        values = self.normal if ordering == "normal" else self.symmetric
        return SqueezingSpectrum(grid, mirror(values), theta, ordering)


def _mirrored_grid(freq_hz: np.ndarray, gamma_tot: float):
    if freq_hz[0] != 0:
        raise ValueError("mirroring needs the DC bin")
    d_omega = TWO_PI * (freq_hz[1] - freq_hz[0]) / gamma_tot
    n_half = freq_hz.size - 1
    grid = FrequencyGrid.from_spacing(d_omega, n_half)

    def mirror(values):
        values = np.asarray(values)
        return np.concatenate([values[:0:-1], values])

    return grid, mirror


def _as_matrix(records) -> np.ndarray:
    if isinstance(records, np.ndarray):
        arr = records if records.ndim == 2 else records[None, :]
    else:
        records = list(records)
        if not records:
            raise ValueError("no records")
        lengths = {np.shape(r) for r in records}
        if len(lengths) != 1:
            raise ValueError("records must have equal lengths")
        arr = np.asarray(records, dtype=float)
    if arr.shape[0] == 0:
        raise ValueError("no records")
    return arr


def _window(name: str | None, n: int) -> np.ndarray | None:
    if name is None or name == "rectangular":
        return None
    if name == "hann":
        w = np.hanning(n)
    elif name == "hamming":
        w = np.hamming(n)
    else:
        raise ValueError(f"unknown window {name!r}")
    return w / np.sqrt(np.mean(w**2))


def periodograms(records, window: str | None = None) -> np.ndarray:
    """Per-record ``|rfft(x)|^2 / n``, one row per record."""
    arr = _as_matrix(records)
    n = arr.shape[1]
    w = _window(window, n)
    if w is not None:
        arr = arr * w
    spec = np.fft.rfft(arr, axis=1)
    return (spec.real**2 + spec.imag**2) / n


def averaged_periodogram(records, sample_rate: float, window: str | None = None) -> RealSpectrum:
    """Mean periodogram of equal-length records; unit white noise gives 1."""
    p = periodograms(records, window)
    n = _as_matrix(records).shape[1] if not isinstance(records, np.ndarray) else records.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    return RealSpectrum(freqs, p.mean(axis=0), p.shape[0])


def normalized_squeezing_spectrum(probe_psd: RealSpectrum, vacuum_psd: RealSpectrum) -> NormalizedSpectrum:
    if probe_psd.freq_hz.shape != vacuum_psd.freq_hz.shape or not np.allclose(probe_psd.freq_hz, vacuum_psd.freq_hz):
        raise ValueError("probe and vacuum spectra must share frequency bins")
    if np.any(vacuum_psd.values <= 0):
        dead = probe_psd.freq_hz[vacuum_psd.values <= 0]
        raise ValueError(f"vacuum reference vanishes at {dead.size} bins (first {dead[0]:.4g} Hz)")
    sym = probe_psd.values / vacuum_psd.values
    return NormalizedSpectrum(probe_psd.freq_hz, sym, (sym - 1.0) / 4.0)


def extract_theta(beat: np.ndarray, sample_rate: float, f_het: float, min_snr: float = 10.0) -> float:
    """LO phase from the beat-note DFT coefficient at ``f_het``, in [0, 2 pi).

    A beat ``a cos(2 pi f t + theta)`` returns ``theta``.  The beat power must
    exceed ``min_snr`` times the median periodogram level.
    """
    x = np.asarray(beat, dtype=float)
    n = x.size
    k = f_het * n / sample_rate
    k_int = int(round(k))
    if abs(k - k_int) < 1e-9:
        coeff = np.fft.rfft(x)[k_int]
        background = np.fft.rfft(x)
    else:
        t = np.arange(n) / sample_rate
        coeff = np.sum(x * np.exp(-2j * math.pi * f_het * t))
        background = np.fft.rfft(x)
    power = abs(coeff) ** 2 / n
    level = np.median(np.abs(background) ** 2 / n)
    if power == 0 or (level > 0 and power / level < min_snr):
        raise LowConfidenceError(f"beat note SNR {power / level if level else 0:.3g} below {min_snr}")
    return float(math.atan2(coeff.imag, coeff.real) % TWO_PI)


def band_mask(freq_hz: np.ndarray, f_min: float, f_max: float) -> np.ndarray:
    if not f_min < f_max:
        raise ValueError("f_min must be below f_max")
    mask = (freq_hz >= f_min) & (freq_hz <= f_max)
    if not mask.any():
        raise ValueError(f"no frequency bins in [{f_min:g}, {f_max:g}] Hz")
    return mask


def band_noise(spec, f_min: float, f_max: float) -> float:
    """Mean of the symmetric-ordered (vacuum-normalized) spectrum over a band."""
    if isinstance(spec, NormalizedSpectrum):
        freq, values = spec.freq_hz, spec.symmetric
    else:
        freq, values = spec.freq_hz, spec.values
    return float(np.mean(values[band_mask(freq, f_min, f_max)]))


@dataclass(frozen=True)
class NoisePoint:
    theta: float
    noise: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.noise > 0:
            raise ValueError("noise must be positive")


def bin_noise_by_theta(theta: np.ndarray, noise: np.ndarray, n_bins: int = 36) -> list[NoisePoint]:
    """Average per-repetition noise in equal LO-phase bins; weights are inverse squared standard errors."""
    theta = np.asarray(theta) % TWO_PI
    noise = np.asarray(noise, dtype=float)
    edges = np.linspace(0.0, TWO_PI, n_bins + 1)
    idx = np.clip(np.digitize(theta, edges) - 1, 0, n_bins - 1)
    points = []
    for b in range(n_bins):
        sel = idx == b
        m = int(sel.sum())
        if m < 2:
            continue
        sem2 = noise[sel].var(ddof=1) / m
        points.append(NoisePoint(float(np.mean(theta[sel])), float(noise[sel].mean()), 1.0 / sem2 if sem2 > 0 else 1.0))
    return points


def _max_circular_gap(theta: np.ndarray) -> float:
    t = np.sort(np.asarray(theta) % TWO_PI)
    gaps = np.diff(np.concatenate([t, [t[0] + TWO_PI]]))
    return float(gaps.max())


def fit_cosine(points, absolute_sigma: bool = True) -> FitResult:
    """Weighted fit of ``-A cos(2 theta + phi) + c``; ``A >= 0``, ``phi`` in (-pi, pi]."""
    points = list(points)
    if len(points) < 6:
        raise ValueError("cosine fit needs at least 6 points")
    theta = np.array([p.theta for p in points])
    y = np.array([p.noise for p in points])
    sw = np.sqrt(np.array([p.weight for p in points]))
    if TWO_PI - _max_circular_gap(theta) < math.pi:
        raise ValueError("points must span at least pi in theta")

    # linear projections: y = c + a cos 2t + b sin 2t, a = -A cos phi, b = A sin phi
    design = np.column_stack([np.ones_like(theta), np.cos(2 * theta), np.sin(2 * theta)])
    c0, a0, b0 = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)[0]
    p0 = np.array([math.hypot(a0, b0), math.atan2(b0, -a0), c0])

    def residual(p):
        return sw * (y - (-p[0] * np.cos(2 * theta + p[1]) + p[2]))

    def jacobian(p):
        arg = 2 * theta + p[1]
        ja = np.cos(arg)
        jphi = -p[0] * np.sin(arg)
        jc = -np.ones_like(theta)
        return sw[:, None] * np.column_stack([ja, jphi, jc])

    result = levenberg_marquardt(
        residual, jacobian, p0, ("A", "varphi", "c"), scale_covariance=not absolute_sigma
    )
    a, phi, c = result.params
    if a < 0:
        a, phi = -a, phi + math.pi
    phi = math.remainder(phi, TWO_PI)
    if phi == -math.pi:
        phi = math.pi
    result.params = np.array([a, phi, c])
    if a <= 1e-14 * max(abs(c), 1.0):
        result.covariance[1, :] = result.covariance[:, 1] = 0.0
        result.covariance[1, 1] = np.inf
        result.message = "amplitude vanishes; phase unconstrained"
    result.extra["min_noise"] = float(c - a)
    result.extra["max_noise"] = float(c + a)
    return result


@dataclass(eq=False)
class ThetaBinnedSpectra:
    """Mean normally ordered spectra of the repetitions near each target LO phase."""

    targets: tuple[float, ...]
    freq_hz: np.ndarray
    means: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray


def _circular_distance(a, b):
    return np.abs(np.remainder(np.asarray(a) - b + math.pi, TWO_PI) - math.pi)


def bin_spectra_by_theta(
    theta: np.ndarray,
    spectra: np.ndarray,
    freq_hz: np.ndarray,
    targets=MAGNITUDE_TARGETS,
    half_width: float = math.radians(18.0),
) -> ThetaBinnedSpectra:
    theta = np.asarray(theta, dtype=float)
    spectra = np.asarray(spectra, dtype=float)
    means, errs, counts = [], [], []
    for target in targets:
        sel = _circular_distance(theta, target) <= half_width
        m = int(sel.sum())
        counts.append(m)
        if m == 0:
            means.append(np.full(spectra.shape[1], np.nan))
            errs.append(np.full(spectra.shape[1], np.nan))
            continue
        block = spectra[sel]
        means.append(block.mean(axis=0))
        errs.append(block.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.full(spectra.shape[1], np.inf))
    return ThetaBinnedSpectra(tuple(targets), np.asarray(freq_hz), np.array(means), np.array(errs), np.array(counts))


@dataclass(eq=False)
class MagnitudeResult:
    freq_hz: np.ndarray
    magnitude: np.ndarray
    stderr: np.ndarray
    mask: np.ndarray
    """True where the four phase bins disagree with the expected sign pattern."""


def reconstruct_magnitude(
    binned: ThetaBinnedSpectra, drive: Drive, ens: EmitterEnsemble, eta: float, n_sigma: float = 3.0
) -> MagnitudeResult:
    """``|phi(w)| = 16 beta / (s eta) * mean_i |S_theta_i(w)|`` over the four LO-phase bins.

    Units of ``1 / gamma_tot``.  Bins are masked where a phase bin has the
    wrong sign (relative to the consensus) by more than ``n_sigma`` errors.
    """
    missing = [t for t, c in zip(binned.targets, binned.counts) if c == 0]
    if missing:
        names = ", ".join(f"{math.degrees(t):.0f} deg" for t in missing)
        raise ValueError(f"no repetitions in theta bins: {names}")
    if eta <= 0 or drive.s <= 0 or ens.beta <= 0:
        raise ValueError("magnitude reconstruction needs eta, s and beta > 0")
    scale = 16.0 * ens.beta / (drive.s * eta)
    targets = np.asarray(binned.targets)
    pattern = np.cos(2.0 * targets)[:, None]
    consensus = np.sign(np.sum(-pattern * binned.means, axis=0))
    consensus[consensus == 0] = 1.0
    aligned = -pattern * binned.means * consensus
    err = np.where(np.isfinite(binned.stderr), binned.stderr, 0.0)
    mask = np.any(aligned < -n_sigma * err, axis=0)
    magnitude = scale * np.mean(np.abs(binned.means), axis=0)
    stderr = scale * np.sqrt(np.sum(err**2, axis=0)) / len(targets)
    return MagnitudeResult(binned.freq_hz, magnitude, stderr, mask)


@dataclass(eq=False)
class PhaseResult:
    """Per-bin complex entangled spectrum from LO-phase resolved fits (units 1/gamma_tot)."""

    freq_hz: np.ndarray
    phi: np.ndarray
    re_stderr: np.ndarray
    im_stderr: np.ndarray
    offset: np.ndarray
    mask: np.ndarray
    """True where the fitted amplitude is below one standard error (phase undefined)."""

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.phi)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.phi)


def reconstruct_phase(
    theta: np.ndarray,
    spectra: np.ndarray,
    freq_hz: np.ndarray,
    drive: Drive,
    ens: EmitterEnsemble,
    eta: float,
    min_samples: int = 6,
) -> PhaseResult:
    """Fit ``S(theta, w) = -A(w) cos(2 theta + phase(w)) + c(w)`` in every frequency bin.

    The model is linear in ``(c, A cos phase, A sin phase)``, so the fit is
    solved directly for all bins at once; it has the same optimum as the
    nonlinear cosine fit.  ``spectra`` holds one normally ordered spectrum
    per repetition.
    """
    theta = np.asarray(theta, dtype=float)
    spectra = np.asarray(spectra, dtype=float)
    if theta.size < min_samples:
        raise ValueError(f"phase fit needs >= {min_samples} LO phases, got {theta.size}")
    if TWO_PI - _max_circular_gap(theta) < math.pi:
        raise ValueError("LO phases must span at least pi")
    design = np.column_stack([np.ones_like(theta), np.cos(2 * theta), np.sin(2 * theta)])
    gram_inv = np.linalg.inv(design.T @ design)
    coef = gram_inv @ (design.T @ spectra)
    resid = spectra - design @ coef
    dof = max(theta.size - 3, 1)
    sigma2 = np.sum(resid**2, axis=0) / dof
    scale = 16.0 * ens.beta / (drive.s * eta)
    # S = -(s eta / 16 beta) [cos 2t Re(phi) - sin 2t Im(phi)]
    re = -scale * coef[1]
    im = scale * coef[2]
    re_se = scale * np.sqrt(sigma2 * gram_inv[1, 1])
    im_se = scale * np.sqrt(sigma2 * gram_inv[2, 2])
    phi = re + 1j * im
    mask = np.abs(phi) < np.hypot(re_se, im_se)
    return PhaseResult(np.asarray(freq_hz), phi, re_se, im_se, coef[0], mask)


@dataclass(eq=False)
class WavefunctionEstimate:
    spectrum: ComplexSpectrum
    time_domain: TimeDomainWavefunction
    re_stderr: np.ndarray
    im_stderr: np.ndarray


def reconstruct_wavefunction(phase: PhaseResult, gamma_tot: float, tau_max: float = 10.0) -> WavefunctionEstimate:
    """Complex ``phi(tau)`` on ``|tau| <= tau_max`` (units 1/gamma_tot) with pointwise standard errors."""
    grid, mirror = _mirrored_grid(phase.freq_hz, gamma_tot)
    spectrum = ComplexSpectrum(grid, mirror(phase.phi))
    full = to_time_domain(spectrum)
    keep = np.abs(full.tau) <= tau_max
    tau = full.tau[keep]
    # both mirror bins carry the same estimate, so their weights add coherently
    w = grid.trapezoid_weights()
    n_half = phase.freq_hz.size - 1
    half_w = w[n_half:].copy()
    half_w[1:] *= 2.0
    omega = grid.omega[n_half:]
    coeff = half_w[None, :] * np.cos(np.outer(tau, omega)) / TWO_PI
    re_se = np.sqrt((coeff**2) @ (phase.re_stderr**2))
    im_se = np.sqrt((coeff**2) @ (phase.im_stderr**2))
    return WavefunctionEstimate(spectrum, TimeDomainWavefunction(tau, full.values[keep]), re_se, im_se)


def _transmission_model(power, beta, n_atoms, kappa):
    """``T`` and its partials in ``(beta, N)`` for ``s = kappa * beta * P``."""
    x = kappa * beta * power
    od = 4.0 * beta * n_atoms
    log_z = np.log(x) + x - od
    w = np.array([lambert_w_log(v) for v in log_z])
    t = w / x
    dw_dlogz = w / (1.0 + w)
    # dT/dx at fixed od, dT/d(od) at fixed x
    dt_dx = (dw_dlogz * (1.0 / x + 1.0)) / x - w / x**2
    dt_dod = -dw_dlogz / x
    d_beta = dt_dx * (x / beta) + dt_dod * 4.0 * n_atoms
    d_n = dt_dod * 4.0 * beta
    return t, d_beta, d_n


def fit_beta_n(
    power_w,
    transmission,
    *,
    sigma=None,
    gamma_tot: float = TWO_PI * 5.2e6,
    wavelength: float = 852.35e-9,
    beta0: float = 0.01,
) -> FitResult:
    """Fit ``beta`` and ``N`` to power-dependent ensemble transmission.

    The saturation parameter is ``s = P / P_sat(beta)`` with
    ``P_sat = hbar omega gamma_tot / (8 beta)``, which makes ``beta`` and
    ``N`` separately identifiable.  Default uncertainties are relative
    (``sigma = T``), matching multiplicative noise.
    """
    power = np.asarray(power_w, dtype=float)
    trans = np.asarray(transmission, dtype=float)
    if power.size < 5 or power.shape != trans.shape:
        raise ValueError("need at least 5 (power, transmission) points")
    if np.any(power <= 0) or np.any(trans <= 0):
        raise ValueError("powers and transmissions must be positive")
    if power.max() / power.min() < 10.0:
        raise ValueError("input powers must span at least one decade")
    kappa = 1.0 / (saturation_power(1.0, gamma_tot, wavelength))
    sig = trans.copy() if sigma is None else np.broadcast_to(np.asarray(sigma, dtype=float), trans.shape)

    order = np.argsort(power)
    n0 = -math.log(min(trans[order[0]], 0.999999)) / (4.0 * beta0)

    def residual(p):
        if p[0] <= 0 or p[1] <= 0:
            return np.full(trans.shape, 1e6)
        t, _, _ = _transmission_model(power, p[0], p[1], kappa)
        return (trans - t) / sig

    def jacobian(p):
        _, db, dn = _transmission_model(power, p[0], p[1], kappa)
        return -np.column_stack([db, dn]) / sig[:, None]

    result = levenberg_marquardt(residual, jacobian, [beta0, n0], ("beta", "n_atoms"))
    flat = np.ptp(trans) <= 1e-6 * np.max(trans)
    if flat or not np.all(np.isfinite(np.diag(result.covariance))):
        result.converged = False
        result.message = "non-identifiable: transmission does not vary with power"
    result.extra["model"] = lambda p: lambert_beer_transmission(kappa * result["beta"] * np.asarray(p), result["beta"], result["n_atoms"])
    return result
