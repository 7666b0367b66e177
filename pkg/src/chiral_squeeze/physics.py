"""Weak-drive optics of N two-level emitters chirally coupled to a waveguide.

All frequencies on a :class:`FrequencyGrid` are in units of the total decay
rate ``gamma_tot``; spectra of the entangled two-photon wavefunction carry
units of ``1 / gamma_tot`` and delays are in ``1 / gamma_tot``.  The photon
group velocity is absorbed into the delay coordinate ``tau = x / v_g``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

__all__ = [
    "EmitterEnsemble",
    "Drive",
    "FrequencyGrid",
    "ComplexSpectrum",
    "TimeDomainWavefunction",
    "SqueezingSpectrum",
    "GridTruncationWarning",
    "LeadingOrderWarning",
    "transmission_coefficient",
    "single_atom_kernels",
    "mean_quadrature",
    "entangled_wavefunction_single",
    "single_atom_spectrum",
    "compose_entangled_spectrum",
    "squeezing_spectrum",
    "asymptotic_spectrum",
    "integrated_wavefunction_at_zero",
    "squeezing_angle_chi",
    "to_time_domain",
    "apply_detection_efficiency",
    "xi_squared",
    "saturation_power",
]

TWO_PI = 2.0 * math.pi


class GridTruncationWarning(UserWarning):
    """The frequency grid is too narrow or too coarse for the spectrum."""


class LeadingOrderWarning(UserWarning):
    """Drive strong enough that the O(s) truncation is questionable."""


@dataclass(frozen=True)
class EmitterEnsemble:
    """Chain of identical emitters.

    ``gamma_tot`` and ``delta`` are angular frequencies in the same units
    (rad/s, or ``gamma_tot=1`` for natural units).
    """

    beta: float
    gamma_tot: float = 1.0
    delta: float = 0.0
    n_atoms: int = 1

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.gamma_tot > 0:
            raise ValueError(f"gamma_tot must be positive, got {self.gamma_tot}")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 0:
            raise ValueError(f"n_atoms must be a non-negative integer, got {self.n_atoms}")
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))

    @property
    def detuning(self) -> float:
        """Drive detuning in units of ``gamma_tot``."""
        return self.delta / self.gamma_tot

    @property
    def optical_depth(self) -> float:
        return 4.0 * self.beta * self.n_atoms


@dataclass(frozen=True)
class Drive:
    """Coherent probe: saturation parameter and local-oscillator phase."""

    s: float
    theta: float = 0.0
    p_sat: float | None = None

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError(f"saturation parameter must be >= 0, got {self.s}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    @classmethod
    def from_power(cls, p_in: float, p_sat: float, theta: float = 0.0) -> "Drive":
        return cls(s=p_in / p_sat, theta=theta, p_sat=p_sat)

    @property
    def power(self) -> float:
        if self.p_sat is None:
            raise ValueError("p_sat not set; cannot convert s to power")
        return self.s * self.p_sat

    def with_theta(self, theta: float) -> "Drive":
        return Drive(self.s, theta, self.p_sat)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Uniform grid of angular frequencies (units of ``gamma_tot``), symmetric about 0."""

    omega: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 1 or omega.size < 3:
            raise ValueError("grid needs at least 3 points")
        d = np.diff(omega)
        if np.any(d <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.max(np.abs(d - d.mean())) > 1e-12 * max(abs(d.mean()), np.max(np.abs(omega))):
            raise ValueError("grid spacing must be uniform")
        if np.max(np.abs(omega + omega[::-1])) > 1e-12 * np.max(np.abs(omega)):
            raise ValueError("grid must be symmetric about zero")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def symmetric(cls, max_gamma: float = 20.0, n_points: int = 4096) -> "FrequencyGrid":
        """Grid on ``[-max_gamma, max_gamma]`` built to be exactly mirror-symmetric."""
        if n_points < 3:
            raise ValueError("n_points must be >= 3")
        step = 2.0 * max_gamma / (n_points - 1)
        if n_points % 2:
            half = step * np.arange(1, n_points // 2 + 1)
            omega = np.concatenate([-half[::-1], [0.0], half])
        else:
            half = step * (np.arange(n_points // 2) + 0.5)
            omega = np.concatenate([-half[::-1], half])
        return cls(omega)

    @classmethod
    def from_spacing(cls, d_omega: float, n_half: int) -> "FrequencyGrid":
        """Odd grid ``k * d_omega`` for ``k = -n_half .. n_half``."""
        k = np.arange(1, n_half + 1)
        half = d_omega * k
        return cls(np.concatenate([-half[::-1], [0.0], half]))

    @property
    def d_omega(self) -> float:
        return float((self.omega[-1] - self.omega[0]) / (self.omega.size - 1))

    @property
    def size(self) -> int:
        return self.omega.size

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.size, self.d_omega)
        w[0] = w[-1] = 0.5 * self.d_omega
        return w

    def __eq__(self, other):
        return isinstance(other, FrequencyGrid) and np.array_equal(self.omega, other.omega)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    """Entangled two-photon spectrum ``phi(omega) = int phi(tau) exp(-i omega tau) dtau``."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.omega.shape:
            raise ValueError("values must match the grid")
        object.__setattr__(self, "values", values)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.values)


@dataclass(frozen=True, eq=False)
class TimeDomainWavefunction:
    tau: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class SqueezingSpectrum:
    """Real squeezing spectrum on a frequency grid.

    ``ordering="normal"`` is the normally ordered spectrum (coherent light 0,
    no noise -1/4); ``"symmetric"`` is the shot-noise normalized spectrum
    ``1 + 4 S``.
    """

    grid: FrequencyGrid
    values: np.ndarray
    theta: float = 0.0
    ordering: Literal["normal", "symmetric"] = "normal"
    drive: Drive | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.omega.shape:
            raise ValueError("values must match the grid")
        if self.ordering not in ("normal", "symmetric"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        object.__setattr__(self, "values", values)

    def to_symmetric(self) -> "SqueezingSpectrum":
        if self.ordering == "symmetric":
            return self
        return SqueezingSpectrum(self.grid, 1.0 + 4.0 * self.values, self.theta, "symmetric", self.drive)

    def to_normal(self) -> "SqueezingSpectrum":
        if self.ordering == "normal":
            return self
        return SqueezingSpectrum(self.grid, (self.values - 1.0) / 4.0, self.theta, "normal", self.drive)


def transmission_coefficient(ens: EmitterEnsemble, omega_offset=0.0):
    """Single-atom transmission at detuning ``delta + omega_offset``.

    ``omega_offset`` is in the units of ``ens.delta``; arrays are accepted.
    """
    d = (ens.delta + np.asarray(omega_offset, dtype=float)) / ens.gamma_tot
    t = 1.0 - 2.0 * ens.beta / (1.0 - 2.0j * d)
    return t if np.ndim(t) else complex(t)


def _t(beta: float, detuning):
    return 1.0 - 2.0 * beta / (1.0 - 2.0j * detuning)


def single_atom_kernels(beta: float, detuning: float, omega: np.ndarray):
    """Per-atom coefficients of the two-photon map on a relative-frequency grid.

    Returns ``(pair_transmission, kernel, weight, source)``:

    * ``pair_transmission = t(D + w) t(D - w)``, the linear pass of a photon pair;
    * ``kernel = r(D + w) r(D - w)`` with ``r = t - 1``, the bound-state emission profile;
    * ``weight = r(D + w) + r(D - w)``, the absorption profile a pair is
      projected on before re-emission;
    * ``source = weight`` at ``w = 0``, the same projection for the
      monochromatic (coherent) part.
    """
    r_plus = _t(beta, detuning + omega) - 1.0
    r_minus = _t(beta, detuning - omega) - 1.0
    pair = (1.0 + r_plus) * (1.0 + r_minus)
    kernel = r_plus * r_minus
    weight = r_plus + r_minus
    source = 2.0 * (_t(beta, detuning) - 1.0)
    return pair, kernel, weight, source


def xi_squared(ens: EmitterEnsemble) -> float:
    return ens.beta * ens.n_atoms * (1.0 - ens.beta)


def mean_quadrature(ens: EmitterEnsemble, drive: Drive) -> float:
    """Leading-order mean quadrature in units of sqrt(photon flux)."""
    if ens.beta == 0:
        raise ValueError("undefined normalization: beta = 0 makes the saturation power diverge")
    t = transmission_coefficient(ens)
    delta_phase = ens.n_atoms * math.atan2(t.imag, t.real)
    amplitude = abs(t) ** ens.n_atoms * math.sqrt(drive.s) * math.sqrt(ens.gamma_tot / (8.0 * ens.beta))
    return amplitude * math.cos(drive.theta + delta_phase)


def entangled_wavefunction_single(tau, beta: float, gamma_tot: float = 1.0):
    """Resonant single-emitter entangled wavefunction ``4 beta^2 exp(-|tau| gamma / 2)``."""
    return 4.0 * beta**2 * np.exp(-np.abs(tau) * gamma_tot / 2.0)


def single_atom_spectrum(beta: float, omega):
    """Closed-form resonant single-emitter spectrum ``16 beta^2 / (1 + 4 w^2)``."""
    omega = np.asarray(omega, dtype=float)
    return 16.0 * beta**2 / (1.0 + 4.0 * omega**2)


def _check_grid(grid: FrequencyGrid):
    width = grid.omega[-1]
    if grid.d_omega > 1.0 / 50.0 or width < 10.0:
        # Lorentzian tail of the single-atom kernel beyond the edge, relative to its area
        tail = 1.0 / (math.pi * width)
        warnings.warn(
            f"grid (max {width:.3g}, step {grid.d_omega:.3g}) coarser than recommended; "
            f"estimated truncation error ~{tail:.2e} of the integral",
            GridTruncationWarning,
            stacklevel=3,
        )


def compose_entangled_spectrum(ens: EmitterEnsemble, grid: FrequencyGrid) -> ComplexSpectrum:
    """Entangled spectrum after ``ens.n_atoms`` emitters, built atom by atom.

    The two-photon state after k atoms is ``c_k - phi_k`` with coherent part
    ``c_k = t^(2k)``.  Each atom maps

        phi_{k+1}(w) = T(w) phi_k(w) - K(w) / beta * [c_k r_0 - (1/2pi) int W(q) phi_k(q) dq]

    where ``T``, ``K`` and ``W`` come from :func:`single_atom_kernels` and
    ``r_0 = 2 (t - 1)``.  The integral runs over the grid with the
    trapezoidal rule.
    """
    _check_grid(grid)
    phi = np.zeros(grid.size, dtype=complex)
    if ens.n_atoms == 0 or ens.beta == 0:
        return ComplexSpectrum(grid, phi)
    pair, kernel, weight, source = single_atom_kernels(ens.beta, ens.detuning, grid.omega)
    projector = weight * grid.trapezoid_weights() / TWO_PI
    step = _t(ens.beta, ens.detuning) ** 2
    coherent = 1.0 + 0.0j
    scale = kernel / ens.beta
    for _ in range(ens.n_atoms):
        drive_term = coherent * source - projector @ phi
        phi = pair * phi - scale * drive_term
        coherent *= step
    return ComplexSpectrum(grid, phi)


def squeezing_spectrum(phi: ComplexSpectrum, drive: Drive, ens: EmitterEnsemble) -> SqueezingSpectrum:
    """Normally ordered squeezing spectrum to first order in ``s``."""
    if drive.s > 1:
        warnings.warn(f"s = {drive.s:g} > 1: leading-order spectrum may be inaccurate", LeadingOrderWarning, stacklevel=2)
    if ens.beta == 0:
        if np.any(phi.values != 0):
            raise ValueError("inconsistent input: nonzero entangled spectrum with beta = 0")
        values = np.zeros(phi.grid.size)
    else:
        values = -(drive.s / (16.0 * ens.beta)) * np.real(np.exp(2j * drive.theta) * phi.values)
    return SqueezingSpectrum(phi.grid, values, drive.theta, "normal", drive)


def asymptotic_spectrum(
    ens: EmitterEnsemble,
    drive: Drive,
    grid: FrequencyGrid,
    regime: Literal["small_od", "large_od"],
) -> SqueezingSpectrum:
    """Resonant small- or large-optical-depth limit of the squeezing spectrum."""
    if ens.delta != 0:
        raise ValueError("asymptotic forms are derived for resonant drive only")
    w = grid.omega
    c2 = math.cos(2.0 * drive.theta)
    if regime == "small_od":
        values = -ens.n_atoms * ens.beta * c2 * drive.s / (1.0 + 4.0 * w**2)
    elif regime == "large_od":
        xi2 = xi_squared(ens)
        values = np.zeros_like(w)
        nz = w != 0
        w2 = w[nz] ** 2
        values[nz] = -c2 * drive.s / 16.0 / w2 * np.exp(-xi2 / w2)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return SqueezingSpectrum(grid, values, drive.theta, "normal", drive)


def _tail_fraction(values: np.ndarray) -> float:
    peak = np.max(np.abs(values))
    if peak == 0:
        return 0.0
    return max(abs(values[0]), abs(values[-1])) / peak


def integrated_wavefunction_at_zero(phi: ComplexSpectrum) -> complex:
    """``phi(tau=0) = (1/2pi) int phi(w) dw`` by the trapezoidal rule."""
    tail = _tail_fraction(phi.values)
    if tail > 1e-3:
        edge = phi.grid.omega[-1]
        # 1/w^2 tail beyond each edge integrates to phi(edge) * edge
        estimate = (abs(phi.values[0]) + abs(phi.values[-1])) * edge / TWO_PI
        warnings.warn(
            f"spectrum does not decay at grid edges (edge/peak {tail:.1e}); "
            f"truncated tail ~{estimate:.2e}",
            GridTruncationWarning,
            stacklevel=2,
        )
    return complex(np.sum(phi.grid.trapezoid_weights() * phi.values) / TWO_PI)


def squeezing_angle_chi(phi: ComplexSpectrum, ens: EmitterEnsemble) -> float:
    """Squeezing angle relative to the transmitted mean field, in (-pi, pi]."""
    at_zero = integrated_wavefunction_at_zero(phi)
    if abs(at_zero) == 0:
        raise ValueError("squeezing angle undefined: integrated wavefunction vanishes")
    t = transmission_coefficient(ens)
    chi = math.atan2(at_zero.imag, at_zero.real) - ens.n_atoms * math.atan2(t.imag, t.real)
    chi = math.remainder(chi, TWO_PI)
    return math.pi if chi == -math.pi else chi


def to_time_domain(phi: ComplexSpectrum) -> TimeDomainWavefunction:
    """Inverse transform ``phi(tau) = (1/2pi) sum_k w_k phi(w_k) exp(i w_k tau)``.

    The delay grid is the DFT conjugate of the frequency grid,
    ``tau_j = 2 pi j / (M d_omega)``, ``j = -M//2 .. (M-1)//2``.
    """
    grid = phi.grid
    m = grid.size
    d_omega = grid.d_omega
    j = np.arange(m) - m // 2
    tau = TWO_PI * j / (m * d_omega)
    a = grid.trapezoid_weights() * phi.values
    # sum_k a_k exp(i (w_0 + k dw) tau_j) = exp(i w_0 tau_j) * m * ifft(a)[j mod m]
    summed = m * np.fft.ifft(a)[j % m]
    values = np.exp(1j * grid.omega[0] * tau) * summed / TWO_PI
    return TimeDomainWavefunction(tau, values)


def apply_detection_efficiency(spec: SqueezingSpectrum, eta: float) -> SqueezingSpectrum:
    """Linear loss: normally ordered fluctuations scale by ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"detection efficiency must lie in [0, 1], got {eta}")
    if spec.ordering != "normal":
        raise ValueError("detection efficiency acts on the normally ordered spectrum")
    return SqueezingSpectrum(spec.grid, eta * spec.values, spec.theta, "normal", spec.drive)


HBAR = 1.054571817e-34
SPEED_OF_LIGHT = 299792458.0


def saturation_power(beta: float, gamma_tot: float = TWO_PI * 5.2e6, wavelength: float = 852.35e-9) -> float:
    """Waveguide saturation power ``hbar omega gamma_tot / (8 beta)`` in watts."""
    if beta <= 0:
        raise ValueError("saturation power diverges for beta = 0")
    omega = TWO_PI * SPEED_OF_LIGHT / wavelength
    return HBAR * omega * gamma_tot / (8.0 * beta)
