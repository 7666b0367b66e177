"""Cascaded master-equation ground truth for weakly driven chiral emitter chains.

Density operators are vectorized row-major, so ``vec(A X B) = (A kron B^T) vec(X)``.
Natural units: ``gamma_tot = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .physics import (
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    SqueezingSpectrum,
    compose_entangled_spectrum,
    squeezing_spectrum,
)

__all__ = [
    "MAX_ATOMS",
    "CapacityError",
    "SteadyStateError",
    "InsufficientTauRangeError",
    "CascadedSystem",
    "Correlations",
    "build_liouvillian",
    "trace_preservation_error",
    "kernel_dimension",
    "steady_state",
    "output_correlations",
    "oracle_spectrum_values",
    "oracle_squeezing_spectrum",
    "ComparisonReport",
    "compare_with_composition",
]

MAX_ATOMS = 8
# dense algebra up to this many atoms (1024-dimensional generator), sparse beyond
DENSE_LIMIT = 5


class CapacityError(ValueError):
    pass


class SteadyStateError(RuntimeError):
    pass


class InsufficientTauRangeError(ValueError):
    pass


@dataclass(frozen=True)
class CascadedSystem:
    """``n_atoms`` emitters driven through the waveguide, all rates in units of ``gamma_tot``."""

    n_atoms: int
    beta: float
    s: float
    delta: float = 0.0
    gamma_tot: float = 1.0

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("need at least one atom")
        if self.n_atoms > MAX_ATOMS:
            raise CapacityError(f"{self.n_atoms} atoms exceed the oracle capacity of {MAX_ATOMS}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.s < 0:
            raise ValueError("s must be >= 0")

    @classmethod
    def from_ensemble(cls, ens: EmitterEnsemble, drive: Drive) -> "CascadedSystem":
        return cls(ens.n_atoms, ens.beta, drive.s, ens.detuning)

    @property
    def dimension(self) -> int:
        return 2**self.n_atoms

    @property
    def input_amplitude(self) -> float:
        """Coherent input amplitude ``sqrt(photon flux)``; zero when ``beta = 0``."""
        return 0.0 if self.beta == 0 else math.sqrt(self.s / (8.0 * self.beta))

    @property
    def rabi(self) -> float:
        """Drive term ``sqrt(beta) * alpha`` multiplying ``sigma + sigma^dagger``."""
        return math.sqrt(self.beta) * self.input_amplitude

    @property
    def dense(self) -> bool:
        return self.n_atoms <= DENSE_LIMIT


def _lowering_ops(n: int):
    sm = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))
    ident = sp.identity(2, dtype=complex, format="csr")
    ops = []
    for j in range(n):
        op = sm if j == 0 else ident
        for k in range(1, n):
            op = sp.kron(op, sm if k == j else ident, format="csr")
        ops.append(op)
    return ops


def _operators(sys: CascadedSystem):
    """Hamiltonian, jump operators and the collective waveguide emission operator."""
    n = sys.n_atoms
    ops = _lowering_ops(n)
    couple = math.sqrt(sys.beta)
    emit = [-1j * couple * op for op in ops]
    dim = sys.dimension
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for op in ops:
        h = h - sys.delta * (op.conj().T @ op) + sys.rabi * (op + op.conj().T)
    # feed-forward exchange: atom j sees the field emitted by every k < j
    for j in range(n):
        for k in range(j):
            h = h + 0.5j * (emit[j].conj().T @ emit[k] - emit[k].conj().T @ emit[j])
    collective = sum(emit[1:], emit[0])
    jumps = [collective]
    if sys.beta < 1.0:
        jumps += [math.sqrt(1.0 - sys.beta) * op for op in ops]
    return h.tocsr(), jumps, collective.tocsr()


def build_liouvillian(sys: CascadedSystem):
    """Lindblad generator acting on row-major vectorized density matrices.

    Returned as a dense array for small chains and CSR above that.
    """
    h, jumps, _ = _operators(sys)
    dim = sys.dimension
    ident = sp.identity(dim, dtype=complex, format="csr")

    def spre(a):
        return sp.kron(a, ident, format="csr")

    def spost(a):
        return sp.kron(ident, a.T, format="csr")

    gen = -1j * (spre(h) - spost(h))
    for c in jumps:
        cd = c.conj().T
        cdc = (cd @ c).tocsr()
        gen = gen + spre(c) @ spost(cd) - 0.5 * (spre(cdc) + spost(cdc))
    gen = gen.tocsr()
    return gen.toarray() if sys.dense else gen


def _trace_row(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex).reshape(-1)


def trace_preservation_error(gen) -> float:
    """``max |Tr L(.)|`` over basis elements: the generator's diagonal-row sums."""
    dim = int(round(math.sqrt(gen.shape[0])))
    row = _trace_row(dim)
    out = gen.T @ row if sp.issparse(gen) else row @ gen
    return float(np.max(np.abs(out)))


def kernel_dimension(gen, tol: float = 1e-10) -> int:
    """Number of (numerically) zero singular values; dense generators only."""
    mat = gen.toarray() if sp.issparse(gen) else np.asarray(gen)
    if mat.shape[0] > 4**DENSE_LIMIT:
        raise CapacityError("kernel dimension needs a dense SVD; too large")
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv <= tol * max(sv[0], 1.0)))


def steady_state(sys: CascadedSystem, gen=None) -> np.ndarray:
    """Unique steady-state density matrix.

    Dense generators add the trace constraint as a rank-one term,
    ``(L - rho_ref <I|) x = -rho_ref``, which is nonsingular exactly when the
    kernel is one-dimensional.  Sparse generators relax in time instead.
    """
    gen = build_liouvillian(sys) if gen is None else gen
    dim = sys.dimension
    row = _trace_row(dim)
    ref = row / dim
    if sp.issparse(gen):
        x = _relaxed_state(gen, dim)
    else:
        bordered = gen - np.outer(ref, row)
        try:
            x = sla.solve(bordered, -ref)
        except (sla.LinAlgError, ValueError) as exc:
            raise SteadyStateError(f"singular steady-state solve: {exc}") from exc
        cond = np.linalg.cond(bordered)
        if not np.isfinite(cond) or cond > 1e13:
            raise SteadyStateError("steady state not unique (ill-conditioned solve)")
    rho = x.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


RELAX_TIME = 200.0


def _relaxed_state(gen, dim: int, tol: float = 1e-12) -> np.ndarray:
    """Steady state of a large sparse generator by long-time evolution.

    Sparse LU fill-in is prohibitive beyond ~6 atoms.  Two different initial
    states (ground and maximally mixed) must relax to the same operator,
    which also certifies uniqueness.
    """
    ground = np.zeros((dim, dim), dtype=complex)
    ground[0, 0] = 1.0
    mixed = np.eye(dim, dtype=complex) / dim
    finals = []
    for start in (ground, mixed):
        x = spla.expm_multiply(gen * RELAX_TIME, start.reshape(-1))
        finals.append(x / x.reshape(dim, dim).trace())
    residual = float(np.max(np.abs(gen @ finals[0])))
    scale = float(np.max(np.abs(finals[0])))
    if residual > tol * max(scale, 1.0):
        raise SteadyStateError(f"steady state not reached (residual {residual:.2e})")
    if np.max(np.abs(finals[0] - finals[1])) > 1e-9 * scale:
        raise SteadyStateError("steady state not unique: different initial states relax apart")
    return finals[0]


@dataclass(eq=False)
class Correlations:
    """Connected two-time correlators of the transmitted field ``b = alpha + sum_j L_j``."""

    tau: np.ndarray
    g_bb: np.ndarray
    """``<b(tau) b(0)> - <b>^2``"""
    g_bdb: np.ndarray
    """``<b^dagger(tau) b(0)> - |<b>|^2``"""
    mean_field: complex
    """``<b>`` relative to the input amplitude, i.e. the linear transmission."""


def default_tau_grid() -> np.ndarray:
    return np.linspace(0.0, 40.0, 2048)


def _propagate(gen, v: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """``exp(L tau_k) v`` for a uniform grid starting at 0."""
    d = np.diff(tau)
    if tau[0] != 0 or np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * tau[-1]:
        raise ValueError("tau grid must be uniform and start at 0")
    if sp.issparse(gen):
        return spla.expm_multiply(gen, v, start=0.0, stop=float(tau[-1]), num=tau.size, endpoint=True)
    step = sla.expm(gen * d[0])
    out = np.empty((tau.size, v.size), dtype=complex)
    out[0] = v
    for k in range(1, tau.size):
        out[k] = step @ out[k - 1]
    return out


def output_correlations(sys: CascadedSystem, tau_grid=None, gen=None) -> Correlations:
    """Quantum-regression correlators on a uniform delay grid (default ``[0, 40]``, 2048 points)."""
    tau = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    alpha = sys.input_amplitude
    if alpha == 0:
        zeros = np.zeros(tau.size, dtype=complex)
        return Correlations(tau, zeros, zeros.copy(), complex(1.0))
    gen = build_liouvillian(sys) if gen is None else gen
    rho = steady_state(sys, gen)
    _, _, emit = _operators(sys)
    emit_d = emit.conj().T.tocsr()
    mean_emit = complex(np.trace(emit @ rho))
    # the input amplitude drops out of connected correlators
    v = (emit @ rho - mean_emit * rho).reshape(-1)
    states = _propagate(gen, v, tau)
    # Tr(A X) = sum_ij A_ji X_ij = vec(A^T) . vec(X)
    a_row = emit.T.toarray().reshape(-1)
    ad_row = emit_d.T.toarray().reshape(-1)
    g_bb = states @ a_row
    g_bdb = states @ ad_row
    mean_field = (alpha + mean_emit) / alpha
    return Correlations(tau, g_bb, g_bdb, complex(mean_field))


def _resolvent_spectrum(sys: CascadedSystem, gen, omega: np.ndarray):
    """``int_0^inf exp(L tau + i w tau) v dtau`` per frequency, via bordered solves."""
    dim = sys.dimension
    rho = steady_state(sys, gen)
    _, _, emit = _operators(sys)
    mean_emit = complex(np.trace(emit @ rho))
    v = (emit @ rho - mean_emit * rho).reshape(-1)
    row = _trace_row(dim)
    projector = np.outer(rho.reshape(-1), row)
    a_row = emit.T.toarray().reshape(-1)
    ad_row = emit.conj().toarray().reshape(-1)
    out_bb = np.empty(omega.size, dtype=complex)
    out_bdb = np.empty(omega.size, dtype=complex)
    dense = gen.toarray() if sp.issparse(gen) else gen
    for i, w in enumerate(omega):
        x = np.linalg.solve(dense - projector + 1j * w * np.eye(dim * dim), -v)
        out_bb[i] = a_row @ x
        out_bdb[i] = ad_row @ x
    return out_bb, out_bdb


def oracle_spectrum_values(
    sys: CascadedSystem,
    theta: float,
    omega,
    tau_grid=None,
    method: str = "trapezoid",
    decay_tol: float = 1e-8,
    leading_order: bool = False,
) -> np.ndarray:
    """Normally ordered squeezing spectrum at arbitrary frequencies, photon-flux units.

    ``C(tau) = Re[e^{2i theta} G_bb]/2 + Re[G_bdb]/2`` is even in ``tau``, so
    ``S(w) = 2 int_0^inf C(tau) cos(w tau) dtau``.  ``method="resolvent"``
    evaluates the half-line integral exactly with linear solves (small chains).

    The exact spectrum carries saturation corrections of relative size
    about ``5 s``.  ``leading_order=True`` removes them by Richardson
    extrapolation, ``2 S(s) - S(2 s) / 2``, leaving the part linear in ``s``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if leading_order:
        doubled = CascadedSystem(sys.n_atoms, sys.beta, 2.0 * sys.s, sys.delta, sys.gamma_tot)
        kw = dict(tau_grid=tau_grid, method=method, decay_tol=decay_tol)
        return 2.0 * oracle_spectrum_values(sys, theta, omega, **kw) - 0.5 * oracle_spectrum_values(
            doubled, theta, omega, **kw
        )
    if sys.input_amplitude == 0:
        return np.zeros(omega.size)
    if method == "resolvent":
        gen = build_liouvillian(sys)
        phase = np.exp(2j * theta)
        bb_p, bdb_p = _resolvent_spectrum(sys, gen, omega)
        bb_m, bdb_m = _resolvent_spectrum(sys, gen, -omega)
        # int_0^inf Re(g) cos(w t) dt = Re[G(w) + G(-w)] / 2 with G(w) = int_0^inf g e^{iwt} dt
        return 0.5 * np.real(phase * (bb_p + bb_m)) + 0.5 * np.real(bdb_p + bdb_m)
    if method != "trapezoid":
        raise ValueError(f"unknown method {method!r}")
    corr = output_correlations(sys, tau_grid)
    c = 0.5 * np.real(np.exp(2j * theta) * corr.g_bb) + 0.5 * np.real(corr.g_bdb)
    peak = np.max(np.abs(c))
    if peak > 0 and abs(c[-1]) > decay_tol * peak:
        raise InsufficientTauRangeError(
            f"correlator at tau = {corr.tau[-1]:g} is {abs(c[-1]) / peak:.2e} of its peak (> {decay_tol:g})"
        )
    dt = corr.tau[1] - corr.tau[0]
    w = np.full(corr.tau.size, dt)
    w[0] = w[-1] = 0.5 * dt
    return 2.0 * np.cos(np.outer(omega, corr.tau)) @ (w * c)


def oracle_squeezing_spectrum(
    sys: CascadedSystem, theta: float, omega_grid: FrequencyGrid, **kwargs
) -> SqueezingSpectrum:
    """:func:`oracle_spectrum_values` on a symmetric frequency grid."""
    grid = omega_grid if isinstance(omega_grid, FrequencyGrid) else FrequencyGrid(omega_grid)
    drive = Drive(sys.s, theta)
    values = oracle_spectrum_values(sys, theta, grid.omega, **kwargs)
    return SqueezingSpectrum(grid, values, drive.theta, "normal", drive)


@dataclass(eq=False)
class ComparisonReport:
    n_atoms: int
    beta: float
    s: float
    delta: float
    theta: float
    omega: np.ndarray
    oracle: np.ndarray
    composed: np.ndarray
    threshold: float = 0.01
    leading_order: bool = False

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.oracle)))

    @property
    def deviation(self) -> np.ndarray:
        return self.composed - self.oracle

    @property
    def max_relative_deviation(self) -> float:
        dev = float(np.max(np.abs(self.deviation)))
        if self.peak == 0:
            return 0.0 if dev == 0 else math.inf
        return dev / self.peak

    @property
    def passed(self) -> bool:
        return self.max_relative_deviation <= self.threshold

    def summary(self) -> dict:
        return {
            "n_atoms": self.n_atoms,
            "beta": self.beta,
            "s": self.s,
            "delta_over_gamma": self.delta,
            "theta": self.theta,
            "peak_abs_oracle": self.peak,
            "max_deviation_over_peak": self.max_relative_deviation,
            "threshold": self.threshold,
            "leading_order": self.leading_order,
            "passed": self.passed,
        }

    def to_text(self) -> str:
        lines = [f"{k}: {v}" for k, v in self.summary().items()]
        lines.append("omega_over_gamma,oracle,composed,deviation_over_peak")
        scale = self.peak if self.peak > 0 else 1.0
        for w, o, c in zip(self.omega, self.oracle, self.composed):
            lines.append(f"{w!r},{o!r},{c!r},{(c - o) / scale!r}")
        return "\n".join(lines) + "\n"


def compare_with_composition(
    sys: CascadedSystem,
    theta: float = 0.0,
    window: float = 5.0,
    grid: FrequencyGrid | None = None,
    threshold: float = 0.01,
    method: str = "trapezoid",
    leading_order: bool = False,
) -> ComparisonReport:
    """Oracle versus composed spectrum on ``|w| <= window`` (units of ``gamma_tot``)."""
    grid = FrequencyGrid.symmetric(40.0, 8001) if grid is None else grid
    ens = EmitterEnsemble(sys.beta, 1.0, sys.delta, sys.n_atoms)
    drive = Drive(sys.s, theta)
    composed = squeezing_spectrum(compose_entangled_spectrum(ens, grid), drive, ens)
    keep = np.abs(grid.omega) <= window
    omega = grid.omega[keep]
    oracle = oracle_spectrum_values(sys, theta, omega, method=method, leading_order=leading_order)
    return ComparisonReport(
        sys.n_atoms, sys.beta, sys.s, sys.delta, drive.theta, omega, oracle, composed.values[keep], threshold, leading_order
    )
