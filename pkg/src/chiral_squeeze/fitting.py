"""Small Levenberg-Marquardt solver shared by the cosine and transmission fits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["FitResult", "levenberg_marquardt"]


@dataclass
class FitResult:
    """Outcome of a weighted least-squares fit.

    ``covariance`` is scaled by the reduced chi-square when
    ``scale_covariance`` was requested; unconstrained directions carry
    ``inf`` on the diagonal.
    """

    names: tuple[str, ...]
    params: np.ndarray
    covariance: np.ndarray
    residual_rms: float
    converged: bool
    n_iter: int
    chi2: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def stderr(self, name: str) -> float:
        i = self.names.index(name)
        return float(np.sqrt(self.covariance[i, i]))

    def as_dict(self) -> dict:
        return {
            "params": {n: float(p) for n, p in zip(self.names, self.params)},
            "covariance": [[float(c) for c in row] for row in self.covariance],
            "residual_rms": float(self.residual_rms),
            "chi2": float(self.chi2),
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "message": self.message,
        }


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0,
    names: tuple[str, ...],
    *,
    xtol: float = 1e-10,
    max_iter: int = 200,
    scale_covariance: bool = True,
) -> FitResult:
    """Minimize ``sum(residual(p)**2)``; ``residual`` must already be weighted.

    Stops when the absolute parameter step falls below ``xtol`` (relative to
    ``max(1, |p|)``) or after ``max_iter`` iterations.  The best iterate is
    always returned.
    """
    p = np.array(p0, dtype=float)
    r = residual(p)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        jac = jacobian(p)
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag == 0] = 1.0
        accepted = False
        step = np.zeros_like(p)
        for _ in range(40):
            try:
                step = -np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            r_trial = residual(trial)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                p, r, cost = trial, r_trial, cost_trial
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        small = np.all(np.abs(step) <= xtol * np.maximum(1.0, np.abs(p)))
        if small or not accepted:
            # a rejected step at huge damping means we sit at the minimum
            converged = small or lam > 1e8
            break
    jac = jacobian(p)
    cov = _covariance(jac)
    dof = max(r.size - p.size, 1)
    chi2 = cost
    if scale_covariance:
        cov = cov * (chi2 / dof)
    return FitResult(
        names=tuple(names),
        params=p,
        covariance=cov,
        residual_rms=float(np.sqrt(cost / max(r.size, 1))),
        converged=bool(converged),
        n_iter=n_iter,
        chi2=chi2,
        message="converged" if converged else "iteration limit reached",
    )


def _covariance(jac: np.ndarray) -> np.ndarray:
    jtj = jac.T @ jac
    n = jtj.shape[0]
    scale = np.sqrt(np.maximum(np.diag(jtj), 0.0))
    dead = scale <= 1e-14 * max(scale.max(initial=0.0), 1e-300)
    cov = np.full((n, n), 0.0)
    live = ~dead
    if live.any():
        sub = jtj[np.ix_(live, live)] / np.outer(scale[live], scale[live])
        inv = np.linalg.pinv(sub) / np.outer(scale[live], scale[live])
        cov[np.ix_(live, live)] = inv
    for i in np.flatnonzero(dead):
        cov[i, i] = np.inf
    return cov
