"""Principal-branch Lambert W and the saturable Lambert-Beer transmission."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["lambert_w", "lambert_w_log", "lambert_beer_transmission"]

_INV_E = math.exp(-1.0)
_RTOL = 1e-12
_MAX_ITER = 100


def _seed(x: float) -> float:
    if x > 0:
        return math.log1p(x)
    if x > -0.25:
        return x
    # series about the branch point x = -1/e
    p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3


def _halley(x: float) -> float:
    if x == 0.0:
        return 0.0
    if x < -_INV_E:
        raise ValueError(f"lambert_w domain error: x = {x!r} < -1/e")
    if abs(x + _INV_E) < 1e-15:
        return -1.0
    if x > 1e300:
        return _newton_log(math.log(x))
    w = _seed(x)
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w -= step
        if abs(step) <= _RTOL * max(abs(w), 1e-300):
            break
    return w


def _newton_log(log_x: float) -> float:
    # w + ln w = log_x, valid for w > 0
    w = log_x - math.log(log_x) if log_x > 1.0 else 1.0
    for _ in range(_MAX_ITER):
        f = w + math.log(w) - log_x
        step = f / (1.0 + 1.0 / w)
        w_new = w - step
        if w_new <= 0:
            w_new = w / 2.0
        w = w_new
        if abs(step) <= _RTOL * w:
            break
    return w


def lambert_w(x):
    """Solve ``w exp(w) = x`` on the principal branch (``x >= -1/e``).

    Halley iteration seeded with ``log1p(x)`` for positive ``x``; relative
    tolerance 1e-12.  Accepts scalars or arrays.
    """
    if np.ndim(x) == 0:
        return _halley(float(x))
    arr = np.asarray(x, dtype=float)
    return np.vectorize(_halley, otypes=[float])(arr)


def lambert_w_log(log_x):
    """``W(exp(log_x))`` without forming ``exp(log_x)``; safe for huge arguments."""

    def one(lx: float) -> float:
        if lx > 2.0:
            return _newton_log(lx)
        return _halley(math.exp(lx))

    if np.ndim(log_x) == 0:
        return one(float(log_x))
    return np.vectorize(one, otypes=[float])(np.asarray(log_x, dtype=float))


def lambert_beer_transmission(s, beta: float, n_atoms: float):
    """Ensemble power transmission under saturation.

    ``T = W(s exp(s - 4 beta N)) / s``; the ``s -> 0`` limit is
    ``exp(-4 beta N)``.
    """
    od = 4.0 * beta * n_atoms

    def one(sv: float) -> float:
        if sv < 0:
            raise ValueError("saturation parameter must be >= 0")
        if sv == 0.0:
            return math.exp(-od)
        return lambert_w_log(math.log(sv) + sv - od) / sv

    if np.ndim(s) == 0:
        return one(float(s))
    return np.vectorize(one, otypes=[float])(np.asarray(s, dtype=float))
