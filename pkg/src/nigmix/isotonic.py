"""Weighted isotonic regression by pool-adjacent-violators."""

from __future__ import annotations

import numpy as np

__all__ = ["pav", "pav_quadratic"]


def pav(y: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Nondecreasing weighted least-squares fit to ``y``.

    Minimizes sum w_i (f_i - y_i)^2 subject to f_1 <= ... <= f_n.
    """
    y = np.asarray(y, dtype=float)
    if weights is None:
        weights = np.ones(y.size)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    return pav_quadratic(weights * y, weights)


def pav_quadratic(c: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Nondecreasing minimizer of sum_i (w_i f_i^2 - 2 c_i f_i).

    The per-block minimizer is sum(c)/sum(w); a block with zero total weight
    has a linear, decreasing objective and its minimizer is +inf, which a
    caller clips to its box constraint.  Pooling blocks whose minimizers
    violate monotonicity yields the exact solution of this separable convex
    program (for w_i > 0 it reduces to classic weighted isotonic regression).
    """
    c = np.asarray(c, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    n = c.size
    sums: list[float] = []
    wts: list[float] = []
    counts: list[int] = []
    for i in range(n):
        s, wt, cnt = c[i], w[i], 1
        while sums and _minimizer(sums[-1], wts[-1]) >= _minimizer(s, wt):
            s += sums.pop()
            wt += wts.pop()
            cnt += counts.pop()
        sums.append(s)
        wts.append(wt)
        counts.append(cnt)
    out = np.empty(n)
    pos = 0
    for s, wt, cnt in zip(sums, wts, counts):
        out[pos:pos + cnt] = _minimizer(s, wt)
        pos += cnt
    return out


def _minimizer(s: float, w: float) -> float:
    if w > 0:
        return s / w
    return np.inf if s >= 0 else -np.inf
