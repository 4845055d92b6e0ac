"""Classical shrinkage estimators used as comparison baselines.

All estimators act on per-coordinate means ``xbar`` and the variances of
those means ``v = sigma_j^2 / n``.  Where the source formulas for third-party
estimators are not reproduced in full anywhere we can cite, the versions here
are derived from the normal-normal posterior and the SURE objective

    SURE(b, m) = q^-1 sum_j [ b_j^2 (xbar_j - m)^2 + (1 - 2 b_j) v_j ],

with the parametric family b_j = v_j / (lambda + v_j) for the grand-mean
("SURE.M") variant and a per-coordinate monotone b for the semiparametric
("SURE.SM") variant.
"""

from __future__ import annotations

import warnings
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .isotonic import pav_quadratic

__all__ = [
    "estimate_naive",
    "estimate_grand_mean",
    "estimate_js",
    "estimate_hetero_js",
    "estimate_normal_normal_eb",
    "estimate_sure_m",
    "estimate_sure_sm",
    "estimate_group_linear",
    "estimate_oracle_sure",
    "sure_objective",
    "sure_sm_fit",
    "REGISTRY",
]


def _check(xbar, v=None):
    xbar = np.asarray(xbar, dtype=float)
    if v is None:
        return xbar
    v = np.asarray(v, dtype=float)
    if v.shape != xbar.shape:
        raise ValueError("means and variances must have the same length")
    if np.any(v <= 0):
        raise ValueError("variances must be positive")
    return xbar, v


def estimate_naive(xbar, v=None):
    return np.array(xbar, dtype=float, copy=True)


def estimate_grand_mean(xbar, v=None):
    xbar = _check(xbar)
    return np.full_like(xbar, xbar.mean())


def estimate_js(xbar, common_v: float, positive_part: bool = False):
    """James-Stein estimator for homoscedastic means with known variance."""
    xbar = _check(xbar)
    q = xbar.size
    if q < 3:
        raise ValueError("James-Stein needs q >= 3")
    norm2 = float(xbar @ xbar)
    if norm2 == 0.0:
        warnings.warn("zero mean vector; James-Stein multiplier clamped to 0")
        return np.zeros(q)
    mult = 1.0 - common_v * (q - 2) / norm2
    if positive_part:
        mult = max(0.0, mult)
    return mult * xbar


def estimate_hetero_js(xbar, v, positive_part: bool = False):
    """James-Stein via the precision transform; one common multiplier."""
    xbar, v = _check(xbar, v)
    q = xbar.size
    if q < 3:
        raise ValueError("James-Stein needs q >= 3")
    denom = float(np.sum(xbar ** 2 / v))
    if denom == 0.0:
        warnings.warn("zero mean vector; James-Stein multiplier clamped to 0")
        return np.zeros(q)
    mult = 1.0 - (q - 2) / denom
    if positive_part:
        mult = max(0.0, mult)
    return mult * xbar


def _nn_marginal_negloglik(lam: float, xbar, v):
    tot = lam + v
    m = float(np.sum(xbar / tot) / np.sum(1.0 / tot))
    return 0.5 * float(np.sum(np.log(tot) + (xbar - m) ** 2 / tot)), m


def estimate_normal_normal_eb(xbar, v, fit: str = "MLE"):
    """Normal-normal empirical Bayes shrinkage with (m, lambda) fitted.

    MLE maximizes the marginal likelihood xbar_j ~ N(m, lambda + v_j) over
    lambda >= 0 (profile over the closed-form m); MOM matches the first two
    marginal moments, clamping lambda at 0.
    """
    xbar, v = _check(xbar, v)
    if fit.upper() == "MOM":
        m = float(xbar.mean())
        lam = max(0.0, float(np.mean((xbar - m) ** 2) - v.mean()))
    elif fit.upper() == "MLE":
        scale = max(float(np.var(xbar)), float(v.mean()), 1e-12)
        res = optimize.minimize_scalar(
            lambda t: _nn_marginal_negloglik(np.exp(t), xbar, v)[0],
            bounds=(np.log(scale) - 30.0, np.log(scale) + 15.0),
            method="bounded",
            options={"xatol": 1e-10})
        lam = float(np.exp(res.x))
        # compare against the lambda -> 0 boundary
        nll0, m0 = _nn_marginal_negloglik(0.0, xbar, v)
        nll, _ = _nn_marginal_negloglik(lam, xbar, v)
        if nll0 <= nll:
            lam = 0.0
        _, m = _nn_marginal_negloglik(lam, xbar, v)
    else:
        raise ValueError("fit must be 'MLE' or 'MOM'")
    b = v / (lam + v) if lam > 0 else np.ones_like(v)
    _, m = _nn_marginal_negloglik(lam, xbar, v)
    return xbar - b * (xbar - m)


def sure_objective(b, m, xbar, v) -> float:
    """Unbiased risk estimate of the shrinkage rule (1-b) xbar + b m."""
    b = np.asarray(b, dtype=float)
    return float(np.mean(b ** 2 * (xbar - m) ** 2 + (1.0 - 2.0 * b) * v))


def _sure_m_profile(lam: float, xbar, v):
    b = v / (lam + v)
    b2 = b ** 2
    denom = float(b2.sum())
    m = float((b2 * xbar).sum() / denom) if denom > 0 else float(xbar.mean())
    return sure_objective(b, m, xbar, v), m


def estimate_sure_m(xbar, v, return_params: bool = False):
    """Grand-mean SURE shrinkage: minimize SURE over lambda >= 0 and m.

    m is closed-form given lambda; lambda is found by a deterministic grid
    bracketing plus golden-section refinement (including the lambda = 0 and
    lambda -> inf boundaries).
    """
    xbar, v = _check(xbar, v)
    vmax = float(v.max())
    grid = np.concatenate([[0.0], np.geomspace(vmax * 1e-6, vmax * 1e6, 121)])
    objs = np.array([_sure_m_profile(t, xbar, v)[0] for t in grid])
    # lambda -> inf means b -> 0, i.e. the naive estimator
    obj_inf = float(v.mean())
    i = int(objs.argmin())
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(
        lambda t: _sure_m_profile(t, xbar, v)[0],
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    lam = float(res.x)
    if objs[i] < res.fun:
        lam = float(grid[i])
    obj, m = _sure_m_profile(lam, xbar, v)
    if obj_inf < obj:
        est = xbar.copy()
        lam, m, obj = np.inf, float(xbar.mean()), obj_inf
    else:
        b = v / (lam + v)
        est = xbar - b * (xbar - m)
    if return_params:
        return est, lam, m, obj
    return est


def sure_sm_fit(xbar, v, m: float):
    """Optimal monotone b in [0, 1] for a fixed shrinkage target m.

    Dropping constants, SURE is separable in b with per-coordinate terms
    w_j b_j^2 - 2 v_j b_j, w_j = (xbar_j - m)^2, so the constrained optimum
    is the isotonic solution (coordinates sorted by v_j) clipped to [0, 1].
    """
    order = np.argsort(v, kind="stable")
    w = (xbar[order] - m) ** 2
    b_sorted = np.clip(pav_quadratic(v[order], w), 0.0, 1.0)
    b = np.empty_like(b_sorted)
    b[order] = b_sorted
    return b, sure_objective(b, m, xbar, v)


def estimate_sure_sm(xbar, v, n_grid: int = 201, return_params: bool = False):
    """Semiparametric SURE shrinkage with per-coordinate monotone weights.

    Scans candidate targets m on a grid over the data range, solving the
    isotonic subproblem at each, then refines by alternating the closed-form
    m update (weighted by b^2) with the isotonic b update.
    """
    xbar, v = _check(xbar, v)
    lo, hi = float(xbar.min()), float(xbar.max())
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    candidates = np.linspace(lo - pad, hi + pad, n_grid)
    best = (np.inf, None, None)
    for m in candidates:
        b, obj = sure_sm_fit(xbar, v, m)
        if obj < best[0]:
            best = (obj, b, m)
    obj, b, m = best
    for _ in range(50):
        denom = float(np.sum(b ** 2))
        if denom <= 0:
            break
        m_new = float(np.sum(b ** 2 * xbar) / denom)
        b_new, obj_new = sure_sm_fit(xbar, v, m_new)
        if obj_new >= obj - 1e-15:
            break
        obj, b, m = obj_new, b_new, m_new
    est = (1.0 - b) * xbar + b * m
    if return_params:
        return est, b, m, obj
    return est


def estimate_group_linear(xbar, v, bins: Optional[int] = None):
    """Bin coordinates by log variance; shrink toward each bin mean.

    Within a bin the positive-part factor 1 - sum(v) / sum((xbar - mean)^2)
    (clipped to [0, 1]) multiplies the deviations from the bin mean.
    Singleton bins fall back to the naive estimate.
    """
    xbar, v = _check(xbar, v)
    q = xbar.size
    if bins is None:
        bins = max(1, round(q ** (1.0 / 3.0)))
    if not 1 <= bins <= q:
        raise ValueError("need 1 <= bins <= q")
    order = np.argsort(np.log(v), kind="stable")
    edges = np.linspace(0, q, bins + 1).astype(int)
    est = xbar.copy()
    for b0 in range(bins):
        idx = order[edges[b0]:edges[b0 + 1]]
        if idx.size <= 1:
            continue
        center = float(xbar[idx].mean())
        ss = float(np.sum((xbar[idx] - center) ** 2))
        if ss <= 0:
            est[idx] = center
            continue
        factor = np.clip(1.0 - float(v[idx].sum()) / ss, 0.0, 1.0)
        est[idx] = center + factor * (xbar[idx] - center)
    return est


def estimate_oracle_sure(xbar, v, true_mu, return_params: bool = False):
    """Risk lower bound within the (lambda, m) parametric shrinkage class.

    Uses the true means to minimize the actual squared error; only
    meaningful in simulations.
    """
    xbar, v = _check(xbar, v)
    true_mu = np.asarray(true_mu, dtype=float)

    def profile(lam: float):
        b = v / (lam + v)
        denom = float(np.sum(b ** 2))
        resid = true_mu - (1.0 - b) * xbar
        m = float(np.sum(b * resid) / denom) if denom > 0 else 0.0
        err = float(np.mean(((1.0 - b) * xbar + b * m - true_mu) ** 2))
        return err, m

    vmax = float(v.max())
    grid = np.concatenate([[0.0], np.geomspace(vmax * 1e-6, vmax * 1e6, 121)])
    errs = np.array([profile(t)[0] for t in grid])
    err_inf = float(np.mean((xbar - true_mu) ** 2))
    i = int(errs.argmin())
    res = optimize.minimize_scalar(
        lambda t: profile(t)[0],
        bounds=(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]),
        method="bounded", options={"xatol": 1e-12})
    lam = float(res.x) if res.fun < errs[i] else float(grid[i])
    err, m = profile(lam)
    if err_inf < err:
        est, lam, m, err = xbar.copy(), np.inf, float(xbar.mean()), err_inf
    else:
        b = v / (lam + v)
        est = (1.0 - b) * xbar + b * m
    if return_params:
        return est, lam, m, err
    return est


# Registry keyed by the labels used in reports; each entry maps
# (xbar, v, true_mu) -> mu_hat.  true_mu is ignored except by the oracle.
REGISTRY: dict[str, Callable] = {
    "Naive": lambda xbar, v, true_mu=None: estimate_naive(xbar),
    "Grand.Mean": lambda xbar, v, true_mu=None: estimate_grand_mean(xbar),
    "JS.XKB": lambda xbar, v, true_mu=None: estimate_hetero_js(xbar, v),
    "JS+.XKB": lambda xbar, v, true_mu=None:
        estimate_hetero_js(xbar, v, positive_part=True),
    "EBMLE.XKB": lambda xbar, v, true_mu=None:
        estimate_normal_normal_eb(xbar, v, fit="MLE"),
    "EBMOM.XKB": lambda xbar, v, true_mu=None:
        estimate_normal_normal_eb(xbar, v, fit="MOM"),
    "SURE.M.XKB": lambda xbar, v, true_mu=None: estimate_sure_m(xbar, v),
    "SURE.SM.XKB": lambda xbar, v, true_mu=None: estimate_sure_sm(xbar, v),
    "GL.WMBZ": lambda xbar, v, true_mu=None: estimate_group_linear(xbar, v),
    "Oracle.XKB": lambda xbar, v, true_mu=None:
        estimate_oracle_sure(xbar, v, true_mu),
}
