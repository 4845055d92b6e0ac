"""Sampling and exact log-densities for the distributions the sampler uses.

Conventions: Gamma(a, b) and InverseGamma(a, b) are shape/rate
parameterized, i.e.

    G(x|a,b)  = b^a / Gamma(a) x^(a-1) e^(-b x),
    IG(x|a,b) = b^a / Gamma(a) x^(-a-1) e^(-b/x),

and NormalInverseGamma(m, lam, a, b) factors as
N(mu | m, sigma^2/lam) * IG(sigma^2 | a, b).

All densities are evaluated in log space; points outside the support get
``-inf`` rather than an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .rng import RngStream

__all__ = [
    "ParameterError",
    "Normal",
    "Gamma",
    "InverseGamma",
    "Beta",
    "Dirichlet",
    "Categorical",
    "Hypergeometric",
    "NormalInverseGamma",
    "sample",
    "log_density",
    "stick_breaking_weights",
]

_LOG_2PI = math.log(2.0 * math.pi)


class ParameterError(ValueError):
    """Raised when distribution parameters violate their domain."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParameterError(msg)


@dataclass(frozen=True)
class Normal:
    mean: float
    variance: float

    def __post_init__(self) -> None:
        _require(np.isfinite(self.mean), "mean must be finite")
        _require(self.variance > 0 and np.isfinite(self.variance),
                 "variance must be positive and finite")

    def sample(self, rng: RngStream, size=None):
        return rng.generator.normal(self.mean, math.sqrt(self.variance), size)

    def log_density(self, x) -> float:
        return float(-0.5 * (_LOG_2PI + math.log(self.variance))
                     - 0.5 * (x - self.mean) ** 2 / self.variance)


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float

    def __post_init__(self) -> None:
        _require(self.shape > 0 and np.isfinite(self.shape),
                 "shape must be positive")
        _require(self.rate > 0 and np.isfinite(self.rate),
                 "rate must be positive")

    def sample(self, rng: RngStream, size=None):
        # numpy's gamma uses a rejection scheme valid for all shape > 0
        return rng.generator.gamma(self.shape, 1.0 / self.rate, size)

    def log_density(self, x) -> float:
        if x <= 0:
            return -math.inf
        return float(self.shape * math.log(self.rate)
                     - special.gammaln(self.shape)
                     + (self.shape - 1.0) * math.log(x) - self.rate * x)


@dataclass(frozen=True)
class InverseGamma:
    shape: float
    rate: float

    def __post_init__(self) -> None:
        _require(self.shape > 0 and np.isfinite(self.shape),
                 "shape must be positive")
        _require(self.rate > 0 and np.isfinite(self.rate),
                 "rate must be positive")

    def sample(self, rng: RngStream, size=None):
        # exact transformation: X ~ G(a, b)  =>  1/X ~ IG(a, b)
        return 1.0 / rng.generator.gamma(self.shape, 1.0 / self.rate, size)

    def log_density(self, x) -> float:
        if x <= 0:
            return -math.inf
        return float(self.shape * math.log(self.rate)
                     - special.gammaln(self.shape)
                     - (self.shape + 1.0) * math.log(x) - self.rate / x)


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self) -> None:
        _require(self.a > 0 and np.isfinite(self.a), "a must be positive")
        _require(self.b > 0 and np.isfinite(self.b), "b must be positive")

    def sample(self, rng: RngStream, size=None):
        return rng.generator.beta(self.a, self.b, size)

    def log_density(self, x) -> float:
        if x <= 0 or x >= 1:
            return -math.inf
        return float((self.a - 1.0) * math.log(x)
                     + (self.b - 1.0) * math.log1p(-x)
                     - special.betaln(self.a, self.b))


@dataclass(frozen=True)
class Dirichlet:
    weights: tuple

    def __init__(self, weights) -> None:
        w = np.asarray(weights, dtype=float)
        _require(w.ndim == 1 and w.size >= 1, "weights must be a vector")
        _require(np.all(np.isfinite(w)) and np.all(w > 0),
                 "weights must be positive and finite")
        object.__setattr__(self, "weights", tuple(w.tolist()))

    def sample(self, rng: RngStream, size=None):
        return rng.generator.dirichlet(np.asarray(self.weights), size)

    def log_density(self, x) -> float:
        w = np.asarray(self.weights)
        x = np.asarray(x, dtype=float)
        if x.shape != w.shape or np.any(x <= 0) or abs(x.sum() - 1.0) > 1e-9:
            return -math.inf
        norm = special.gammaln(w.sum()) - special.gammaln(w).sum()
        return float(norm + np.sum((w - 1.0) * np.log(x)))


@dataclass(frozen=True)
class Categorical:
    probs: tuple

    def __init__(self, probs) -> None:
        p = np.asarray(probs, dtype=float)
        _require(p.ndim == 1 and p.size >= 1, "probs must be a vector")
        _require(np.all(np.isfinite(p)) and np.all(p >= 0),
                 "probs must be nonnegative and finite")
        _require(abs(p.sum() - 1.0) < 1e-9, "probs must sum to 1")
        object.__setattr__(self, "probs", tuple(p.tolist()))

    def sample(self, rng: RngStream, size=None):
        p = np.asarray(self.probs)
        return rng.generator.choice(p.size, size=size, p=p)

    def log_density(self, x) -> float:
        p = np.asarray(self.probs)
        i = int(x)
        if i != x or i < 0 or i >= p.size or p[i] == 0.0:
            return -math.inf
        return float(math.log(p[i]))


@dataclass(frozen=True)
class Hypergeometric:
    population: int
    successes: int
    draws: int

    def __post_init__(self) -> None:
        _require(self.population >= 0, "population must be nonnegative")
        _require(0 <= self.successes <= self.population,
                 "need 0 <= successes <= population")
        _require(0 <= self.draws <= self.population,
                 "need 0 <= draws <= population")

    def sample(self, rng: RngStream, size=None):
        return rng.generator.hypergeometric(
            self.successes, self.population - self.successes, self.draws, size)

    def log_density(self, x) -> float:
        k = int(x)
        lo = max(0, self.draws + self.successes - self.population)
        hi = min(self.draws, self.successes)
        if k != x or k < lo or k > hi:
            return -math.inf
        return float(
            _log_comb(self.successes, k)
            + _log_comb(self.population - self.successes, self.draws - k)
            - _log_comb(self.population, self.draws))


def _log_comb(n: int, k: int) -> float:
    return float(special.gammaln(n + 1) - special.gammaln(k + 1)
                 - special.gammaln(n - k + 1))


@dataclass(frozen=True)
class NormalInverseGamma:
    m: float
    lam: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        _require(np.isfinite(self.m), "m must be finite")
        _require(self.lam > 0 and np.isfinite(self.lam), "lam must be positive")
        _require(self.alpha > 0 and np.isfinite(self.alpha),
                 "alpha must be positive")
        _require(self.beta > 0 and np.isfinite(self.beta),
                 "beta must be positive")

    def sample(self, rng: RngStream, size=None):
        """Draw (mu, sigma2) pairs; returns an array of shape (..., 2)."""
        sigma2 = InverseGamma(self.alpha, self.beta).sample(rng, size)
        mu = rng.generator.normal(self.m, np.sqrt(sigma2 / self.lam))
        return np.stack([np.asarray(mu), np.asarray(sigma2)], axis=-1)

    def log_density(self, x) -> float:
        mu, sigma2 = float(x[0]), float(x[1])
        if sigma2 <= 0:
            return -math.inf
        return (Normal(self.m, sigma2 / self.lam).log_density(mu)
                + InverseGamma(self.alpha, self.beta).log_density(sigma2))


def sample(params, rng: RngStream, size=None):
    """Draw from ``params`` using ``rng``; dispatches on the parameter type."""
    return params.sample(rng, size)


def log_density(params, x) -> float:
    """Exact log-density of ``params`` at ``x`` (-inf outside the support)."""
    return params.log_density(x)


def nig_log_density_grid(m, lam, alpha, beta, mu, sigma2):
    """Vectorized NIG log-density over broadcastable arrays.

    Used by the label step and the posterior density grid, where a scalar
    dispatch per point would be far too slow.
    """
    m = np.asarray(m, dtype=float)
    lam = np.asarray(lam, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    log_s2 = np.log(sigma2)
    out = (0.5 * np.log(lam) - 0.5 * (_LOG_2PI + log_s2)
           - 0.5 * lam * (mu - m) ** 2 / sigma2
           + alpha * np.log(beta) - special.gammaln(alpha)
           - (alpha + 1.0) * log_s2 - beta / sigma2)
    return out


def stick_breaking_weights(gamma: float, k: int, rng: RngStream) -> np.ndarray:
    """Truncated stick-breaking weights pi_r = s_r prod_{j<r}(1 - s_j).

    The sticks are iid Beta(1, gamma); the last weight absorbs the remainder
    so the vector sums to exactly one.
    """
    _require(gamma > 0 and np.isfinite(gamma), "gamma must be positive")
    _require(k >= 1, "k must be >= 1")
    if k == 1:
        return np.array([1.0])
    s = rng.generator.beta(1.0, gamma, size=k - 1)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - s)])
    pi = np.empty(k)
    pi[:-1] = s * remaining[:-1]
    pi[-1] = remaining[-1]
    return pi
