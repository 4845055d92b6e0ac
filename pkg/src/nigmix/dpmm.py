"""Truncated-DP normal-inverse-gamma mixture sampler.

The model: each coordinate j has an unobserved pair (mu_j, sigma_j^2) drawn
from a k-component mixture of normal-inverse-gamma densities with
Dirichlet(gamma/k, ..., gamma/k) weights; the data are n normal replications
per coordinate.  A blocked Gibbs sweep updates, in order: mu, sigma^2 (skipped
when the variances are known), the component labels, the component means m_r,
shrinkage weights lambda_r, inverse-gamma parameters (alpha_r, beta_r) via
random-walk Metropolis-Hastings on the log scale, and the weights pi.

Point estimates are posterior means of the retained draws, back-transformed
to the original data scale.  Each conditional mean of mu_j has the shrinkage
form (1 - b_j) xbar_j + b_j m_{z_j} with b_j = lambda_{z_j} / (n + lambda_{z_j}),
so the output is a posterior average of local shrinkage estimates.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import special

from . import distributions as dist
from .cluster import lloyd, quantile_assignment
from .data import DataMatrix, StandardizeRecord, Summaries, back_transform, \
    standardize, summarize
from .rng import RngStream

__all__ = [
    "Hyperparams",
    "SamplerConfig",
    "DensityGridSpec",
    "MixtureState",
    "PosteriorSummary",
    "elicit_hyperparams",
    "init_state",
    "make_cache",
    "step_mu",
    "step_sigma2",
    "step_z",
    "step_m",
    "step_lambda",
    "step_alpha_beta",
    "step_pi",
    "gibbs_sweep",
    "fit",
]

_LOG_2PI = math.log(2.0 * math.pi)


class ElicitationError(ValueError):
    """Raised when hyperparameters cannot be derived from the data."""


class ChainHealthError(RuntimeError):
    """Raised when the chain reaches a non-finite log target."""


@dataclass(frozen=True)
class Hyperparams:
    """Base-measure and DP hyperparameters, on the standardized data scale."""

    m0: float = 0.0
    zeta2: float = 1.0
    a_lambda: float = 1.0
    b_lambda: float = 0.7
    a_alpha: float = 1.0
    b_alpha: float = 1.0
    a_beta: float = 1.0
    b_beta_prime: float = 1.0
    gamma: float = 0.1
    k: int = 10

    def __post_init__(self) -> None:
        for name in ("zeta2", "a_lambda", "b_lambda", "a_alpha", "b_alpha",
                     "a_beta", "b_beta_prime", "gamma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if not np.isfinite(self.m0):
            raise ValueError("m0 must be finite")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class DensityGridSpec:
    mu_range: Optional[tuple[float, float]] = None
    sigma2_range: Optional[tuple[float, float]] = None
    resolution: int = 100


@dataclass(frozen=True)
class SamplerConfig:
    n_iter: int = 5000
    n_burnin: int = 2000
    mh_step_alpha: float = 0.5
    mh_step_beta: float = 0.5
    adapt_mh: bool = True
    density_grid: Optional[DensityGridSpec] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_iter < 1 or self.n_burnin < 0:
            raise ValueError("need n_iter >= 1 and n_burnin >= 0")
        if self.n_burnin >= self.n_iter:
            raise ValueError("n_burnin must be smaller than n_iter")
        if self.mh_step_alpha <= 0 or self.mh_step_beta <= 0:
            raise ValueError("MH proposal scales must be positive")


@dataclass
class MixtureState:
    """One MCMC state: coordinate parameters, labels, components, weights."""

    mu: np.ndarray       # (q,)
    sigma2: np.ndarray   # (q,) positive
    z: np.ndarray        # (q,) int labels in 0..k-1
    m: np.ndarray        # (k,)
    lam: np.ndarray      # (k,) positive
    alpha: np.ndarray    # (k,) positive
    beta: np.ndarray     # (k,) positive
    pi: np.ndarray       # (k,) simplex

    @property
    def k(self) -> int:
        return self.m.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.k)


@dataclass(frozen=True)
class SamplerCache:
    """Precomputed data statistics reused by every sweep."""

    n: int
    q: int
    xbar: np.ndarray
    ssx: np.ndarray          # per-column sum of squares sum_i X_ij^2
    col_vars: Optional[np.ndarray]
    fixed_sigma2: Optional[np.ndarray]

    @property
    def known_variance_mode(self) -> bool:
        return self.fixed_sigma2 is not None


@dataclass
class DensityGrid:
    mu: np.ndarray       # (resolution,)
    sigma2: np.ndarray   # (resolution,)
    values: np.ndarray   # (resolution, resolution), density at (mu, sigma2)


@dataclass
class PosteriorSummary:
    mu_hat: np.ndarray
    sigma2_hat: np.ndarray
    pi_sorted_mean: np.ndarray
    acceptance_alpha: np.ndarray
    acceptance_beta: np.ndarray
    n_kept: int
    density_grid: Optional[DensityGrid] = None
    underflow_fallbacks: int = 0
    config: Optional[SamplerConfig] = None
    seed: Optional[int] = None

    def to_json_dict(self) -> dict:
        out = {
            "mu_hat": self.mu_hat.tolist(),
            "sigma2_hat": self.sigma2_hat.tolist(),
            "pi_sorted": self.pi_sorted_mean.tolist(),
            "acceptance": {
                "alpha": self.acceptance_alpha.tolist(),
                "beta": self.acceptance_beta.tolist(),
            },
            "n_kept": self.n_kept,
            "seed": self.seed,
        }
        if self.config is not None:
            out["config"] = {
                "n_iter": self.config.n_iter,
                "n_burnin": self.config.n_burnin,
                "mh_step_alpha": self.config.mh_step_alpha,
                "mh_step_beta": self.config.mh_step_beta,
                "adapt_mh": self.config.adapt_mh,
                "seed": self.config.seed,
            }
        return out

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    def save_density_csv(self, path) -> None:
        if self.density_grid is None:
            raise ValueError("no density grid was computed")
        g = self.density_grid
        with open(path, "w") as fh:
            fh.write("mu,sigma2,density\n")
            for i, mu in enumerate(g.mu):
                for j, s2 in enumerate(g.sigma2):
                    fh.write(f"{mu},{s2},{g.values[i, j]}\n")


def elicit_hyperparams(summaries: Summaries,
                       known_variances: Optional[np.ndarray] = None,
                       **overrides) -> Hyperparams:
    """Derive hyperparameters from summaries of the *standardized* data.

    The component-mean prior is centered at the grand mean with variance the
    between-column variance (an upper bound on the true between-component
    variance).  With known variances, the inverse-gamma hyperparameters match
    the empirical moments of the standardized precisions; otherwise all four
    are 1.  The lambda prior defaults to Gamma(1, 0.7): half its mass sits
    below 1 (lambda is a noise-to-signal ratio, usually small) while the
    exponential tail stays heavy enough that well-populated clusters can
    reach the larger values multimodal mean structures need.
    """
    if not np.isfinite(summaries.grand_var) or summaries.grand_var <= 0:
        raise ElicitationError("degenerate data: zero grand variance")
    if summaries.between_var <= 0:
        raise ElicitationError("degenerate data: zero between-column variance")
    values = {
        "m0": summaries.grand_mean,
        "zeta2": summaries.between_var / summaries.grand_var,
    }
    if known_variances is not None:
        w = 1.0 / np.asarray(known_variances, dtype=float)
        mean_w = float(w.mean())
        var_w = float(w.var())
        if var_w <= 0 or mean_w <= 0:
            raise ElicitationError("precision moments are degenerate")
        values["b_alpha"] = var_w / mean_w ** 2
        values["b_beta_prime"] = var_w / mean_w
    values.update(overrides)
    return Hyperparams(**values)


def make_cache(data: DataMatrix) -> SamplerCache:
    v = data.values
    n, q = v.shape
    col_vars = v.var(axis=0, ddof=1) if n >= 2 else None
    return SamplerCache(
        n=n, q=q,
        xbar=v.mean(axis=0),
        ssx=(v * v).sum(axis=0),
        col_vars=col_vars,
        fixed_sigma2=data.known_variances,
    )


def init_state(data: DataMatrix, hyper: Hyperparams, rng: RngStream) -> MixtureState:
    """Initialize from k-means on (mean, variance) pairs per coordinate.

    Labels come from the clustering, component means from the cluster centers
    of the mean feature; lambda, alpha, beta start at 1 and pi uniform.
    Degenerate clustering falls back to quantile-based assignment.
    """
    cache = make_cache(data)
    k = hyper.k
    if k > cache.q:
        warnings.warn(f"truncation level k={k} exceeds q={cache.q}")
        k = cache.q
    if cache.known_variance_mode:
        feats = np.column_stack([cache.xbar, cache.fixed_sigma2])
        sigma2 = cache.fixed_sigma2.copy()
    else:
        feats = np.column_stack([cache.xbar, cache.col_vars])
        sigma2 = cache.col_vars.copy()
    try:
        labels, centers, _ = lloyd(feats, k, rng)
        m = centers[:, 0].copy()
    except Exception:
        labels = quantile_assignment(feats, k)
        m = np.array([cache.xbar[labels == r].mean() if np.any(labels == r)
                      else cache.xbar.mean() for r in range(k)])
    sigma2 = np.maximum(sigma2, 1e-12)
    return MixtureState(
        mu=cache.xbar.copy(),
        sigma2=sigma2,
        z=labels.astype(int),
        m=m,
        lam=np.ones(k),
        alpha=np.ones(k),
        beta=np.ones(k),
        pi=np.full(k, 1.0 / k),
    )


def step_mu(state: MixtureState, cache: SamplerCache, rng: RngStream) -> np.ndarray:
    """Draw mu_j from N((n xbar_j + m_z lam_z)/(n + lam_z), sigma_j^2/(n + lam_z))."""
    lam_z = state.lam[state.z]
    m_z = state.m[state.z]
    mean = (cache.n * cache.xbar + m_z * lam_z) / (cache.n + lam_z)
    sd = np.sqrt(state.sigma2 / (cache.n + lam_z))
    return mean + sd * rng.generator.standard_normal(cache.q)


def step_sigma2(state: MixtureState, cache: SamplerCache, rng: RngStream) -> np.ndarray:
    """Draw sigma_j^2 from its inverse-gamma full conditional."""
    lam_z = state.lam[state.z]
    m_z = state.m[state.z]
    shape = 0.5 * (cache.n + 1) + state.alpha[state.z]
    ss = cache.ssx - 2.0 * state.mu * cache.n * cache.xbar \
        + cache.n * state.mu ** 2
    rate = 0.5 * np.maximum(ss, 0.0) + 0.5 * lam_z * (state.mu - m_z) ** 2 \
        + state.beta[state.z]
    return rate / rng.generator.gamma(shape)


def label_log_weights(state: MixtureState) -> np.ndarray:
    """(k, q) matrix of log(pi_r) + log NIG(mu_j, sigma_j^2 | Theta_r)."""
    with np.errstate(divide="ignore"):
        log_pi = np.log(state.pi)
    return log_pi[:, None] + dist.nig_log_density_grid(
        state.m[:, None], state.lam[:, None], state.alpha[:, None],
        state.beta[:, None], state.mu[None, :], state.sigma2[None, :])


def step_z(state: MixtureState, cache: SamplerCache,
           rng: RngStream) -> tuple[np.ndarray, int]:
    """Resample labels from the categorical full conditional (log space).

    Uses the Gumbel-max trick, which is exact and immune to underflow.
    Returns (labels, number of all-minus-inf columns resolved uniformly).
    """
    logw = label_log_weights(state)
    dead = ~np.isfinite(logw.max(axis=0))
    fallbacks = int(dead.sum())
    if fallbacks:
        logw[:, dead] = 0.0
    gumbel = -np.log(-np.log(rng.generator.random(logw.shape)))
    return (logw + gumbel).argmax(axis=0), fallbacks


def step_m(state: MixtureState, cache: SamplerCache, hyper: Hyperparams,
           rng: RngStream) -> np.ndarray:
    """Draw component means from their normal full conditionals.

    An empty component reduces to a draw from the N(m0, zeta2) prior.
    """
    k = state.k
    s1 = np.bincount(state.z, weights=state.mu / state.sigma2, minlength=k)
    s2 = np.bincount(state.z, weights=1.0 / state.sigma2, minlength=k)
    prec = 1.0 / hyper.zeta2 + state.lam * s2
    mean = (hyper.m0 / hyper.zeta2 + state.lam * s1) / prec
    return mean + rng.generator.standard_normal(k) / np.sqrt(prec)


def step_lambda(state: MixtureState, cache: SamplerCache, hyper: Hyperparams,
                rng: RngStream) -> np.ndarray:
    """Draw lambda_r ~ Gamma(c_r/2 + a_lambda, sum (mu-m)^2/(2 sigma^2) + b_lambda)."""
    k = state.k
    c = state.counts()
    dev = (state.mu - state.m[state.z]) ** 2 / (2.0 * state.sigma2)
    rate = np.bincount(state.z, weights=dev, minlength=k) + hyper.b_lambda
    shape = 0.5 * c + hyper.a_lambda
    return rng.generator.gamma(shape) / rate


def _alpha_log_target(alpha, c, t1, beta, hyper: Hyperparams):
    return ((hyper.a_alpha - 1.0) * np.log(alpha) - hyper.b_alpha * alpha
            + c * (alpha * np.log(beta) - special.gammaln(alpha))
            - (alpha + 1.0) * t1)


def _beta_log_target(beta, c, t2, alpha, hyper: Hyperparams):
    return ((hyper.a_beta - 1.0) * np.log(beta) - hyper.b_beta_prime * beta
            + c * alpha * np.log(beta) - beta * t2)


def step_alpha_beta(state: MixtureState, cache: SamplerCache,
                    hyper: Hyperparams, rng: RngStream,
                    step_alpha, step_beta
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One MH update of each alpha_r then beta_r.

    Proposals are Gaussian random walks on the log scale; the acceptance
    ratio carries the log-scale Jacobian.  For an empty component the target
    is the gamma prior.  Returns (alpha, beta, accepted_alpha, accepted_beta).
    """
    gen = rng.generator
    k = state.k
    c = state.counts().astype(float)
    log_s2 = np.log(state.sigma2)
    t1 = np.bincount(state.z, weights=log_s2, minlength=k)
    t2 = np.bincount(state.z, weights=1.0 / state.sigma2, minlength=k)

    alpha = state.alpha
    cur = _alpha_log_target(alpha, c, t1, state.beta, hyper)
    if not np.all(np.isfinite(cur)):
        raise ChainHealthError("non-finite log target for alpha")
    prop = alpha * np.exp(np.asarray(step_alpha) * gen.standard_normal(k))
    log_ratio = (_alpha_log_target(prop, c, t1, state.beta, hyper) - cur
                 + np.log(prop) - np.log(alpha))
    acc_a = np.log(gen.random(k)) < log_ratio
    alpha = np.where(acc_a, prop, alpha)

    beta = state.beta
    cur = _beta_log_target(beta, c, t2, alpha, hyper)
    if not np.all(np.isfinite(cur)):
        raise ChainHealthError("non-finite log target for beta")
    prop = beta * np.exp(np.asarray(step_beta) * gen.standard_normal(k))
    log_ratio = (_beta_log_target(prop, c, t2, alpha, hyper) - cur
                 + np.log(prop) - np.log(beta))
    acc_b = np.log(gen.random(k)) < log_ratio
    beta = np.where(acc_b, prop, beta)
    return alpha, beta, acc_a, acc_b


def step_pi(state: MixtureState, hyper: Hyperparams, rng: RngStream) -> np.ndarray:
    """Draw pi ~ Dirichlet(c_1 + gamma/k, ..., c_k + gamma/k)."""
    conc = state.counts() + hyper.gamma / state.k
    return rng.generator.dirichlet(conc)


def gibbs_sweep(state: MixtureState, cache: SamplerCache, hyper: Hyperparams,
                rng: RngStream, step_alpha, step_beta
                ) -> tuple[MixtureState, np.ndarray, np.ndarray, int]:
    """One full blocked-Gibbs sweep; sigma^2 is fixed in known-variance mode."""
    mu = step_mu(state, cache, rng)
    state = replace(state, mu=mu)
    if not cache.known_variance_mode:
        state = replace(state, sigma2=step_sigma2(state, cache, rng))
    z, fallbacks = step_z(state, cache, rng)
    state = replace(state, z=z)
    state = replace(state, m=step_m(state, cache, hyper, rng))
    state = replace(state, lam=step_lambda(state, cache, hyper, rng))
    alpha, beta, acc_a, acc_b = step_alpha_beta(
        state, cache, hyper, rng, step_alpha, step_beta)
    state = replace(state, alpha=alpha, beta=beta)
    state = replace(state, pi=step_pi(state, hyper, rng))
    return state, acc_a, acc_b, fallbacks


def _density_over_grid(m_draws, lam_draws, alpha_draws, beta_draws, pi_draws,
                       mu_grid, s2_grid):
    """Average mixture density over kept draws, on a (mu, sigma2) mesh."""
    total = np.zeros((mu_grid.size, s2_grid.size))
    mu = mu_grid[:, None]
    s2 = s2_grid[None, :]
    for m, lam, alpha, beta, pi in zip(m_draws, lam_draws, alpha_draws,
                                       beta_draws, pi_draws):
        mix = np.zeros_like(total)
        for r in range(len(pi)):
            if pi[r] <= 0:
                continue
            mix += pi[r] * np.exp(dist.nig_log_density_grid(
                m[r], lam[r], alpha[r], beta[r], mu, s2))
        total += mix
    return total / len(pi_draws)


def fit(data: DataMatrix, hyper: Optional[Hyperparams] = None,
        config: Optional[SamplerConfig] = None) -> PosteriorSummary:
    """Run the full sampler and return posterior-mean estimates.

    The data are standardized internally; ``hyper``, when given, is
    interpreted on the standardized scale (elicited from the data when
    omitted).  Estimates are back-transformed to the original scale.  In
    known-variance mode the sigma^2 update is skipped and the reported
    variances are exactly the inputs.
    """
    config = config or SamplerConfig()
    std_data, record = standardize(data)
    cache = make_cache(std_data)
    if hyper is None:
        hyper = elicit_hyperparams(summarize(std_data),
                                   std_data.known_variances)
    if hyper.k > cache.q:
        warnings.warn(f"truncation level k={hyper.k} exceeds q={cache.q}; "
                      f"using k={cache.q}")
        hyper = replace(hyper, k=cache.q)

    rng = RngStream(config.seed)
    state = init_state(std_data, hyper, rng.spawn(0))
    chain_rng = rng.spawn(1)
    k = state.k

    log_step_a = np.full(k, math.log(config.mh_step_alpha))
    log_step_b = np.full(k, math.log(config.mh_step_beta))
    target_rate = 0.35

    n_kept = config.n_iter - config.n_burnin
    mu_sum = np.zeros(cache.q)
    sigma2_sum = np.zeros(cache.q)
    pi_sorted_sum = np.zeros(k)
    acc_a_count = np.zeros(k)
    acc_b_count = np.zeros(k)
    fallback_total = 0
    keep_draws = config.density_grid is not None
    kept_m, kept_lam, kept_alpha, kept_beta, kept_pi = [], [], [], [], []

    for it in range(config.n_iter):
        state, acc_a, acc_b, fallbacks = gibbs_sweep(
            state, cache, hyper, chain_rng,
            np.exp(log_step_a), np.exp(log_step_b))
        fallback_total += fallbacks
        if config.adapt_mh and it < config.n_burnin:
            # Robbins-Monro toward the target acceptance; frozen after burn-in
            gain = 1.0 / (it + 1) ** 0.6
            log_step_a += gain * (acc_a.astype(float) - target_rate)
            log_step_b += gain * (acc_b.astype(float) - target_rate)
        if it >= config.n_burnin:
            mu_sum += state.mu
            sigma2_sum += state.sigma2
            pi_sorted_sum += np.sort(state.pi)[::-1]
            acc_a_count += acc_a
            acc_b_count += acc_b
            if keep_draws:
                kept_m.append(state.m.copy())
                kept_lam.append(state.lam.copy())
                kept_alpha.append(state.alpha.copy())
                kept_beta.append(state.beta.copy())
                kept_pi.append(state.pi.copy())

    mu_hat, sigma2_hat = back_transform(mu_sum / n_kept, sigma2_sum / n_kept,
                                        record)
    if cache.known_variance_mode:
        sigma2_hat = data.known_variances.copy()

    acc_rate_a = acc_a_count / n_kept
    acc_rate_b = acc_b_count / n_kept
    if config.adapt_mh:
        rates = np.concatenate([acc_rate_a, acc_rate_b])
        if np.any(rates < 0.1) or np.any(rates > 0.6):
            warnings.warn("MH acceptance rate outside [0.1, 0.6] after "
                          "adaptation; inspect chain health")

    grid = None
    if keep_draws:
        grid = _build_density_grid(config.density_grid, mu_hat, sigma2_hat,
                                   record, kept_m, kept_lam, kept_alpha,
                                   kept_beta, kept_pi)

    return PosteriorSummary(
        mu_hat=mu_hat,
        sigma2_hat=sigma2_hat,
        pi_sorted_mean=pi_sorted_sum / n_kept,
        acceptance_alpha=acc_rate_a,
        acceptance_beta=acc_rate_b,
        n_kept=n_kept,
        density_grid=grid,
        underflow_fallbacks=fallback_total,
        config=config,
        seed=config.seed,
    )


def _build_density_grid(spec: DensityGridSpec, mu_hat, sigma2_hat,
                        record: StandardizeRecord,
                        kept_m, kept_lam, kept_alpha, kept_beta, kept_pi
                        ) -> DensityGrid:
    res = spec.resolution
    if spec.mu_range is not None:
        mu_lo, mu_hi = spec.mu_range
    else:
        sd = float(np.std(mu_hat)) or 1.0
        mu_lo, mu_hi = float(mu_hat.min() - sd), float(mu_hat.max() + sd)
    if spec.sigma2_range is not None:
        s2_lo, s2_hi = spec.sigma2_range
    else:
        sd = float(np.std(sigma2_hat)) or 1.0
        s2_lo = max(float(sigma2_hat.min() - sd), 1e-8)
        s2_hi = float(sigma2_hat.max() + sd)
    mu_grid = np.linspace(mu_lo, mu_hi, res)
    s2_grid = np.linspace(s2_lo, s2_hi, res)
    # evaluate on the standardized scale, then apply the Jacobian 1/S^3
    mu_std = (mu_grid - record.grand_mean) / record.scale
    s2_std = s2_grid / record.scale ** 2
    values = _density_over_grid(kept_m, kept_lam, kept_alpha, kept_beta,
                                kept_pi, mu_std, s2_std)
    values /= record.scale ** 3
    return DensityGrid(mu=mu_grid, sigma2=s2_grid, values=values)
