"""Simulation studies: data generators, replication engine, risk reports.

Fourteen benchmark laws for (mu_j, sigma_j^2) are provided; the first eight
are known-variance settings observed with a single replication, the last six
are unknown-variance settings with n=4 replications per coordinate.  The
study engine draws fresh (mu, sigma^2, noise) per replication from a
dedicated random stream keyed by (example, q, replication), so results are
bit-identical for a fixed seed no matter how many workers run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import baselines
from .data import DataMatrix, standardize, summarize
from .dpmm import SamplerConfig, elicit_hyperparams, fit
from .rng import RngStream, substream_id

__all__ = [
    "ExampleSpec",
    "EXAMPLES",
    "generate",
    "RiskReport",
    "run_study",
    "gamma_sensitivity",
    "make_estimators",
    "dpmm_estimator",
]

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class ExampleSpec:
    id: int
    known_variance: bool
    n: int
    draw_pairs: Callable  # (q, generator) -> (mu, sigma2)
    uniform_noise: bool = False


def _nig_mixture(weights, comps):
    weights = np.asarray(weights)

    def draw(q, gen):
        comp = gen.choice(len(weights), size=q, p=weights)
        sigma2 = np.empty(q)
        mu = np.empty(q)
        for i, (m, lam, a, b) in enumerate(comps):
            sel = comp == i
            cnt = int(sel.sum())
            s2 = b / gen.gamma(a, size=cnt)
            sigma2[sel] = s2
            mu[sel] = gen.normal(m, np.sqrt(s2 / lam))
        return mu, sigma2

    return draw


def _ex1(q, gen):
    return gen.normal(0.0, 1.0, q), gen.uniform(0.1, 1.0, q)


def _ex2(q, gen):
    return gen.uniform(0.0, 1.0, q), gen.uniform(0.1, 1.0, q)


def _ex3(q, gen):
    s2 = gen.uniform(0.1, 1.0, q)
    return s2.copy(), s2


def _ex4(q, gen):
    s2 = 1.0 / gen.chisquare(10, q)
    return s2.copy(), s2


def _ex5(q, gen):
    s2 = np.where(gen.random(q) < 0.5, 0.1, 0.5)
    mu = np.where(s2 == 0.1,
                  gen.normal(2.0, np.sqrt(0.1), q),
                  gen.normal(0.0, np.sqrt(0.5), q))
    return mu, s2


def _ex7(q, gen):
    centers = np.where(gen.random(q) < 0.5, 0.0, 3.0)
    return gen.normal(centers, np.sqrt(0.1)), gen.uniform(0.1, 1.0, q)


_ex8 = _nig_mixture([0.6, 0.4], [(2.0, 2.0, 5.0, 2.0), (10.0, 4.0, 3.0, 3.0)])


def _ex9(q, gen):
    return gen.normal(0.0, np.sqrt(3.0), q), 2.0 / gen.gamma(5.0, size=q)


def _ex10(q, gen):
    return gen.normal(0.0, np.sqrt(3.0), q), gen.gamma(9.0, 1.0 / 3.0, q)


_ex11 = _nig_mixture([0.95, 0.05], [(2.0, 2.0, 5.0, 2.0), (10.0, 4.0, 3.0, 3.0)])


def _ex12(q, gen):
    lo = np.where(gen.random(q) < 0.5, 1.0, 4.0)
    return gen.uniform(lo, lo + 1.0), 4.0 * gen.uniform(0.1, 1.0, q)


def _ex13(q, gen):
    mu = gen.normal(3.0, 1.0, q)
    return mu, gen.uniform(np.maximum(mu - 1.0, 0.1), np.maximum(mu + 1.0, 1.0))


def _ex14(q, gen):
    mu = gen.normal(3.0, 1.0, q)
    loc = np.abs(mu) / 3.0
    return mu, np.maximum(gen.normal(loc, loc + 1.0), 0.1)


EXAMPLES: dict[int, ExampleSpec] = {
    1: ExampleSpec(1, True, 1, _ex1),
    2: ExampleSpec(2, True, 1, _ex2),
    3: ExampleSpec(3, True, 1, _ex3),
    4: ExampleSpec(4, True, 1, _ex4),
    5: ExampleSpec(5, True, 1, _ex5),
    6: ExampleSpec(6, True, 1, _ex3, uniform_noise=True),
    7: ExampleSpec(7, True, 1, _ex7),
    8: ExampleSpec(8, True, 1, _ex8),
    9: ExampleSpec(9, False, 4, _ex9),
    10: ExampleSpec(10, False, 4, _ex10),
    11: ExampleSpec(11, False, 4, _ex11),
    12: ExampleSpec(12, False, 4, _ex12),
    13: ExampleSpec(13, False, 4, _ex13),
    14: ExampleSpec(14, False, 4, _ex14),
}


def generate(example: ExampleSpec, q: int, rng: RngStream
             ) -> tuple[DataMatrix, np.ndarray, np.ndarray]:
    """Draw fresh (mu, sigma^2) pairs and noise, and assemble the data."""
    if q < 2:
        raise ValueError("need q >= 2")
    gen = rng.generator
    mu, sigma2 = example.draw_pairs(q, gen)
    if example.uniform_noise:
        eps = gen.uniform(-_SQRT3, _SQRT3, size=(example.n, q))
    else:
        eps = gen.standard_normal((example.n, q))
    values = mu[None, :] + np.sqrt(sigma2)[None, :] * eps
    kv = sigma2.copy() if example.known_variance else None
    return DataMatrix(values, kv), mu, sigma2


# ---------------------------------------------------------------------------
# estimator adapters

def dpmm_estimator(config: Optional[SamplerConfig] = None,
                   gamma: Optional[float] = None,
                   k: Optional[int] = None):
    """Adapter running the mixture sampler as a study estimator."""

    def run(data: DataMatrix, true_mu, seed: int):
        cfg = config or SamplerConfig()
        std_data, _ = standardize(data)
        overrides = {}
        if gamma is not None:
            overrides["gamma"] = gamma
        if k is not None:
            overrides["k"] = k
        hyper = elicit_hyperparams(summarize(std_data),
                                   std_data.known_variances, **overrides)
        cfg = SamplerConfig(
            n_iter=cfg.n_iter, n_burnin=cfg.n_burnin,
            mh_step_alpha=cfg.mh_step_alpha, mh_step_beta=cfg.mh_step_beta,
            adapt_mh=cfg.adapt_mh, density_grid=cfg.density_grid, seed=seed)
        summary = fit(data, hyper, cfg)
        return summary.mu_hat, summary.sigma2_hat

    return run


def _baseline_adapter(name: str):
    func = baselines.REGISTRY[name]

    def run(data: DataMatrix, true_mu, seed: int):
        if data.known_variance_mode:
            xbar = data.values[0]
            v = data.known_variances
            sigma2_hat = None
        else:
            xbar = data.values.mean(axis=0)
            s2 = data.values.var(axis=0, ddof=1)
            v = s2 / data.n
            sigma2_hat = s2 if name == "Naive" else None
        return func(xbar, v, true_mu), sigma2_hat

    return run


def make_estimators(names: Sequence[str],
                    dpmm_config: Optional[SamplerConfig] = None,
                    gamma: Optional[float] = None,
                    k: Optional[int] = None) -> dict[str, Callable]:
    """Resolve estimator labels to study callables.

    Recognized labels: the baseline registry plus "NIG-DPMM" and
    "NIG-DPMM.K1" (the sampler forced to one component).
    """
    out = {}
    for name in names:
        if name == "NIG-DPMM":
            out[name] = dpmm_estimator(dpmm_config, gamma=gamma, k=k)
        elif name == "NIG-DPMM.K1":
            out[name] = dpmm_estimator(dpmm_config, gamma=gamma, k=1)
        elif name in baselines.REGISTRY:
            out[name] = _baseline_adapter(name)
        else:
            known = sorted(list(baselines.REGISTRY) + ["NIG-DPMM",
                                                       "NIG-DPMM.K1"])
            raise KeyError(f"unknown estimator {name!r}; choose from {known}")
    return out


# ---------------------------------------------------------------------------
# study engine

@dataclass
class RiskCell:
    mse_mu: float
    se_mu: float
    mse_sigma2: Optional[float]
    se_sigma2: Optional[float]
    n_ok: int
    failures: int


@dataclass
class RiskReport:
    example_id: int
    q_values: list[int]
    estimators: list[str]
    n_reps: int
    seed: int
    cells: dict[tuple[str, int], RiskCell] = field(default_factory=dict)

    def mse(self, estimator: str, q: int) -> float:
        return self.cells[(estimator, q)].mse_mu

    def se(self, estimator: str, q: int) -> float:
        return self.cells[(estimator, q)].se_mu

    def to_rows(self):
        rows = []
        for name in self.estimators:
            for q in self.q_values:
                c = self.cells[(name, q)]
                rows.append({
                    "estimator": name, "q": q,
                    "mse_mu": c.mse_mu, "se_mu": c.se_mu,
                    "mse_sigma2": c.mse_sigma2, "se_sigma2": c.se_sigma2,
                    "n_ok": c.n_ok, "failures": c.failures,
                })
        return rows

    def save_csv(self, path) -> None:
        rows = self.to_rows()
        with open(path, "w") as fh:
            fh.write("estimator,q,mse_mu,se_mu,mse_sigma2,se_sigma2,"
                     "n_ok,failures\n")
            for r in rows:
                s2 = "" if r["mse_sigma2"] is None else repr(r["mse_sigma2"])
                s2e = "" if r["se_sigma2"] is None else repr(r["se_sigma2"])
                fh.write(f"{r['estimator']},{r['q']},{r['mse_mu']!r},"
                         f"{r['se_mu']!r},{s2},{s2e},{r['n_ok']},"
                         f"{r['failures']}\n")

    def save_json(self, path) -> None:
        payload = {
            "example": self.example_id,
            "q_values": self.q_values,
            "n_reps": self.n_reps,
            "seed": self.seed,
            "rows": self.to_rows(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    def save_svg(self, path, width: int = 640, height: int = 420) -> None:
        """MSE-vs-q line chart; one polyline per estimator."""
        margin = 60
        qs = self.q_values
        all_mse = [self.cells[(e, q)].mse_mu for e in self.estimators
                   for q in qs]
        lo, hi = min(all_mse), max(all_mse)
        if hi <= lo:
            hi = lo + 1.0
        q_lo, q_hi = min(qs), max(qs)
        if q_hi <= q_lo:
            q_hi = q_lo + 1

        def sx(q):
            return margin + (q - q_lo) / (q_hi - q_lo) * (width - 2 * margin)

        def sy(v):
            return height - margin - (v - lo) / (hi - lo) \
                * (height - 2 * margin)

        palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
                 f'height="{height}">']
        parts.append(f'<line x1="{margin}" y1="{height - margin}" '
                     f'x2="{width - margin}" y2="{height - margin}" '
                     f'stroke="black"/>')
        parts.append(f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
                     f'y2="{height - margin}" stroke="black"/>')
        parts.append(f'<text x="{width // 2}" y="{height - 15}">q</text>')
        parts.append(f'<text x="15" y="{height // 2}" '
                     f'transform="rotate(-90 15 {height // 2})">MSE</text>')
        for i, name in enumerate(self.estimators):
            color = palette[i % len(palette)]
            pts = " ".join(f"{sx(q):.2f},{sy(self.cells[(name, q)].mse_mu):.2f}"
                           for q in qs)
            parts.append(f'<polyline fill="none" stroke="{color}" '
                         f'points="{pts}"><title>{name}</title></polyline>')
            parts.append(f'<text x="{width - margin + 4}" '
                         f'y="{margin + 14 * i + 10}" font-size="10" '
                         f'fill="{color}">{name}</text>')
        parts.append("</svg>")
        with open(path, "w") as fh:
            fh.write("\n".join(parts) + "\n")


def _one_replication(example: ExampleSpec, q: int, rep: int, seed: int,
                     estimators: dict[str, Callable]):
    stream = RngStream(seed, substream_id(example.id, q, rep))
    data, true_mu, true_sigma2 = generate(example, q, stream)
    fit_seed = substream_id(seed, example.id, q, rep, 1)
    out = {}
    for name, est in estimators.items():
        try:
            mu_hat, sigma2_hat = est(data, true_mu, fit_seed)
            loss_mu = float(np.mean((mu_hat - true_mu) ** 2))
            loss_s2 = None
            if sigma2_hat is not None:
                loss_s2 = float(np.mean((sigma2_hat - true_sigma2) ** 2))
            out[name] = (loss_mu, loss_s2)
        except Exception:
            out[name] = None
    return out


def run_study(example_id: int, q_values: Sequence[int],
              estimator_names: Sequence[str], n_reps: int, seed: int = 0,
              n_jobs: int = 1,
              dpmm_config: Optional[SamplerConfig] = None,
              gamma: Optional[float] = None,
              k: Optional[int] = None) -> RiskReport:
    """Monte Carlo risk comparison; deterministic given the seed.

    Per-replication streams are keyed by (example, q, replication), so the
    generated data do not depend on the estimator list or the worker count.
    A failing estimator is excluded for that replication only.
    """
    example = EXAMPLES[example_id]
    estimators = make_estimators(estimator_names, dpmm_config, gamma, k)
    report = RiskReport(example_id, list(q_values), list(estimator_names),
                        n_reps, seed)
    for q in q_values:
        jobs = [(example, q, rep, seed, estimators) for rep in range(n_reps)]
        if n_jobs > 1:
            from joblib import Parallel, delayed
            results = Parallel(n_jobs=n_jobs)(
                delayed(_one_replication)(*job) for job in jobs)
        else:
            results = [_one_replication(*job) for job in jobs]
        for name in estimator_names:
            mu_losses = []
            s2_losses = []
            failures = 0
            for res in results:
                cell = res[name]
                if cell is None:
                    failures += 1
                    continue
                mu_losses.append(cell[0])
                if cell[1] is not None:
                    s2_losses.append(cell[1])
            mu_losses = np.array(mu_losses)
            n_ok = mu_losses.size
            se = float(mu_losses.std(ddof=1) / np.sqrt(n_ok)) if n_ok > 1 \
                else 0.0
            mse_s2 = se_s2 = None
            if s2_losses:
                arr = np.array(s2_losses)
                mse_s2 = float(arr.mean())
                se_s2 = float(arr.std(ddof=1) / np.sqrt(arr.size)) \
                    if arr.size > 1 else 0.0
            report.cells[(name, q)] = RiskCell(
                mse_mu=float(mu_losses.mean()) if n_ok else np.nan,
                se_mu=se, mse_sigma2=mse_s2, se_sigma2=se_s2,
                n_ok=n_ok, failures=failures)
    return report


def gamma_sensitivity(gammas: Sequence[float], q_values: Sequence[int],
                      n_reps: int, seed: int = 0,
                      dpmm_config: Optional[SamplerConfig] = None,
                      k: int = 10):
    """Concentration-parameter sweep on the bimodal mixture law (example 11).

    The same data streams are reused across gamma values, so MSE differences
    are paired comparisons.  Returns per-gamma risk plus the per-replication
    averaged sorted-weight vectors (boxplot data for the 2nd/3rd largest
    weights).
    """
    example = EXAMPLES[11]
    cfg = dpmm_config or SamplerConfig()
    out = {"gammas": list(gammas), "q_values": list(q_values),
           "mse_mu": {}, "mse_sigma2": {}, "pi_sorted": {}}
    for gamma in gammas:
        for q in q_values:
            mu_losses, s2_losses, pis = [], [], []
            for rep in range(n_reps):
                stream = RngStream(seed, substream_id(example.id, q, rep))
                data, true_mu, true_sigma2 = generate(example, q, stream)
                std_data, _ = standardize(data)
                hyper = elicit_hyperparams(
                    summarize(std_data), std_data.known_variances,
                    gamma=gamma, k=k)
                fit_seed = substream_id(seed, example.id, q, rep, 1)
                run_cfg = SamplerConfig(
                    n_iter=cfg.n_iter, n_burnin=cfg.n_burnin,
                    mh_step_alpha=cfg.mh_step_alpha,
                    mh_step_beta=cfg.mh_step_beta,
                    adapt_mh=cfg.adapt_mh, seed=fit_seed)
                summary = fit(data, hyper, run_cfg)
                mu_losses.append(float(np.mean((summary.mu_hat - true_mu) ** 2)))
                s2_losses.append(
                    float(np.mean((summary.sigma2_hat - true_sigma2) ** 2)))
                pis.append(summary.pi_sorted_mean)
            out["mse_mu"][(gamma, q)] = float(np.mean(mu_losses))
            out["mse_sigma2"][(gamma, q)] = float(np.mean(s2_losses))
            out["pi_sorted"][(gamma, q)] = np.array(pis)
    return out
