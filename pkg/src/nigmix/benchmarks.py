"""Real-data pipelines: batting averages (known variance) and gene
expression (unknown variance).

Both datasets are user-supplied; see the README for sources.  The batting
pipeline applies the arcsine variance-stabilizing transform, fits on
first-half data, and scores normalized total squared prediction error (TSE)
on the second half.  The expression pipeline treats the full control matrix
as the population, subsamples rows and columns, and scores squared loss
against the population means and variances.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .data import DataError, DataMatrix
from .dpmm import SamplerConfig
from .rng import RngStream, substream_id
from .simulate import make_estimators

__all__ = [
    "BaseballRecord",
    "read_baseball_csv",
    "baseball_transform",
    "tse",
    "run_baseball",
    "baseball_permutations",
    "read_prostate_csv",
    "prostate_study",
]


@dataclass(frozen=True)
class BaseballRecord:
    player_id: str
    h1: int
    n1: int
    h2: int
    n2: int
    is_pitcher: bool

    def __post_init__(self) -> None:
        for h, n in ((self.h1, self.n1), (self.h2, self.n2)):
            if not (0 <= h <= n):
                raise DataError(f"{self.player_id}: hits exceed at-bats")


def read_baseball_csv(path) -> list[BaseballRecord]:
    """Read (player_id, H1, N1, H2, N2, is_pitcher) rows."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and not row[1].strip().isdigit()):
                continue  # header or blank
            if len(row) < 6:
                raise DataError(f"{path}:{lineno}: expected 6 columns")
            try:
                records.append(BaseballRecord(
                    row[0].strip(), int(row[1]), int(row[2]), int(row[3]),
                    int(row[4]), _parse_bool(row[5])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not records:
        raise DataError(f"{path}: no records")
    return records


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "p", "pitcher"):
        return True
    if t in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"bad pitcher flag {text!r}")


def _arcsine(h: np.ndarray, n: np.ndarray) -> np.ndarray:
    return np.arcsin(np.sqrt((h + 0.25) / (n + 0.5)))


@dataclass
class BaseballData:
    """Transformed estimation and validation sets."""

    x1: np.ndarray          # first-half transformed averages (estimation set)
    v1: np.ndarray          # known variances 1/(4 N1)
    valid_mask: np.ndarray  # estimation-set players also in the validation set
    x2: np.ndarray          # second-half values, validation subset
    v2: np.ndarray          # 1/(4 N2), validation subset
    is_pitcher: np.ndarray  # estimation-set pitcher flags


def baseball_transform(records: Sequence[BaseballRecord],
                       min_at_bats: int = 11) -> BaseballData:
    """Arcsine-transform the season halves and apply the at-bat filters.

    Estimation keeps players with at least ``min_at_bats`` first-half
    at-bats; validation additionally requires that many second-half at-bats.
    """
    est = [r for r in records if r.n1 >= min_at_bats]
    if not est:
        raise DataError("no players pass the first-half at-bat filter")
    h1 = np.array([r.h1 for r in est], dtype=float)
    n1 = np.array([r.n1 for r in est], dtype=float)
    h2 = np.array([r.h2 for r in est], dtype=float)
    n2 = np.array([r.n2 for r in est], dtype=float)
    valid = n2 >= min_at_bats
    return BaseballData(
        x1=_arcsine(h1, n1),
        v1=1.0 / (4.0 * n1),
        valid_mask=valid,
        x2=_arcsine(h2[valid], n2[valid]),
        v2=1.0 / (4.0 * n2[valid]),
        is_pitcher=np.array([r.is_pitcher for r in est]),
    )


def tse(mu_hat: np.ndarray, bb: BaseballData) -> float:
    """Normalized total squared prediction error on the validation set.

    The naive predictor (first-half value) scores exactly 1.
    """
    x1v = bb.x1[bb.valid_mask]
    muv = np.asarray(mu_hat)[bb.valid_mask]
    noise = float(bb.v2.sum())
    denom = float(np.sum((bb.x2 - x1v) ** 2)) - noise
    if denom == 0.0:
        raise DataError("zero TSE denominator")
    return (float(np.sum((bb.x2 - muv) ** 2)) - noise) / denom


def _fit_all(bb: BaseballData, estimators: dict[str, Callable],
             seed: int) -> dict[str, float]:
    data = DataMatrix(bb.x1[None, :], bb.v1)
    out = {}
    for name, est in estimators.items():
        mu_hat, _ = est(data, None, seed)
        out[name] = tse(mu_hat, bb)
    return out


def run_baseball(records: Sequence[BaseballRecord],
                 estimator_names: Sequence[str],
                 subset: str = "all",
                 seed: int = 0,
                 dpmm_config: Optional[SamplerConfig] = None
                 ) -> dict[str, float]:
    """TSE per estimator on the chosen subset (all/pitchers/non-pitchers)."""
    records = _subset(records, subset)
    bb = baseball_transform(records)
    estimators = make_estimators(estimator_names, dpmm_config)
    return _fit_all(bb, estimators, substream_id(seed, 5))


def _subset(records, subset: str):
    if subset == "all":
        return list(records)
    if subset == "pitchers":
        return [r for r in records if r.is_pitcher]
    if subset == "non-pitchers":
        return [r for r in records if not r.is_pitcher]
    raise ValueError("subset must be all, pitchers or non-pitchers")


def baseball_permutations(records: Sequence[BaseballRecord],
                          estimator_names: Sequence[str],
                          n_perm: int,
                          subset: str = "all",
                          seed: int = 0,
                          dpmm_config: Optional[SamplerConfig] = None
                          ) -> dict[str, float]:
    """Average TSE over hypergeometric reshuffles of the season split.

    Each permutation redraws the first-half hits from
    HG(N1+N2, H1+H2, N1), keeping the season totals fixed, then reruns the
    whole pipeline.
    """
    if n_perm < 1:
        raise ValueError("need n_perm >= 1")
    records = _subset(records, subset)
    estimators = make_estimators(estimator_names, dpmm_config)
    totals = {}
    for p in range(n_perm):
        stream = RngStream(seed, substream_id(5, p))
        gen = stream.generator
        permuted = []
        for r in records:
            h_total = r.h1 + r.h2
            h1 = int(gen.hypergeometric(h_total, r.n1 + r.n2 - h_total, r.n1))
            permuted.append(BaseballRecord(
                r.player_id, h1, r.n1, h_total - h1, r.n2, r.is_pitcher))
        bb = baseball_transform(permuted)
        scores = _fit_all(bb, estimators, substream_id(seed, 5, p, 1))
        for name, s in scores.items():
            totals[name] = totals.get(name, 0.0) + s
    return {name: total / n_perm for name, total in totals.items()}


def read_prostate_csv(path) -> np.ndarray:
    """Read a genes x subjects expression matrix with a header row."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                if lineno == 1:
                    continue  # header of subject labels
                raise DataError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    matrix = np.array(rows)
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"{path}: non-finite entries")
    return matrix


def prostate_study(matrix: np.ndarray,
                   estimator_names: Sequence[str],
                   n_rows: int = 500, n_cols: int = 3, n_reps: int = 100,
                   seed: int = 0,
                   dpmm_config: Optional[SamplerConfig] = None):
    """Subsampling study against population ground truth.

    The full matrix (genes x subjects) defines the truth with the population
    divisor; each replication samples ``n_rows`` genes and ``n_cols``
    subjects, fits every estimator on the subsample, and records average
    squared losses for the means and variances.
    """
    matrix = np.asarray(matrix, dtype=float)
    q_all, n_all = matrix.shape
    if n_cols < 2:
        raise ValueError("need n_cols >= 2")
    if n_rows > q_all:
        raise ValueError("n_rows exceeds the number of genes")
    # ground truth: population moments over all subjects (divisor n_all)
    true_mu = matrix.mean(axis=1)
    true_sigma2 = matrix.var(axis=1, ddof=0)
    estimators = make_estimators(estimator_names, dpmm_config)

    losses_mu: dict[str, list] = {n: [] for n in estimator_names}
    losses_s2: dict[str, list] = {n: [] for n in estimator_names}
    for rep in range(n_reps):
        stream = RngStream(seed, substream_id(6, rep))
        gen = stream.generator
        rows = gen.choice(q_all, size=n_rows, replace=False)
        cols = gen.choice(n_all, size=n_cols, replace=False)
        sub = matrix[np.ix_(rows, cols)].T  # replications x coordinates
        data = DataMatrix(sub)
        fit_seed = substream_id(seed, 6, rep, 1)
        for name, est in estimators.items():
            mu_hat, sigma2_hat = est(data, true_mu[rows], fit_seed)
            losses_mu[name].append(
                float(np.mean((mu_hat - true_mu[rows]) ** 2)))
            if sigma2_hat is not None:
                losses_s2[name].append(
                    float(np.mean((sigma2_hat - true_sigma2[rows]) ** 2)))
    out = {}
    for name in estimator_names:
        out[name] = {
            "mu_loss": float(np.mean(losses_mu[name])),
            "sigma2_loss": (float(np.mean(losses_s2[name]))
                            if losses_s2[name] else None),
        }
    return out
