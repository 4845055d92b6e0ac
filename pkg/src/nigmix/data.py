"""Observation matrices, summary statistics and the standardization step.

Data are n replications of q coordinates.  In known-variance mode the
per-coordinate variances are supplied alongside a single replication
(n may be 1); otherwise n >= 2 is required so the per-column sample
variances exist.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "DataError",
    "DataMatrix",
    "Summaries",
    "StandardizeRecord",
    "summarize",
    "standardize",
    "back_transform",
    "read_csv",
    "read_known_variance_csv",
]


class DataError(ValueError):
    """Raised for malformed or degenerate input data."""


@dataclass(frozen=True)
class DataMatrix:
    """n x q observation matrix, optionally with known per-column variances."""

    values: np.ndarray
    known_variances: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError("values must be a 2-D array (n x q)")
        if v.shape[1] < 2:
            raise DataError("need at least q=2 coordinates")
        if not np.all(np.isfinite(v)):
            raise DataError("values must be finite")
        # column-major storage: the sampler iterates within columns
        object.__setattr__(self, "values", np.asfortranarray(v))
        if self.known_variances is not None:
            kv = np.asarray(self.known_variances, dtype=float)
            if kv.shape != (v.shape[1],):
                raise DataError("known_variances must have length q")
            if not np.all(np.isfinite(kv)) or np.any(kv <= 0):
                raise DataError("known_variances must be positive and finite")
            object.__setattr__(self, "known_variances", kv)
        elif v.shape[0] < 2:
            raise DataError(
                "n=1 requires known variances; the variances are not "
                "identifiable from a single replication")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]

    @property
    def known_variance_mode(self) -> bool:
        return self.known_variances is not None


@dataclass(frozen=True)
class Summaries:
    """Per-column and grand summaries of a DataMatrix.

    Divisors: col_vars use n-1, grand_var uses nq-1, between_var uses q-1,
    so the exact split (nq-1) grand_var = (n-1) sum(col_vars)
    + n (q-1) between_var holds.
    """

    col_means: np.ndarray
    col_vars: Optional[np.ndarray]
    grand_mean: float
    grand_var: float
    between_var: float


@dataclass(frozen=True)
class StandardizeRecord:
    grand_mean: float
    scale: float  # grand standard deviation S


def summarize(data: DataMatrix) -> Summaries:
    v = data.values
    n, q = v.shape
    col_means = v.mean(axis=0)
    col_vars = v.var(axis=0, ddof=1) if n >= 2 else None
    grand_mean = float(v.mean())
    grand_var = float(v.var(ddof=1))
    between_var = float(np.sum((col_means - grand_mean) ** 2) / (q - 1))
    return Summaries(col_means, col_vars, grand_mean, grand_var, between_var)


def standardize(data: DataMatrix) -> tuple[DataMatrix, StandardizeRecord]:
    """Center and scale so the grand mean is 0 and the grand variance 1.

    Known variances, when present, are divided by S^2 so the known-variance
    model transforms consistently.
    """
    s = summarize(data)
    if s.grand_var <= 0:
        raise DataError("degenerate data: grand variance is zero")
    scale = float(np.sqrt(s.grand_var))
    values = (data.values - s.grand_mean) / scale
    kv = None
    if data.known_variances is not None:
        kv = data.known_variances / s.grand_var
    return (DataMatrix(values, kv), StandardizeRecord(s.grand_mean, scale))


def back_transform(mu: np.ndarray, sigma2, record: StandardizeRecord):
    """Map standardized-scale estimates back to the original scale."""
    mu_out = record.scale * np.asarray(mu, dtype=float) + record.grand_mean
    if sigma2 is None:
        return mu_out, None
    return mu_out, record.scale ** 2 * np.asarray(sigma2, dtype=float)


def read_csv(path, has_header: Optional[bool] = None) -> DataMatrix:
    """Read an n x q matrix: one row per replication, one column per coordinate.

    A header row is detected (or forced via ``has_header``) when the first
    row fails to parse as numbers.
    """
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    if has_header is None:
        has_header = not _all_numeric(rows[0])
    if has_header:
        rows = rows[1:]
    try:
        values = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry: {exc}") from None
    return DataMatrix(values)


def read_known_variance_csv(path, has_header: Optional[bool] = None) -> DataMatrix:
    """Read a two-column (value, variance) CSV, one row per coordinate."""
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    if has_header is None:
        has_header = not _all_numeric(rows[0])
    if has_header:
        rows = rows[1:]
    vals, variances = [], []
    for lineno, r in enumerate(rows, start=2 if has_header else 1):
        if len(r) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(r)}")
        try:
            vals.append(float(r[0]))
            variances.append(float(r[1]))
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric entry") from None
    return DataMatrix(np.array(vals)[None, :], np.array(variances))


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row]


def _all_numeric(row) -> bool:
    try:
        [float(x) for x in row]
        return True
    except ValueError:
        return False
