"""Small Lloyd k-means used to initialize the mixture sampler."""

from __future__ import annotations

import numpy as np

from .rng import RngStream

__all__ = ["lloyd", "quantile_assignment"]


def lloyd(points: np.ndarray, k: int, rng: RngStream, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding.

    Returns (labels, centers, objective_history); the objective (total
    within-cluster squared distance) is non-increasing across iterations.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    npts = pts.shape[0]
    if k > npts:
        raise ValueError("k cannot exceed the number of points")
    centers = _kmeanspp(pts, k, rng)
    history = []
    labels = np.zeros(npts, dtype=int)
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(npts), labels].sum()))
        new_centers = centers.copy()
        for r in range(k):
            members = pts[labels == r]
            if len(members):
                new_centers[r] = members.mean(axis=0)
            else:
                # reseed an empty cluster at the farthest point
                far = d2.min(axis=1).argmax()
                new_centers[r] = pts[far]
        if np.allclose(new_centers, centers):
            break
        centers = new_centers
    return labels, centers, np.array(history)


def _kmeanspp(pts: np.ndarray, k: int, rng: RngStream) -> np.ndarray:
    gen = rng.generator
    npts = pts.shape[0]
    centers = [pts[gen.integers(npts)]]
    for _ in range(1, k):
        d2 = np.min(
            ((pts[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(axis=2),
            axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(pts[gen.integers(npts)])
            continue
        centers.append(pts[gen.choice(npts, p=d2 / total)])
    return np.array(centers)


def quantile_assignment(values: np.ndarray, k: int) -> np.ndarray:
    """Deterministic fallback: equal-count bins of the first feature."""
    v = np.asarray(values, dtype=float)
    if v.ndim > 1:
        v = v[:, 0]
    order = np.argsort(v, kind="stable")
    labels = np.empty(len(v), dtype=int)
    labels[order] = np.minimum((np.arange(len(v)) * k) // len(v), k - 1)
    return labels
