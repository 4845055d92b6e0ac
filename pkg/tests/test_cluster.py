"""K-means initializer: objective monotonicity and recovery."""

import numpy as np
import pytest

from nigmix.cluster import lloyd, quantile_assignment
from nigmix.rng import RngStream


def test_objective_nonincreasing():
    rng = np.random.default_rng(1)
    pts = np.concatenate([rng.normal(0, 1, (40, 2)),
                          rng.normal(6, 1, (40, 2))])
    for seed in range(5):
        _, _, hist = lloyd(pts, 3, RngStream(seed))
        assert np.all(np.diff(hist) <= 1e-9)


def test_recovers_separated_clusters():
    rng = np.random.default_rng(2)
    pts = np.concatenate([rng.normal(0, 0.1, (30, 1)),
                          rng.normal(10, 0.1, (30, 1))])
    labels, centers, _ = lloyd(pts, 2, RngStream(9))
    # the two true groups map to distinct labels
    assert len(set(labels[:30])) == 1
    assert len(set(labels[30:])) == 1
    assert labels[0] != labels[-1]
    assert sorted(centers[:, 0]) == pytest.approx([0.0, 10.0], abs=0.2)


def test_deterministic_given_stream():
    pts = np.random.default_rng(3).normal(size=(50, 2))
    l1, c1, _ = lloyd(pts, 4, RngStream(42))
    l2, c2, _ = lloyd(pts, 4, RngStream(42))
    assert np.array_equal(l1, l2)
    assert np.array_equal(c1, c2)


def test_k_exceeds_points():
    with pytest.raises(ValueError):
        lloyd(np.zeros((2, 1)), 3, RngStream(0))


def test_duplicate_points_ok():
    labels, _, _ = lloyd(np.full((10, 1), 3.0), 2, RngStream(0))
    assert labels.shape == (10,)


def test_quantile_assignment():
    labels = quantile_assignment(np.array([5.0, 1.0, 3.0, 2.0, 4.0, 6.0]), 3)
    # sorted order 1,2,3,4,5,6 -> bins 0,0,1,1,2,2
    assert labels.tolist() == [2, 0, 1, 0, 1, 2]
    assert set(labels) == {0, 1, 2}
