"""Shared helpers for the test suite."""

import numpy as np
import pytest

from metricdepth.core import DistanceMatrix


def euclidean_dm(points) -> DistanceMatrix:
    """Distance matrix of points given as an (n, p) array (or n-vector)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and np.asarray(points).ndim == 1:
        pts = pts.T
    return DistanceMatrix(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2))


def line_dm(values) -> DistanceMatrix:
    v = np.asarray(values, dtype=float)
    return DistanceMatrix(np.abs(v[:, None] - v[None, :]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
