"""Shared test oracles: dense system matrix and a literal dense SART."""

import numpy as np
import pytest

from tomoprior import ParallelGeometry, Projector, partition_subsets


def assemble_dense_matrix(geom: ParallelGeometry, side: int,
                          pixel_size: float = 1.0) -> np.ndarray:
    """Explicit system matrix, one forward projection per unit basis image."""
    proj = Projector(geom, side, pixel_size)
    n = side * side
    A = np.zeros((geom.num_views * geom.num_detectors, n))
    basis = np.zeros(n)
    for k in range(n):
        basis[k] = 1.0
        A[:, k] = proj.fp(basis.reshape(side, side)).ravel()
        basis[k] = 0.0
    return A


def dense_subset_rows(geom: ParallelGeometry, views: np.ndarray) -> np.ndarray:
    """Row indices of the dense matrix belonging to the given views."""
    nd = geom.num_detectors
    return np.concatenate([np.arange(v * nd, (v + 1) * nd) for v in views])


def dense_normalization(A_w: np.ndarray):
    """Reciprocal column/row sums of one subset block, zeros kept at zero."""
    col_sums = np.abs(A_w).sum(axis=0)
    row_sums = np.abs(A_w).sum(axis=1)
    d = np.where(col_sums > 1e-12, 1.0 / np.where(col_sums > 0, col_sums, 1.0), 0.0)
    m = np.where(row_sums > 1e-12, 1.0 / np.where(row_sums > 0, row_sums, 1.0), 0.0)
    return d, m


def dense_sart(A: np.ndarray, b: np.ndarray, geom: ParallelGeometry, side: int,
               num_subsets: int, iterations: int, relaxation: float = 1.0,
               x0: np.ndarray | None = None) -> np.ndarray:
    """Literal dense implementation of the block-iterative update with clamp."""
    partition = partition_subsets(geom.num_views, num_subsets)
    blocks = []
    for views in partition.subsets:
        rows = dense_subset_rows(geom, views)
        A_w = A[rows]
        d, m = dense_normalization(A_w)
        blocks.append((A_w, b.ravel()[rows], d, m))
    x = np.zeros(side * side) if x0 is None else x0.ravel().copy()
    for _ in range(iterations):
        for A_w, b_w, d, m in blocks:
            x = x - relaxation * d * (A_w.T @ (m * (A_w @ x - b_w)))
        x = np.maximum(x, 0.0)
    return x.reshape(side, side)


@pytest.fixture(scope="session")
def small_setup():
    """16x16 image, 8 views, 24 detectors, plus the dense oracle matrix."""
    geom = ParallelGeometry(num_views=8, num_detectors=24)
    side = 16
    return geom, side, assemble_dense_matrix(geom, side)
