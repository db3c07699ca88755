"""Proper orthogonal decomposition of training-output snapshots.

Snapshots must share one output grid; the modes are the leading left singular
vectors of the raw snapshot matrix (no mean subtraction -- the coefficient
networks can absorb a mean).  The SVD goes through the symmetric
eigendecomposition of the smaller Gram matrix, which is plenty at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SnapshotMatrix", "compute_pod", "pod_reconstruction_error"]


@dataclass
class SnapshotMatrix:
    """M x S matrix of S output snapshots sampled on one shared grid of M points."""

    values: np.ndarray
    grid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.grid = np.asarray(self.grid, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D (grid points x samples) matrix")
        if self.grid.shape != (self.values.shape[0],):
            raise ValueError("grid length must match the number of rows of values")


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    # Deterministic orientation: the largest-magnitude entry of each mode is positive.
    for k in range(modes.shape[1]):
        col = modes[:, k]
        if col[np.argmax(np.abs(col))] < 0.0:
            modes[:, k] = -col
    return modes


def compute_pod(snaps: SnapshotMatrix, n_modes: int) -> np.ndarray:
    """Top ``n_modes`` left singular vectors of the snapshot matrix, shape (M, N).

    Columns are ordered by descending singular value and orthonormal.
    """
    values = snaps.values
    m, s = values.shape
    if not 1 <= n_modes <= min(m, s):
        raise ValueError(f"n_modes must be in [1, min(M, S)] = [1, {min(m, s)}]")
    if s < m:
        gram = values.T @ values
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1][:n_modes]
        sigma = np.sqrt(np.maximum(eigvals[order], 0.0))
        modes = values @ eigvecs[:, order]
        norms = np.linalg.norm(modes, axis=0)
        if np.any(norms == 0.0) or np.any(sigma == 0.0):
            raise ValueError("snapshot matrix rank is below the requested mode count")
        modes /= norms
    else:
        gram = values @ values.T
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1][:n_modes]
        modes = eigvecs[:, order].copy()
    return _fix_signs(modes)


def pod_reconstruction_error(snaps: SnapshotMatrix, modes: np.ndarray) -> float:
    """Relative Frobenius error of projecting the snapshots onto the modes."""
    values = snaps.values
    denom = np.linalg.norm(values)
    if denom == 0.0:
        raise ValueError("snapshot matrix is identically zero")
    if modes.shape[1] == 0:
        return 1.0
    if modes.shape[0] != values.shape[0]:
        raise ValueError("modes and snapshots have incompatible grid sizes")
    residual = values - modes @ (modes.T @ values)
    return float(np.linalg.norm(residual) / denom)
