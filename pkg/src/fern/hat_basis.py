"""Finite-element hat functions assembled exactly from ReLU units.

A hat with center ``a`` and half-width ``h`` rises with slope +1 on
``(a-h, a]``, falls with slope -1 on ``(a, a+h)``, vanishes elsewhere and
peaks at the value ``h``.  The same bump is the three-term ReLU combination

    relu(x - (a-h)) - 2*relu(x - a) + relu(x - (a+h)),

so each basis function costs exactly two trainable parameters.  All
functions here broadcast over numpy arrays and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HatParams",
    "hat_eval_piecewise",
    "hat_eval_relu",
    "hat_grad",
    "pwl_from_slopes",
    "basis_matrix",
]

DEFAULT_H_MIN = 1e-4


@dataclass
class HatParams:
    """Learnable hat-basis description: N centers and N positive half-widths."""

    centers: np.ndarray
    supports: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_1d(np.asarray(self.centers, dtype=float))
        self.supports = np.atleast_1d(np.asarray(self.supports, dtype=float))
        if self.centers.ndim != 1 or self.supports.ndim != 1:
            raise ValueError("centers and supports must be 1-D")
        if self.centers.shape != self.supports.shape:
            raise ValueError(
                f"centers ({self.centers.shape}) and supports ({self.supports.shape}) "
                "must have the same length"
            )
        if self.centers.size < 1:
            raise ValueError("need at least one basis function")
        if not np.all(np.isfinite(self.centers)) or not np.all(np.isfinite(self.supports)):
            raise ValueError("centers and supports must be finite")
        if np.any(self.supports <= 0.0):
            raise ValueError("supports must be positive")

    @property
    def n(self) -> int:
        return self.centers.size

    def clip_supports(self, h_min: float = DEFAULT_H_MIN) -> None:
        """Project supports onto [h_min, inf); keeps every hat a genuine bump."""
        np.maximum(self.supports, h_min, out=self.supports)

    def copy(self) -> "HatParams":
        return HatParams(self.centers.copy(), self.supports.copy())


def _check_h(h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0.0):
        raise ValueError("hat half-width h must be positive")
    return h


def hat_eval_piecewise(a, h, x):
    """Evaluate the hat by its case-by-case definition."""
    a = np.asarray(a, dtype=float)
    h = _check_h(h)
    x = np.asarray(x, dtype=float)
    rising = (x > a - h) & (x <= a)
    falling = (x > a) & (x < a + h)
    out = np.where(rising, x - (a - h), 0.0)
    out = np.where(falling, (a + h) - x, out)
    if out.ndim == 0:
        return float(out)
    return out


def hat_eval_relu(a, h, x):
    """Evaluate the hat as its exact three-term ReLU assembly."""
    a = np.asarray(a, dtype=float)
    h = _check_h(h)
    x = np.asarray(x, dtype=float)
    left = a - h
    right = a + h
    out = (
        np.maximum(x - left, 0.0)
        - 2.0 * np.maximum(x - a, 0.0)
        + np.maximum(x - right, 0.0)
    )
    if out.ndim == 0:
        return float(out)
    return out


def hat_grad(a, h, x):
    """Subgradients of ``hat_eval_relu`` w.r.t. (a, h, x).

    Uses the convention relu'(0) = 0, so gradients vanish exactly at the
    three kinks; everywhere else they are the ordinary derivatives.

    Returns
    -------
    (d_da, d_dh, d_dx) with the broadcast shape of the inputs.
    """
    a = np.asarray(a, dtype=float)
    h = _check_h(h)
    x = np.asarray(x, dtype=float)
    s_left = (x - (a - h) > 0.0).astype(float)
    s_mid = (x - a > 0.0).astype(float)
    s_right = (x - (a + h) > 0.0).astype(float)
    d_da = -s_left + 2.0 * s_mid - s_right
    d_dh = s_left - s_right  # the right-edge knot moves with +h, the left with -h
    d_dx = s_left - 2.0 * s_mid + s_right
    if d_da.ndim == 0:
        return float(d_da), float(d_dh), float(d_dx)
    return d_da, d_dh, d_dx


def pwl_from_slopes(slopes, interior_nodes, x):
    """Continuous piecewise-linear function with f(0)=0 built from ReLUs.

    ``slopes`` prescribes the slope on each of the n segments; the n-1
    strictly increasing ``interior_nodes`` are the breakpoints:

        f(x) = k_1*relu(x) + sum_j (k_{j+1} - k_j) * relu(x - x_j)
    """
    slopes = np.atleast_1d(np.asarray(slopes, dtype=float))
    nodes = np.atleast_1d(np.asarray(interior_nodes, dtype=float)) if np.size(interior_nodes) else np.empty(0)
    if slopes.size < 1:
        raise ValueError("need at least one slope")
    if nodes.size != slopes.size - 1:
        raise ValueError("need exactly len(slopes) - 1 interior nodes")
    if nodes.size and np.any(np.diff(nodes) <= 0.0):
        raise ValueError("interior nodes must be strictly increasing")
    x = np.asarray(x, dtype=float)
    out = slopes[0] * np.maximum(x, 0.0)
    for j in range(nodes.size):
        out = out + (slopes[j + 1] - slopes[j]) * np.maximum(x - nodes[j], 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def basis_matrix(params: HatParams, xs) -> np.ndarray:
    """Evaluation matrix Phi with Phi[m, k] = hat_k(xs[m]), shape (M, N)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    return hat_eval_relu(params.centers[None, :], params.supports[None, :], xs[:, None])


def basis_matrix_grads(params: HatParams, xs):
    """Per-entry derivatives of the basis matrix w.r.t. centers and supports.

    Returns (d_da, d_dh), each of shape (M, N); companion to ``basis_matrix``
    for training the hat parameters.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    d_da, d_dh, _ = hat_grad(params.centers[None, :], params.supports[None, :], xs[:, None])
    return d_da, d_dh
