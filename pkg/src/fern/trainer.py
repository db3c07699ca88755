"""Deterministic gradient training of operator models.

Full-batch by default: the benchmark datasets are small enough that one epoch
is one Adam step on the exact MSE gradient, which removes batching noise and
makes runs bit-reproducible from (model init, dataset, config).  Samples are
grouped by identical output grids so the bilinear prediction and its backward
pass run as a handful of matrix products per epoch.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dense_nets import net_backward
from .errors import TrainingError
from .hat_basis import basis_matrix_grads
from .operator_models import (
    DeepONetModel,
    FernModel,
    ModelGrads,
    OperatorModel,
    basis_values,
    branch_input_dim,
    branch_outputs,
    get_flat_params,
    grads_to_flat,
    set_flat_params,
    support_slice,
)

__all__ = [
    "AdamConstants",
    "AdamState",
    "TrainConfig",
    "TrainHistory",
    "cosine_lr",
    "mse_loss",
    "adam_step",
    "train",
]


@dataclass(frozen=True)
class AdamConstants:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings for one training run.

    ``loss`` selects the training objective: plain MSE over every
    (sample, point) pair (default), or per-sample-normalized MSE
    ("relative_mse": each sample's squared error divided by its squared
    target norm) for benchmarks whose samples span several orders of
    magnitude.
    """

    epochs: int = 2000
    lr0: float = 1e-2
    lr_min: float = 0.0
    batch: int | str = "full"
    seed: int = 0
    adam: AdamConstants = AdamConstants()
    h_min: float = 1e-4
    hat_layout: str = "uniform"
    hat_h0: float = 0.05
    loss: str = "mse"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr0 > self.lr_min >= 0.0:
            raise ValueError("need lr0 > lr_min >= 0")
        if self.batch != "full" and (not isinstance(self.batch, int) or self.batch < 1):
            raise ValueError("batch must be 'full' or a positive sample count")
        if self.loss not in ("mse", "relative_mse"):
            raise ValueError("loss must be 'mse' or 'relative_mse'")


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("epoch,loss,lr,wall_time\n")
            for i, (lo, lr, wt) in enumerate(zip(self.loss, self.lr, self.wall_time)):
                f.write(f"{i},{float(lo)!r},{float(lr)!r},{float(wt)!r}\n")


def cosine_lr(epoch: int, total: int, lr0: float, lr_min: float = 0.0) -> float:
    """Half-cosine decay from lr0 (epoch 0) to lr_min (epoch total-1)."""
    if not 0 <= epoch < total:
        raise ValueError(f"epoch must be in [0, {total})")
    if total == 1:
        return lr0
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + np.cos(np.pi * epoch / (total - 1)))


def mse_loss(pred, target) -> float:
    """Mean squared difference over all (sample, point) pairs."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError("prediction and target shapes differ")
    diff = pred - target
    return float(np.mean(diff * diff))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state: AdamState, lr: float,
              adam: AdamConstants = AdamConstants()):
    """One bias-corrected adaptive-moment update; returns (params, state)."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("params, grads and optimizer state must have one shape")
    if not np.all(np.isfinite(grads)):
        raise TrainingError("non-finite gradient", state.t)
    t = state.t + 1
    m = adam.beta1 * state.m + (1.0 - adam.beta1) * grads
    v = adam.beta2 * state.v + (1.0 - adam.beta2) * (grads * grads)
    m_hat = m / (1.0 - adam.beta1**t)
    v_hat = v / (1.0 - adam.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + adam.eps)
    return new_params, AdamState(m, v, t)


# --- batched loss/gradient engine ---


@dataclass
class _Group:
    """Samples sharing one output grid: rows index into the sensor matrix."""

    rows: np.ndarray
    xs: np.ndarray
    targets: np.ndarray  # (len(rows), len(xs))


def _make_groups(dataset):
    """Sensor matrix U (S, m) plus groups of samples with identical grids."""
    u_rows = [s.u_sensors for s in dataset.samples]
    u = np.stack(u_rows, axis=0)
    buckets: dict[bytes, list[int]] = {}
    for i, s in enumerate(dataset.samples):
        buckets.setdefault(s.x_out.tobytes(), []).append(i)
    groups = []
    for rows in buckets.values():
        xs = dataset.samples[rows[0]].x_out
        targets = np.stack([dataset.samples[i].v_out for i in rows], axis=0)
        groups.append(_Group(np.asarray(rows, dtype=np.intp), xs, targets))
    return u, groups


def _restrict_groups(groups, rows):
    """Sub-groups containing only the given sample rows (for minibatches)."""
    chosen = set(int(r) for r in rows)
    out = []
    for g in groups:
        keep = [j for j, r in enumerate(g.rows) if int(r) in chosen]
        if keep:
            out.append(_Group(g.rows[keep], g.xs, g.targets[keep]))
    return out


def _loss_and_grads(model: OperatorModel, u: np.ndarray, groups, loss_kind: str = "mse"):
    """Exact loss and gradients over all points of all samples in the groups.

    'mse' averages squared errors over every (sample, point) pair;
    'relative_mse' averages per-sample squared errors normalized by each
    sample's squared target norm.
    """
    c, tapes = branch_outputs(model, u)
    total_points = sum(g.rows.size * g.xs.size for g in groups)
    total_samples = sum(g.rows.size for g in groups)
    g_c = np.zeros_like(c)
    loss = 0.0
    is_fern = isinstance(model, FernModel)
    is_deeponet = isinstance(model, DeepONetModel)
    g_centers = np.zeros(model.hat.n) if is_fern else None
    g_supports = np.zeros(model.hat.n) if is_fern else None
    g_trunk = None
    for g in groups:
        phi, trunk_tape = basis_values(model, g.xs)
        pred = c[g.rows] @ phi.T
        diff = pred - g.targets
        if loss_kind == "mse":
            loss += float(np.sum(diff * diff)) / total_points
            resid = (2.0 / total_points) * diff
        else:
            norms_sq = np.sum(g.targets * g.targets, axis=1, keepdims=True)
            if np.any(norms_sq == 0.0):
                raise ValueError("relative_mse needs targets with nonzero norm")
            loss += float(np.sum(diff * diff / norms_sq)) / total_samples
            resid = (2.0 / total_samples) * diff / norms_sq
        g_c[g.rows] += resid @ phi
        weighted = resid.T @ c[g.rows]  # (M_g, N): dLoss/dPhi entries
        if is_fern:
            d_da, d_dh = basis_matrix_grads(model.hat, g.xs)
            g_centers += np.sum(weighted * d_da, axis=0)
            g_supports += np.sum(weighted * d_dh, axis=0)
        elif is_deeponet:
            gt, _ = net_backward(model.trunk, trunk_tape, weighted)
            g_trunk = gt if g_trunk is None else g_trunk + gt
    branch_grads = []
    for k, net in enumerate(model.branches):
        gp, _ = net_backward(net, tapes[k], g_c[:, k : k + 1])
        branch_grads.append(gp)
    return loss, ModelGrads(branch_grads, centers=g_centers, supports=g_supports, trunk=g_trunk)


def _check_grad_blocks(model, grads: ModelGrads, epoch: int) -> None:
    for k, g in enumerate(grads.branch):
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in branch network {k}", epoch)
    for name in ("centers", "supports", "trunk"):
        g = getattr(grads, name)
        if g is not None and not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name} block", epoch)


def train(model: OperatorModel, dataset, config: TrainConfig):
    """Train a model in place; returns (model, TrainHistory).

    Deterministic given the model's initial parameters, the dataset and the
    config.  FERN hat supports are projected onto [h_min, inf) after every
    optimizer step.
    """
    u, groups = _make_groups(dataset)
    if u.shape[1] != branch_input_dim(model):
        raise ValueError(
            f"dataset has {u.shape[1]} sensors but the branches expect "
            f"{branch_input_dim(model)} inputs"
        )
    n_samples = u.shape[0]
    params = get_flat_params(model)
    state = AdamState.zeros(params.size)
    sup = support_slice(model) if isinstance(model, FernModel) else None
    shuffle_rng = np.random.default_rng(config.seed)
    history = TrainHistory()

    for epoch in range(config.epochs):
        t_start = time.perf_counter()
        lr = cosine_lr(epoch, config.epochs, config.lr0, config.lr_min)
        if config.batch == "full" or config.batch >= n_samples:
            plan = [groups]
            weights = [1.0]
        else:
            perm = shuffle_rng.permutation(n_samples)
            chunks = [perm[i : i + config.batch] for i in range(0, n_samples, config.batch)]
            plan = [_restrict_groups(groups, chunk) for chunk in chunks]
            if config.loss == "mse":
                totals = [sum(g.rows.size * g.xs.size for g in p) for p in plan]
            else:
                totals = [sum(g.rows.size for g in p) for p in plan]
            weights = [t / sum(totals) for t in totals]
        epoch_loss = 0.0
        for sub_groups, weight in zip(plan, weights):
            loss, grads = _loss_and_grads(model, u, sub_groups, config.loss)
            if not np.isfinite(loss):
                raise TrainingError("non-finite training loss", epoch)
            _check_grad_blocks(model, grads, epoch)
            params, state = adam_step(params, grads_to_flat(model, grads), state, lr, config.adam)
            if sup is not None:
                params[sup] = np.maximum(params[sup], config.h_min)
            set_flat_params(model, params)
            epoch_loss += weight * loss
        history.loss.append(epoch_loss)
        history.lr.append(float(lr))
        history.wall_time.append(time.perf_counter() - t_start)

    loss_arr = np.asarray(history.loss)
    if loss_arr.size > 100 and np.any(loss_arr[100:] > loss_arr[:-100]):
        warnings.warn(
            "training loss increased over a 100-epoch window", RuntimeWarning, stacklevel=2
        )
    return model, history
