"""The three operator models: FERN, DeepONet and the POD baseline.

Every model is N independent coefficient ("branch") networks paired with a
basis provider: learnable hat functions (FERN), a trunk network evaluated at
the query points (DeepONet), or fixed orthonormal POD modes bound to one
output grid.  Prediction is the bilinear sum

    output(x_m) = sum_k branch_k(u_sensors) * phi_k(x_m).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import dense_nets, hat_basis
from .dense_nets import DenseNet, LayerSpec, count_params, net_backward, net_forward, net_init
from .errors import GridMismatchError, SchemaError
from .hat_basis import HatParams

__all__ = [
    "FernModel",
    "DeepONetModel",
    "PodModel",
    "ModelGrads",
    "predict",
    "model_grads",
    "model_param_count",
    "basis_values",
    "branch_outputs",
    "get_flat_params",
    "set_flat_params",
    "grads_to_flat",
    "make_fern",
    "make_deeponet",
    "make_pod",
    "save_model",
    "load_model",
]

SCHEMA_VERSION = 1
POD_ORTHO_TOL = 1e-10


def _check_branches(branches) -> list[DenseNet]:
    branches = list(branches)
    if not branches:
        raise ValueError("need at least one branch network")
    arch = branches[0].layers
    for net in branches:
        if net.layers != arch or net.out_dim != 1:
            raise ValueError("branches must share one architecture with scalar output")
    return branches


@dataclass
class FernModel:
    branches: list[DenseNet]
    hat: HatParams

    def __post_init__(self):
        self.branches = _check_branches(self.branches)
        if len(self.branches) != self.hat.n:
            raise ValueError("need exactly one branch network per hat function")


@dataclass
class DeepONetModel:
    branches: list[DenseNet]
    trunk: DenseNet

    def __post_init__(self):
        self.branches = _check_branches(self.branches)
        if self.trunk.in_dim != 1:
            raise ValueError("trunk input is the scalar evaluation point")
        if self.trunk.out_dim != len(self.branches):
            raise ValueError("trunk output dimension must equal the basis count")


@dataclass
class PodModel:
    branches: list[DenseNet]
    grid: np.ndarray
    modes: np.ndarray

    def __post_init__(self):
        self.branches = _check_branches(self.branches)
        self.grid = np.asarray(self.grid, dtype=float)
        self.modes = np.asarray(self.modes, dtype=float)
        if self.modes.shape != (self.grid.size, len(self.branches)):
            raise ValueError("modes must be (grid points x basis count)")
        gram = self.modes.T @ self.modes
        if np.max(np.abs(gram - np.eye(self.modes.shape[1]))) > POD_ORTHO_TOL:
            raise ValueError("POD modes must be orthonormal")


OperatorModel = FernModel | DeepONetModel | PodModel


def n_basis(model: OperatorModel) -> int:
    return len(model.branches)


def branch_input_dim(model: OperatorModel) -> int:
    return model.branches[0].in_dim


def basis_values(model: OperatorModel, xs):
    """Basis matrix Phi (M, N) at query points, plus the trunk tape when any.

    For a POD model ``xs`` must be exactly the bound grid.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if isinstance(model, FernModel):
        return hat_basis.basis_matrix(model.hat, xs), None
    if isinstance(model, DeepONetModel):
        phi, tape = net_forward(model.trunk, xs[:, None])
        return phi, tape
    if not np.array_equal(xs, model.grid):
        raise GridMismatchError(
            "POD prediction requires the exact output grid the modes were built on "
            "(same-mesh requirement)"
        )
    return model.modes, None


def branch_outputs(model: OperatorModel, u_hat):
    """Coefficient vector/matrix c (N,) or (S, N), plus per-branch tapes."""
    u_hat = np.asarray(u_hat, dtype=float)
    single = u_hat.ndim == 1
    if u_hat.shape[-1] != branch_input_dim(model):
        raise ValueError(
            f"sensor vector has {u_hat.shape[-1]} entries, branches expect "
            f"{branch_input_dim(model)}"
        )
    cols, tapes = [], []
    for net in model.branches:
        y, tape = net_forward(net, u_hat)
        cols.append(y[..., 0] if not single else y[0])
        tapes.append(tape)
    c = np.stack(cols, axis=-1)
    return c, tapes


def predict(model: OperatorModel, u_hat, xs) -> np.ndarray:
    """Predicted output values at ``xs`` for one discretized input function."""
    u_hat = np.asarray(u_hat, dtype=float)
    if u_hat.ndim != 1:
        raise ValueError("predict takes a single sensor vector; see branch_outputs for batches")
    phi, _ = basis_values(model, xs)
    c, _ = branch_outputs(model, u_hat)
    return phi @ c


@dataclass
class ModelGrads:
    """Gradient record matching a model's trainable blocks."""

    branch: list[np.ndarray]
    centers: np.ndarray | None = None
    supports: np.ndarray | None = None
    trunk: np.ndarray | None = None


def model_grads(model: OperatorModel, u_hat, xs, residual) -> ModelGrads:
    """Chain rule through the bilinear form for one sample.

    ``residual`` holds d(loss)/d(prediction) at each query point.  Branch k
    receives output gradient sum_m residual_m * phi_k(x_m); FERN hat
    gradients use the analytic hat subgradients, DeepONet routes the
    per-point gradient residual_m * c_k through the trunk.
    """
    u_hat = np.asarray(u_hat, dtype=float)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    residual = np.atleast_1d(np.asarray(residual, dtype=float))
    if residual.shape != xs.shape:
        raise ValueError("residual must have one entry per query point")
    phi, trunk_tape = basis_values(model, xs)
    c, tapes = branch_outputs(model, u_hat)
    g_c = residual @ phi  # (N,)
    branch_grads = []
    for k, net in enumerate(model.branches):
        gp, _ = net_backward(net, tapes[k], np.array([g_c[k]]))
        branch_grads.append(gp)
    if isinstance(model, FernModel):
        d_da, d_dh = hat_basis.basis_matrix_grads(model.hat, xs)
        weighted = residual[:, None] * c[None, :]
        return ModelGrads(
            branch_grads,
            centers=np.sum(weighted * d_da, axis=0),
            supports=np.sum(weighted * d_dh, axis=0),
        )
    if isinstance(model, DeepONetModel):
        g_phi = residual[:, None] * c[None, :]
        g_trunk, _ = net_backward(model.trunk, trunk_tape, g_phi)
        return ModelGrads(branch_grads, trunk=g_trunk)
    return ModelGrads(branch_grads)


def model_param_count(model: OperatorModel) -> dict:
    """Coefficient/basis/total trainable-parameter breakdown."""
    coefficient = sum(count_params(net) for net in model.branches)
    if isinstance(model, FernModel):
        basis = 2 * model.hat.n
    elif isinstance(model, DeepONetModel):
        basis = count_params(model.trunk)
    else:
        basis = 0
    return {"coefficient": coefficient, "basis": basis, "total": coefficient + basis}


# --- flat parameter vector (branches in order, then basis block) ---


def get_flat_params(model: OperatorModel) -> np.ndarray:
    chunks = [net.params for net in model.branches]
    if isinstance(model, FernModel):
        chunks += [model.hat.centers, model.hat.supports]
    elif isinstance(model, DeepONetModel):
        chunks.append(model.trunk.params)
    return np.concatenate(chunks)


def set_flat_params(model: OperatorModel, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=float)
    offset = 0
    for net in model.branches:
        n = net.params.size
        net.params = flat[offset : offset + n].copy()
        offset += n
    if isinstance(model, FernModel):
        n = model.hat.n
        model.hat.centers = flat[offset : offset + n].copy()
        model.hat.supports = flat[offset + n : offset + 2 * n].copy()
        offset += 2 * n
    elif isinstance(model, DeepONetModel):
        n = model.trunk.params.size
        model.trunk.params = flat[offset : offset + n].copy()
        offset += n
    if offset != flat.size:
        raise ValueError(f"flat vector has {flat.size} entries, model needs {offset}")


def grads_to_flat(model: OperatorModel, grads: ModelGrads) -> np.ndarray:
    chunks = list(grads.branch)
    if isinstance(model, FernModel):
        chunks += [grads.centers, grads.supports]
    elif isinstance(model, DeepONetModel):
        chunks.append(grads.trunk)
    return np.concatenate(chunks)


def support_slice(model: FernModel) -> slice:
    """Location of the hat supports inside the flat parameter vector."""
    n_branch = sum(net.params.size for net in model.branches)
    n = model.hat.n
    return slice(n_branch + n, n_branch + 2 * n)


# --- factories ---


def make_branches(n: int, in_dim: int, activation: str, seed: int, hidden: int = 20):
    layers = dense_nets.branch_layers(in_dim, hidden)
    seeds = np.random.SeedSequence(seed).spawn(n)
    return [net_init(layers, activation, s) for s in seeds]


def uniform_hat_init(n: int, domain, h0: float = 0.05) -> HatParams:
    """Centers uniformly spaced across the domain, all supports at ``h0``."""
    lo, hi = float(domain[0]), float(domain[1])
    centers = np.array([(lo + hi) / 2.0]) if n == 1 else np.linspace(lo, hi, n)
    return HatParams(centers, np.full(n, h0))


def make_fern(
    n: int,
    in_dim: int,
    domain,
    seed: int,
    h0: float = 0.05,
    branch_activation: str = "tanh",
    branch_hidden: int = 20,
) -> FernModel:
    return FernModel(
        make_branches(n, in_dim, branch_activation, seed, branch_hidden),
        uniform_hat_init(n, domain, h0),
    )


def make_deeponet(
    n: int,
    in_dim: int,
    seed: int,
    trunk_hidden_layers: int = 5,
    branch_activation: str = "tanh",
    trunk_activation: str = "tanh",
    branch_hidden: int = 20,
    trunk_width: int = 100,
) -> DeepONetModel:
    branches = make_branches(n, in_dim, branch_activation, seed, branch_hidden)
    trunk = net_init(
        dense_nets.trunk_layers(n, trunk_hidden_layers, trunk_width),
        trunk_activation,
        np.random.SeedSequence(seed).spawn(n + 1)[-1],
    )
    return DeepONetModel(branches, trunk)


def make_pod(
    n: int,
    in_dim: int,
    seed: int,
    grid,
    modes,
    branch_activation: str = "tanh",
    branch_hidden: int = 20,
) -> PodModel:
    modes = np.asarray(modes, dtype=float)
    if modes.shape[1] != n:
        raise ValueError("mode count must match the requested basis count")
    return PodModel(make_branches(n, in_dim, branch_activation, seed, branch_hidden), grid, modes)


# --- model bundle files ---


def _arch_payload(net: DenseNet) -> dict:
    return {
        "layers": [[s.in_dim, s.out_dim, s.has_bias] for s in net.layers],
        "activation": net.activation,
    }


def _arch_from_payload(payload: dict, params) -> DenseNet:
    layers = tuple(LayerSpec(int(i), int(o), bool(b)) for i, o, b in payload["layers"])
    return DenseNet(layers, payload["activation"], np.array(params, dtype=float))


def model_to_payload(model: OperatorModel, extra: dict | None = None) -> dict:
    if isinstance(model, FernModel):
        kind = "fern"
        basis = {
            "centers": model.hat.centers.tolist(),
            "supports": model.hat.supports.tolist(),
        }
    elif isinstance(model, DeepONetModel):
        kind = "deeponet"
        basis = {
            "trunk_arch": _arch_payload(model.trunk),
            "trunk_params": model.trunk.params.tolist(),
        }
    else:
        kind = "pod"
        basis = {"grid": model.grid.tolist(), "modes": model.modes.tolist()}
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "N": n_basis(model),
        "branch_arch": _arch_payload(model.branches[0]),
        "branch_params": [net.params.tolist() for net in model.branches],
        "basis": basis,
    }
    if extra:
        payload.update(extra)
    return payload


def model_from_payload(payload: dict) -> OperatorModel:
    for key in ("schema_version", "kind", "N", "branch_arch", "branch_params", "basis"):
        if key not in payload:
            raise SchemaError(f"model bundle missing field {key!r}")
    if len(payload["branch_params"]) != payload["N"]:
        raise SchemaError("model bundle branch_params length does not match N")
    branches = [
        _arch_from_payload(payload["branch_arch"], p) for p in payload["branch_params"]
    ]
    kind = payload["kind"]
    basis = payload["basis"]
    if kind == "fern":
        return FernModel(branches, HatParams(basis["centers"], basis["supports"]))
    if kind == "deeponet":
        return DeepONetModel(branches, _arch_from_payload(basis["trunk_arch"], basis["trunk_params"]))
    if kind == "pod":
        return PodModel(branches, basis["grid"], basis["modes"])
    raise SchemaError(f"unknown model kind {kind!r}")


def save_model(model: OperatorModel, path, extra: dict | None = None) -> None:
    with open(path, "w") as f:
        json.dump(model_to_payload(model, extra), f)


def load_model(path) -> OperatorModel:
    with open(path) as f:
        return model_from_payload(json.load(f))
