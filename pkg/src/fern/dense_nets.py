"""Small fully-connected networks with hand-written forward/backward passes.

Shapes are tiny and fixed per experiment, so reverse-mode differentiation is
spelled out directly instead of pulling in an autodiff framework.  Parameters
live in one flat float64 vector per net (per layer: weight entries row-major,
then the bias when present), which keeps optimizer state and checkpointing
trivial.

Conventions: the activation follows every layer except the last (the last
layer is linear), and relu'(0) = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

__all__ = [
    "LayerSpec",
    "DenseNet",
    "Tape",
    "count_params",
    "net_init",
    "net_forward",
    "net_backward",
    "branch_layers",
    "trunk_layers",
    "save_net",
    "load_net",
]

ACTIVATIONS = ("tanh", "relu")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    has_bias: bool = True

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")

    @property
    def n_params(self) -> int:
        return self.in_dim * self.out_dim + (self.out_dim if self.has_bias else 0)


@dataclass
class DenseNet:
    """An ordered stack of affine layers with one activation for the whole net."""

    layers: tuple[LayerSpec, ...]
    activation: str
    params: np.ndarray

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if not self.layers:
            raise ValueError("need at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(f"layer dims do not chain: {prev} -> {nxt}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (count_params(self.layers),):
            raise ValueError(
                f"params must be a flat vector of length {count_params(self.layers)}, "
                f"got shape {self.params.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def weight_views(self):
        """Per-layer (W, b) views into the flat parameter vector (b may be None)."""
        views = []
        offset = 0
        for spec in self.layers:
            w = self.params[offset : offset + spec.in_dim * spec.out_dim].reshape(
                spec.in_dim, spec.out_dim
            )
            offset += spec.in_dim * spec.out_dim
            b = None
            if spec.has_bias:
                b = self.params[offset : offset + spec.out_dim]
                offset += spec.out_dim
            views.append((w, b))
        return views

    def copy(self) -> "DenseNet":
        return DenseNet(self.layers, self.activation, self.params.copy())


@dataclass
class Tape:
    """Forward-pass record: the input to each layer plus every layer output."""

    inputs: list
    outputs: list
    squeeze: bool


def count_params(net_or_layers) -> int:
    """Exact trainable-parameter count of a net or layer list."""
    layers = net_or_layers.layers if isinstance(net_or_layers, DenseNet) else net_or_layers
    return sum(spec.n_params for spec in layers)


def branch_layers(in_dim: int, hidden: int = 20) -> tuple[LayerSpec, ...]:
    """Coefficient-network shape: in_dim x hidden (bias) -> hidden x 1 (no bias)."""
    return (LayerSpec(in_dim, hidden, True), LayerSpec(hidden, 1, False))


def trunk_layers(n_basis: int, hidden_layers: int = 5, width: int = 100) -> tuple[LayerSpec, ...]:
    """Trunk shape: 1 x width, `hidden_layers` inner width x width blocks, width x N.

    ``hidden_layers=5`` gives the deep 7-layer trunk; ``hidden_layers=0`` the
    shallow 2-layer one.  Biases everywhere except the final layer.
    """
    if hidden_layers < 0:
        raise ValueError("hidden_layers must be >= 0")
    specs = [LayerSpec(1, width, True)]
    specs += [LayerSpec(width, width, True) for _ in range(hidden_layers)]
    specs.append(LayerSpec(width, n_basis, False))
    return tuple(specs)


def net_init(layers, activation: str, seed: int, scheme: str = "uniform_fan_in") -> DenseNet:
    """Deterministically initialize a net.

    The default scheme draws every weight and bias of a layer from
    uniform(-sqrt(1/in_dim), +sqrt(1/in_dim)).
    """
    if scheme != "uniform_fan_in":
        raise ValueError(f"unknown init scheme: {scheme!r}")
    layers = tuple(layers)
    rng = np.random.default_rng(seed)
    chunks = []
    for spec in layers:
        bound = np.sqrt(1.0 / spec.in_dim)
        chunks.append(rng.uniform(-bound, bound, size=spec.in_dim * spec.out_dim))
        if spec.has_bias:
            chunks.append(rng.uniform(-bound, bound, size=spec.out_dim))
    return DenseNet(layers, activation, np.concatenate(chunks))


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _act_deriv_from_output(a: np.ndarray, activation: str) -> np.ndarray:
    # tanh' = 1 - tanh^2; relu' recovered from the output with relu'(0) = 0.
    if activation == "tanh":
        return 1.0 - a * a
    return (a > 0.0).astype(float)


def net_forward(net: DenseNet, x) -> tuple[np.ndarray, Tape]:
    """Run the net on a single input vector (in_dim,) or a batch (B, in_dim).

    Returns the output (out_dim,) or (B, out_dim) and a tape for backward.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ValueError(f"input must have {net.in_dim} features, got shape {x.shape}")
    inputs, outputs = [], []
    a = x
    views = net.weight_views()
    last = len(views) - 1
    for i, (w, b) in enumerate(views):
        inputs.append(a)
        z = a @ w
        if b is not None:
            z = z + b
        a = z if i == last else _act(z, net.activation)
        outputs.append(a)
    tape = Tape(inputs, outputs, squeeze)
    return (a[0] if squeeze else a), tape


def net_backward(net: DenseNet, tape: Tape, output_grad) -> tuple[np.ndarray, np.ndarray]:
    """Exact reverse-mode gradients for a recorded forward pass.

    ``output_grad`` is d(loss)/d(output) with the output's shape; for a batch
    the parameter gradient is summed over the batch rows.

    Returns (param_grad flat vector, input_grad with the input's shape).
    """
    g = np.asarray(output_grad, dtype=float)
    if tape.squeeze:
        g = g[None, :]
    if len(tape.inputs) != len(net.layers):
        raise ValueError("tape does not match this net")
    if g.shape != tape.outputs[-1].shape:
        raise ValueError(
            f"output_grad shape {g.shape} does not match forward output "
            f"{tape.outputs[-1].shape}"
        )
    views = net.weight_views()
    grad_chunks = [None] * len(views)
    last = len(views) - 1
    for i in range(last, -1, -1):
        w, b = views[i]
        gz = g if i == last else g * _act_deriv_from_output(tape.outputs[i], net.activation)
        gw = tape.inputs[i].T @ gz
        pieces = [gw.ravel()]
        if b is not None:
            pieces.append(gz.sum(axis=0))
        grad_chunks[i] = np.concatenate(pieces)
        g = gz @ w.T
    param_grad = np.concatenate(grad_chunks)
    input_grad = g[0] if tape.squeeze else g
    return param_grad, input_grad


def save_net(net: DenseNet, path) -> None:
    """Write a checkpoint that round-trips the parameter vector bit-exactly."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "architecture": [[s.in_dim, s.out_dim, s.has_bias] for s in net.layers],
        "activation": net.activation,
        "params": net.params.tolist(),
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_net(path) -> DenseNet:
    with open(path) as f:
        payload = json.load(f)
    for key in ("schema_version", "architecture", "activation", "params"):
        if key not in payload:
            raise SchemaError(f"net checkpoint missing field {key!r}")
    layers = tuple(LayerSpec(int(i), int(o), bool(b)) for i, o, b in payload["architecture"])
    return DenseNet(layers, payload["activation"], np.array(payload["params"], dtype=float))
