"""Evaluation statistics and basis-adaptivity diagnostics.

Errors are relative L2 norms on each sample's own output grid; reports carry
the full per-sample list so the mean and population standard deviation can
always be recomputed.  Diagnostics histogram the learned hat centers over
uniform bins and average the support width per bin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hat_basis import HatParams
from .operator_models import (
    FernModel,
    OperatorModel,
    make_fern,
    model_param_count,
    predict,
)
from .trainer import TrainConfig, train

__all__ = [
    "EvalReport",
    "BasisDiagnostics",
    "SweepResult",
    "relative_l2",
    "evaluate",
    "basis_diagnostics",
    "sweep_basis_count",
]


def relative_l2(pred, truth) -> float:
    """||pred - truth||_2 / ||truth||_2 on one sample's grid."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth must have the same length")
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise ValueError("truth has zero norm; relative error undefined")
    return float(np.linalg.norm(pred - truth) / denom)


@dataclass
class EvalReport:
    per_sample: list
    mean: float
    std: float
    param_counts: dict
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_sample_errors": list(self.per_sample),
            "mean": self.mean,
            "std": self.std,
            "param_counts": dict(self.param_counts),
            "config": dict(self.config),
        }


def evaluate(model: OperatorModel, dataset, config: dict | None = None) -> EvalReport:
    """Relative L2 error of the model on every sample of a dataset."""
    errors = [
        relative_l2(predict(model, s.u_sensors, s.x_out), s.v_out) for s in dataset.samples
    ]
    arr = np.asarray(errors)
    return EvalReport(
        per_sample=errors,
        mean=float(arr.mean()),
        std=float(arr.std()),  # population std over test samples
        param_counts=model_param_count(model),
        config=config or {},
    )


@dataclass
class BasisDiagnostics:
    bin_edges: np.ndarray
    center_counts: np.ndarray
    mean_support: list  # per bin; None where the bin is empty
    overflow: int  # centers outside the domain
    centers: np.ndarray
    supports: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("bin_lo,bin_hi,count,mean_support\n")
            for i in range(self.center_counts.size):
                ms = self.mean_support[i]
                f.write(
                    f"{float(self.bin_edges[i])!r},{float(self.bin_edges[i + 1])!r},"
                    f"{int(self.center_counts[i])},{'' if ms is None else repr(float(ms))}\n"
                )


def basis_diagnostics(hat: HatParams, domain, n_bins: int = 10) -> BasisDiagnostics:
    """Histogram the hat centers over uniform bins with per-bin mean support."""
    if n_bins < 1:
        raise ValueError("need at least one bin")
    lo, hi = float(domain[0]), float(domain[1])
    edges = np.linspace(lo, hi, n_bins + 1)
    width = (hi - lo) / n_bins
    counts = np.zeros(n_bins, dtype=int)
    sums = np.zeros(n_bins)
    overflow = 0
    for a, h in zip(hat.centers, hat.supports):
        if a < lo or a > hi:
            overflow += 1
            continue
        b = min(int((a - lo) / width), n_bins - 1)
        counts[b] += 1
        sums[b] += h
    mean_support = [
        (sums[i] / counts[i]) if counts[i] else None for i in range(n_bins)
    ]
    return BasisDiagnostics(edges, counts, mean_support, overflow, hat.centers.copy(), hat.supports.copy())


@dataclass
class SweepResult:
    rows: list  # (N, mean error, std) triples, ascending in N
    slope: float

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("N,mean_err,std_err\n")
            for n, mean, std in self.rows:
                f.write(f"{int(n)},{float(mean)!r},{float(std)!r}\n")


def sweep_basis_count(
    train_dataset,
    test_dataset,
    ns,
    config: TrainConfig,
    model_seed: int = 0,
    branch_activation: str = "tanh",
    branch_hidden: int = 20,
) -> SweepResult:
    """Train one FERN per basis count and fit a log-log error-decay slope.

    Every run shares the seed, datasets and training config; only N varies.
    """
    ns = list(ns)
    if len(ns) < 2 or any(n < 2 for n in ns) or any(b <= a for a, b in zip(ns[:-1], ns[1:])):
        raise ValueError("need an ascending list of at least two basis counts >= 2")
    in_dim = train_dataset.sensor_grid.size
    rows = []
    for n in ns:
        model = make_fern(
            n,
            in_dim,
            train_dataset.pde.domain,
            model_seed,
            h0=config.hat_h0,
            branch_activation=branch_activation,
            branch_hidden=branch_hidden,
        )
        train(model, train_dataset, config)
        report = evaluate(model, test_dataset)
        rows.append((n, report.mean, report.std))
    log_n = np.log([r[0] for r in rows])
    log_e = np.log([r[1] for r in rows])
    slope = float(np.polyfit(log_n, log_e, 1)[0])
    return SweepResult(rows, slope)
