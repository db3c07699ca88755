"""Named end-to-end experiment configurations and the pipeline runner.

Each entry reproduces one benchmark setting at desk scale: generate train and
test datasets, build and train the model, evaluate, and (for FERN) dump the
basis diagnostics.  All seeds are pinned so a rerun is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import evalkit, pde_lab, trainer
from .artifacts import config_hash, dump_json
from .errors import SchemaError
from .operator_models import (
    FernModel,
    make_deeponet,
    make_fern,
    make_pod,
    model_to_payload,
    n_basis,
)
from .pod import SnapshotMatrix, compute_pod

__all__ = ["ExperimentConfig", "EXPERIMENTS", "run_experiment"]


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    pde_id: str
    n_basis: int
    model: str = "fern"  # fern | deeponet | pod
    dofs: int | None = None
    n_train: int = 42
    n_test: int = 100
    sensors: int = 22
    mesh: pde_lab.MeshPolicy = pde_lab.MeshPolicy("uniform", 100)
    data_seed: int = 0
    test_seed: int = 0
    model_seed: int = 42
    branch_activation: str = "tanh"
    branch_hidden: int = 20
    trunk_hidden_layers: int = 5
    trunk_activation: str = "tanh"
    hat_h0: float = 0.05
    epochs: int = 2000
    lr0: float = 1e-2
    lr_min: float = 0.0
    batch: int | str = "full"
    h_min: float = 1e-4
    loss: str = "mse"
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "pde": self.pde_id,
            "model": self.model,
            "n_basis": self.n_basis,
            "dofs": self.dofs,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "sensors": self.sensors,
            "mesh": self.mesh.to_json(),
            "data_seed": self.data_seed,
            "test_seed": self.test_seed,
            "model_seed": self.model_seed,
            "branch_activation": self.branch_activation,
            "branch_hidden": self.branch_hidden,
            "trunk_hidden_layers": self.trunk_hidden_layers,
            "trunk_activation": self.trunk_activation,
            "hat_h0": self.hat_h0,
            "epochs": self.epochs,
            "lr0": self.lr0,
            "lr_min": self.lr_min,
            "batch": self.batch,
            "h_min": self.h_min,
            "loss": self.loss,
            "notes": list(self.notes),
        }

    def train_config(self) -> trainer.TrainConfig:
        return trainer.TrainConfig(
            epochs=self.epochs,
            lr0=self.lr0,
            lr_min=self.lr_min,
            batch=self.batch,
            seed=self.model_seed,
            h_min=self.h_min,
            hat_h0=self.hat_h0,
            loss=self.loss,
        )


def _experiment_list():
    mesh = pde_lab.MeshPolicy
    configs = [
        # Phase-field family: 100 uniform output points, 22 sensors.
        ExperimentConfig("ac-1dof-fern40", "allen_cahn", 40, dofs=1, n_train=167,
                         n_test=190, data_seed=101, test_seed=201, lr0=3e-2),
        ExperimentConfig("ac-1dof-deeponet-l40", "allen_cahn", 40, model="deeponet", dofs=1,
                         n_train=167, n_test=190, data_seed=101, test_seed=201, lr0=3e-2,
                         trunk_hidden_layers=5, trunk_activation="tanh"),
        ExperimentConfig("ac-1dof-deeponet-s40", "allen_cahn", 40, model="deeponet", dofs=1,
                         n_train=167, n_test=190, data_seed=101, test_seed=201, lr0=3e-2,
                         trunk_hidden_layers=0, trunk_activation="relu"),
        ExperimentConfig("ac-1dof-pod40", "allen_cahn", 40, model="pod", dofs=1,
                         n_train=167, n_test=190, data_seed=101, test_seed=201, lr0=3e-2),
        ExperimentConfig("ac-2dof-fern80", "allen_cahn", 80, dofs=2, n_train=250,
                         n_test=100, data_seed=102, test_seed=202,
                         lr0=2e-2, lr_min=5e-3),
        ExperimentConfig("ac-2dof-deeponet80", "allen_cahn", 80, model="deeponet", dofs=2,
                         n_train=250, n_test=100, data_seed=102, test_seed=202,
                         lr0=2e-2, lr_min=5e-3,
                         branch_activation="relu", trunk_activation="relu"),
        ExperimentConfig("ac-2dof-pod80", "allen_cahn", 80, model="pod", dofs=2,
                         n_train=250, n_test=100, data_seed=102, test_seed=202,
                         lr0=2e-2, lr_min=5e-3),
        ExperimentConfig("ch-1dof-fern60", "cahn_hilliard", 60, dofs=1, n_train=250,
                         n_test=190, data_seed=103, test_seed=203, model_seed=0,
                         lr0=3e-2, lr_min=5e-3,
                         notes=("rectified-linear coefficient networks stall near 11% test "
                                "error with this trainer, so the bundled configuration uses "
                                "tanh branches",)),
        ExperimentConfig("ch-2dof-fern250", "cahn_hilliard", 250, dofs=2, n_train=1000,
                         n_test=100, data_seed=104, test_seed=204, model_seed=0,
                         lr0=3e-2, lr_min=5e-3),
        # Fokker-Planck: 64 output points, uniform and thirds (halves + full) grids.
        ExperimentConfig("fp-uniform-fern30", "fokker_planck", 30, n_train=42, n_test=100,
                         mesh=mesh("uniform", 64), data_seed=105, test_seed=205,
                         lr0=1e-2, lr_min=2e-3),
        ExperimentConfig("fp-uniform-fern10", "fokker_planck", 10, n_train=42, n_test=100,
                         mesh=mesh("uniform", 64), data_seed=105, test_seed=205,
                         lr0=1e-2, lr_min=2e-3),
        ExperimentConfig("fp-uniform-fern40", "fokker_planck", 40, n_train=42, n_test=100,
                         mesh=mesh("uniform", 64), data_seed=105, test_seed=205,
                         lr0=1e-2, lr_min=2e-3),
        ExperimentConfig("fp-thirds-fern30", "fokker_planck", 30, n_train=42, n_test=100,
                         mesh=mesh("thirds", 64), data_seed=105, test_seed=205,
                         model_seed=7, lr0=5e-3, lr_min=2e-3),
        ExperimentConfig("fp-thirds-fern10", "fokker_planck", 10, n_train=42, n_test=100,
                         mesh=mesh("thirds", 64), data_seed=105, test_seed=205,
                         model_seed=7, lr0=5e-3, lr_min=2e-3),
        ExperimentConfig("ad-fern40", "aggregation_diffusion", 40, n_train=42, n_test=100,
                         mesh=mesh("uniform", 64), data_seed=109, test_seed=209,
                         lr0=1e-2, lr_min=2e-3),
        ExperimentConfig("ad-fern20", "aggregation_diffusion", 20, n_train=42, n_test=100,
                         mesh=mesh("uniform", 64), data_seed=109, test_seed=209,
                         lr0=1e-2, lr_min=2e-3),
        ExperimentConfig("ks-fern40", "keller_segel", 40, n_train=42, n_test=100,
                         mesh=mesh("thirds", 49), data_seed=106, test_seed=206,
                         model_seed=0, branch_activation="relu",
                         lr0=8e-3, lr_min=2e-3, loss="relative_mse",
                         notes=("terminal states are near-singular aggregation spikes "
                                "(height ~58, width ~2e-3); the per-sample-normalized "
                                "loss and rectified-linear branches are required for the "
                                "coefficient scale (~3e3) to be reachable in 2000 epochs",)),
        ExperimentConfig("ks-fern60", "keller_segel", 60, n_train=42, n_test=100,
                         mesh=mesh("thirds", 49), data_seed=106, test_seed=206,
                         model_seed=0, branch_activation="relu",
                         lr0=8e-3, lr_min=2e-3, loss="relative_mse"),
        ExperimentConfig("kdv-fern80", "kdv", 80, n_train=250, n_test=100, sensors=64,
                         mesh=mesh("uniform", 64), data_seed=107, test_seed=207,
                         lr0=1e-2, lr_min=2e-3,
                         notes=("64 sensors make the coefficient-parameter total 105,600 "
                                "for 80 branches, the benchmark's parameter budget; a "
                                "100-sensor discretization would not match it",)),
        ExperimentConfig("burgers-fern40", "burgers", 40, n_train=84, n_test=100,
                         mesh=mesh("uniform", 64), data_seed=108, test_seed=208,
                         lr0=1e-2),
    ]
    return {c.name: c for c in configs}


EXPERIMENTS = _experiment_list()


def apply_seed_override(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """FERN_SEED smoke-test override: rebase all three seeds on one value."""
    return replace(config, data_seed=seed, test_seed=seed + 1, model_seed=seed + 2)


def build_model(config: ExperimentConfig, train_dataset):
    """Construct the (untrained) model an experiment asks for."""
    in_dim = train_dataset.sensor_grid.size
    if config.model == "fern":
        return make_fern(
            config.n_basis, in_dim, train_dataset.pde.domain, config.model_seed,
            h0=config.hat_h0, branch_activation=config.branch_activation,
            branch_hidden=config.branch_hidden,
        )
    if config.model == "deeponet":
        return make_deeponet(
            config.n_basis, in_dim, config.model_seed,
            trunk_hidden_layers=config.trunk_hidden_layers,
            branch_activation=config.branch_activation,
            trunk_activation=config.trunk_activation,
            branch_hidden=config.branch_hidden,
        )
    if config.model == "pod":
        if config.mesh.kind != "uniform":
            raise SchemaError(
                "the POD baseline needs every training output on one shared mesh "
                "(same-mesh requirement)"
            )
        grid = train_dataset.samples[0].x_out
        snaps = SnapshotMatrix(
            np.stack([s.v_out for s in train_dataset.samples], axis=1), grid
        )
        modes = compute_pod(snaps, config.n_basis)
        return make_pod(
            config.n_basis, in_dim, config.model_seed, grid, modes,
            branch_activation=config.branch_activation, branch_hidden=config.branch_hidden,
        )
    raise SchemaError(f"unknown model kind {config.model!r}")


def run_experiment(config: ExperimentConfig, outdir) -> dict:
    """Run gen -> train -> eval -> analyze for one named experiment.

    Writes dataset_train.json, dataset_test.json, model.json, history.csv,
    report.json, diagnostics.csv (FERN only) and the resolved config.json.
    Returns the report payload.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    resolved = config.to_json()
    chash = config_hash(resolved)
    dump_json({**resolved, "config_hash": chash}, outdir / "config.json")

    pde = pde_lab.pde_spec(config.pde_id)
    train_ds = pde_lab.generate_dataset(
        pde, config.n_train, config.dofs, config.sensors, config.mesh, config.data_seed
    )
    test_ds = pde_lab.generate_dataset(
        pde, config.n_test, config.dofs, config.sensors, config.mesh, config.test_seed
    )
    pde_lab.save_dataset(train_ds, outdir / "dataset_train.json", {"config_hash": chash})
    pde_lab.save_dataset(test_ds, outdir / "dataset_test.json", {"config_hash": chash})

    model = build_model(config, train_ds)
    model, history = trainer.train(model, train_ds, config.train_config())
    payload = model_to_payload(model, {"config_hash": chash, "seed": config.model_seed})
    dump_json(payload, outdir / "model.json")
    history.to_csv(outdir / "history.csv")

    report = evalkit.evaluate(model, test_ds, config=resolved)
    report_payload = {
        "schema_version": 1,
        "config_hash": chash,
        "seed": config.model_seed,
        "notes": list(config.notes),
        "effective_n_basis": n_basis(model),
        **report.to_json(),
    }
    dump_json(report_payload, outdir / "report.json")

    if isinstance(model, FernModel):
        diag = evalkit.basis_diagnostics(model.hat, train_ds.pde.domain, n_bins=10)
        diag.to_csv(outdir / "diagnostics.csv")
    return report_payload
