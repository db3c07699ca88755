"""Benchmark dataset generation: sample initial conditions, solve, discretize.

Each dataset maps discretized initial conditions (values at uniformly spaced
sensors) to terminal-time solution values on per-sample output grids.  Mesh
policies:

* ``uniform(M)`` -- every sample shares one grid of M uniformly spaced points.
* ``thirds(M)``  -- the sample list is split in three consecutive blocks, each
  evaluated on M points covering only part of the domain (the equation's
  sub-interval pattern), which rules out the fixed-grid POD baseline.

Generation is deterministic: initial-condition parameters come from
per-sample child streams of the root seed, so the same call always produces
byte-identical dataset files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import SchemaError, SolverError
from . import solvers
from .solvers import SolverMeta, cell_mass, default_meta, refined_meta, solver_grid

__all__ = [
    "PDE_IDS",
    "PdeSpec",
    "MeshPolicy",
    "OperatorSample",
    "OperatorDataset",
    "pde_spec",
    "ic_function",
    "sample_ic",
    "solve_pde",
    "generate_dataset",
    "sensor_points",
    "dataset_to_payload",
    "dataset_from_payload",
    "save_dataset",
    "load_dataset",
    "SolverMeta",
    "default_meta",
    "refined_meta",
    "solver_grid",
    "cell_mass",
]

SCHEMA_VERSION = 1

PDE_IDS = (
    "allen_cahn",
    "cahn_hilliard",
    "fokker_planck",
    "aggregation_diffusion",
    "keller_segel",
    "kdv",
    "burgers",
)

_DEFAULT_CONSTANTS = {
    "allen_cahn": {"eps": 0.01},
    "cahn_hilliard": {"mobility": 0.01, "eps": 0.01},
    "fokker_planck": {},
    "aggregation_diffusion": {"diffusion": 0.4, "m": 2.0, "sigma": 1.0, "ic_x0": 2.0},
    "keller_segel": {"diffusion": 0.01, "chi": 5.0},
    "kdv": {"eps": 0.01, "ic_c2": 0.5, "ic_k1": 8.0, "ic_k2": 8.0, "ic_x1": 0.5, "ic_x2": 1.0},
    "burgers": {"nu": 0.01},
}

_DEFAULT_DOMAIN = {
    "allen_cahn": (0.0, 1.0),
    "cahn_hilliard": (0.0, 1.0),
    "fokker_planck": (0.0, 1.0),
    "aggregation_diffusion": (-6.0, 6.0),
    "keller_segel": (0.0, 1.0),
    "kdv": (0.0, 2.0),
    "burgers": (0.0, 1.0),
}

_DEFAULT_T_FINAL = {
    "allen_cahn": 10.0,
    "cahn_hilliard": 10.0,
    "fokker_planck": 0.1,
    "aggregation_diffusion": 200.0,
    "keller_segel": 1.0,
    "kdv": 2.0,
    "burgers": 1.0,
}

_DEFAULT_DOFS = {
    "allen_cahn": 1,
    "cahn_hilliard": 1,
    "fokker_planck": 2,
    "aggregation_diffusion": 1,
    "keller_segel": 1,
    "kdv": 1,
    "burgers": 2,
}


@dataclass(frozen=True)
class PdeSpec:
    """One benchmark equation: id, domain, horizon and physical constants."""

    id: str
    domain: tuple[float, float]
    t_final: float
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in PDE_IDS:
            raise ValueError(f"unknown pde id {self.id!r}; choose from {PDE_IDS}")
        if not self.domain[0] < self.domain[1]:
            raise ValueError("domain must satisfy x_lo < x_hi")
        if self.t_final <= 0.0:
            raise ValueError("t_final must be positive")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "domain": list(self.domain),
            "t_final": self.t_final,
            "constants": dict(self.constants),
        }

    @staticmethod
    def from_json(payload: dict) -> "PdeSpec":
        return PdeSpec(
            payload["id"],
            (float(payload["domain"][0]), float(payload["domain"][1])),
            float(payload["t_final"]),
            dict(payload["constants"]),
        )


def pde_spec(pde_id: str, t_final: float | None = None, **constant_overrides) -> PdeSpec:
    """Build a PdeSpec with the benchmark defaults, optionally overridden."""
    if pde_id not in PDE_IDS:
        raise ValueError(f"unknown pde id {pde_id!r}; choose from {PDE_IDS}")
    constants = dict(_DEFAULT_CONSTANTS[pde_id])
    for key, value in constant_overrides.items():
        if key not in constants:
            raise ValueError(f"{pde_id} has no constant {key!r}")
        constants[key] = float(value)
    return PdeSpec(
        pde_id,
        _DEFAULT_DOMAIN[pde_id],
        _DEFAULT_T_FINAL[pde_id] if t_final is None else float(t_final),
        constants,
    )


def default_dofs(pde_id: str) -> int:
    return _DEFAULT_DOFS[pde_id]


# --- initial conditions ---


def ic_function(pde: PdeSpec, params: dict):
    """Initial-condition callable for explicit parameter values."""
    c = pde.constants
    if pde.id in ("allen_cahn", "cahn_hilliard"):
        lam, mu = params["lambda"], params["mu"]
        return lambda x: lam * np.sin(2.0 * np.pi * x) + (1.0 - lam) * np.sin(
            6.0 * np.pi * (x - 0.5 + mu)
        )
    if pde.id == "fokker_planck":
        c0, c1 = params["c0"], params["c1"]
        return lambda x: c1 * np.exp(-100.0 * (x - c0) ** 2) + 1e-3
    if pde.id == "aggregation_diffusion":
        scale = params["c0"] / (2.0 * np.sqrt(2.0 * np.pi))
        x0 = c["ic_x0"]
        return lambda x: scale * (
            np.exp(-((x - x0) ** 2) / 2.0) + np.exp(-((x + x0) ** 2) / 2.0)
        )
    if pde.id == "keller_segel":
        c0 = params["c0"]
        return lambda x: 1.0 + c0 * np.sin(2.0 * np.pi * (x - 0.25))
    if pde.id == "kdv":
        c1 = params["c1"]
        c2, k1, k2, x1, x2 = c["ic_c2"], c["ic_k1"], c["ic_k2"], c["ic_x1"], c["ic_x2"]
        return lambda x: (
            3.0 * c1 / np.cosh(k1 * (x - x1)) ** 2 + 3.0 * c2 / np.cosh(k2 * (x - x2)) ** 2
        )
    if pde.id == "burgers":
        c0, c1 = params["c0"], params["c1"]
        return lambda x: c1 * np.sin(2.0 * np.pi * (x - c0)) + 0.5
    raise ValueError(f"unknown pde id {pde.id!r}")


def sample_ic(pde: PdeSpec, dofs: int | None, rng: np.random.Generator):
    """Draw one initial condition; returns (params dict, u0 callable).

    ``dofs`` selects the 1- or 2-parameter family for the two phase-field
    equations; every other equation has a fixed parameterization.
    """
    if dofs is None:
        dofs = default_dofs(pde.id)
    if pde.id in ("allen_cahn", "cahn_hilliard"):
        if dofs not in (1, 2):
            raise ValueError(f"{pde.id} supports dofs 1 or 2, got {dofs}")
        params = {"lambda": rng.uniform(0.0, 1.0)}
        params["mu"] = 0.5 if dofs == 1 else rng.uniform(0.0, 1.0)
    elif dofs != default_dofs(pde.id):
        raise ValueError(f"{pde.id} has a fixed {default_dofs(pde.id)}-parameter family")
    elif pde.id == "fokker_planck":
        params = {"c0": rng.uniform(0.3, 0.7), "c1": rng.uniform(1.0, 10.0)}
    elif pde.id == "aggregation_diffusion":
        params = {"c0": rng.uniform(1.0, 5.0)}
    elif pde.id == "keller_segel":
        params = {"c0": rng.uniform(0.2, 0.8)}
    elif pde.id == "kdv":
        params = {"c1": rng.uniform(0.0, 1.0)}
    else:
        params = {"c0": rng.uniform(0.0, 0.5), "c1": rng.uniform(0.5, 1.0)}
    return params, ic_function(pde, params)


def solve_pde(pde: PdeSpec, u0_grid: np.ndarray, meta: SolverMeta, callback=None) -> np.ndarray:
    """Advance initial values on the solver grid to the terminal time."""
    return solvers.solve(pde.id, pde.constants, pde.domain, pde.t_final, u0_grid, meta, callback)


# --- mesh policies and discretization ---


@dataclass(frozen=True)
class MeshPolicy:
    """Output-grid policy: kind 'uniform' or 'thirds', with m points per sample."""

    kind: str
    m: int

    def __post_init__(self):
        if self.kind not in ("uniform", "thirds"):
            raise ValueError("mesh policy kind must be 'uniform' or 'thirds'")
        if self.m < 2:
            raise ValueError("each output grid needs at least 2 points")

    def to_json(self) -> dict:
        return {"kind": self.kind, "m": self.m}

    @staticmethod
    def from_json(payload: dict) -> "MeshPolicy":
        return MeshPolicy(payload["kind"], int(payload["m"]))

    @staticmethod
    def parse(text: str) -> "MeshPolicy":
        """Parse the CLI form 'uniform:M' / 'thirds:M'."""
        try:
            kind, m = text.split(":")
            return MeshPolicy(kind, int(m))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"cannot parse mesh policy {text!r} (want kind:M)") from exc


def thirds_intervals(pde: PdeSpec) -> list[tuple[float, float]]:
    """Sub-intervals for the thirds policy: sample block b gets intervals[b].

    The Fokker-Planck benchmark splits the samples between the two halves and
    the full domain; everything else uses the three disjoint thirds.
    """
    lo, hi = pde.domain
    if pde.id == "fokker_planck":
        mid = lo + 0.5 * (hi - lo)
        return [(lo, mid), (mid, hi), (lo, hi)]
    third = (hi - lo) / 3.0
    return [(lo, lo + third), (lo + third, lo + 2.0 * third), (lo + 2.0 * third, hi)]


def output_grids(pde: PdeSpec, policy: MeshPolicy, n_samples: int) -> list[np.ndarray]:
    """Per-sample output grids under the policy (shared array when uniform)."""
    lo, hi = pde.domain
    if policy.kind == "uniform":
        grid = np.linspace(lo, hi, policy.m)
        return [grid] * n_samples
    intervals = thirds_intervals(pde)
    grids = [np.linspace(a, b, policy.m) for a, b in intervals]
    return [grids[min(2, (3 * i) // n_samples)] for i in range(n_samples)]


def sensor_points(pde: PdeSpec, m: int) -> np.ndarray:
    """m uniformly spaced sensors including both domain endpoints."""
    if m < 2:
        raise ValueError("need at least 2 sensors")
    return np.linspace(pde.domain[0], pde.domain[1], m)


def interpolate_to(pde_id: str, domain, x_solver: np.ndarray, u: np.ndarray, x_out: np.ndarray) -> np.ndarray:
    """Cubic interpolation from the solver grid to an output grid (columnwise)."""
    if pde_id in ("kdv", "burgers"):
        x_ext = np.append(x_solver, domain[1])
        u_ext = np.concatenate([u, u[:1]], axis=0)
        spline = CubicSpline(x_ext, u_ext, axis=0, bc_type="periodic")
    else:
        spline = CubicSpline(x_solver, u, axis=0)
    return spline(x_out)


# --- datasets ---


@dataclass
class OperatorSample:
    ic_params: dict
    u_sensors: np.ndarray
    x_out: np.ndarray
    v_out: np.ndarray

    def __post_init__(self):
        self.u_sensors = np.asarray(self.u_sensors, dtype=float)
        self.x_out = np.asarray(self.x_out, dtype=float)
        self.v_out = np.asarray(self.v_out, dtype=float)
        if self.x_out.shape != self.v_out.shape:
            raise ValueError("x_out and v_out must have matching lengths")
        if np.any(np.diff(self.x_out) <= 0.0):
            raise ValueError("x_out must be strictly increasing")


@dataclass
class OperatorDataset:
    pde: PdeSpec
    dofs: int
    sensor_grid: np.ndarray
    samples: list
    seed: int
    solver_meta: SolverMeta
    mesh_policy: MeshPolicy

    def __post_init__(self):
        self.sensor_grid = np.asarray(self.sensor_grid, dtype=float)
        for s in self.samples:
            if s.u_sensors.shape != self.sensor_grid.shape:
                raise ValueError("sample sensor values do not match the sensor grid")

    @property
    def n_samples(self) -> int:
        return len(self.samples)


def generate_dataset(
    pde: PdeSpec,
    n_samples: int,
    dofs: int | None,
    sensor_count: int,
    mesh_policy: MeshPolicy,
    seed: int,
    solver_meta: SolverMeta | None = None,
) -> OperatorDataset:
    """Sample ICs, solve every sample to the terminal time, and discretize.

    Deterministic in (pde, n_samples, dofs, sensor_count, mesh_policy, seed):
    sample i draws its parameters from child stream i of the root seed.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if dofs is None:
        dofs = default_dofs(pde.id)
    meta = default_meta(pde.id) if solver_meta is None else solver_meta
    sensors = sensor_points(pde, sensor_count)
    x_solver = solver_grid(pde.id, pde.domain, meta.n_cells)
    grids = output_grids(pde, mesh_policy, n_samples)

    streams = np.random.SeedSequence(seed).spawn(n_samples)
    params_list, u0_cols, sensor_rows = [], [], []
    for stream in streams:
        params, u0 = sample_ic(pde, dofs, np.random.default_rng(stream))
        params_list.append(params)
        u0_cols.append(u0(x_solver))
        sensor_rows.append(u0(sensors))

    u0_batch = np.stack(u0_cols, axis=1)
    try:
        terminal = solve_pde(pde, u0_batch, meta)
    except SolverError as exc:
        raise SolverError(f"dataset generation failed: {exc.message}", exc.t, exc.column) from exc

    samples = []
    for i in range(n_samples):
        v_out = interpolate_to(pde.id, pde.domain, x_solver, terminal[:, i], grids[i])
        samples.append(OperatorSample(params_list[i], sensor_rows[i], grids[i], v_out))
    return OperatorDataset(pde, dofs, sensors, samples, seed, meta, mesh_policy)


# --- JSON files ---


def dataset_to_payload(dataset: OperatorDataset, extra: dict | None = None) -> dict:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "pde": dataset.pde.id,
        "constants": {
            **dataset.pde.to_json()["constants"],
            "domain": list(dataset.pde.domain),
            "t_final": dataset.pde.t_final,
        },
        "dofs": dataset.dofs,
        "seed": dataset.seed,
        "sensor_grid": dataset.sensor_grid.tolist(),
        "mesh_policy": dataset.mesh_policy.to_json(),
        "solver_meta": dataset.solver_meta.to_json(),
        "samples": [
            {
                "ic_params": s.ic_params,
                "u_sensors": s.u_sensors.tolist(),
                "x_out": s.x_out.tolist(),
                "v_out": s.v_out.tolist(),
            }
            for s in dataset.samples
        ],
    }
    if extra:
        payload.update(extra)
    return payload


def dataset_from_payload(payload: dict) -> OperatorDataset:
    for key in ("schema_version", "pde", "constants", "seed", "sensor_grid", "solver_meta", "samples"):
        if key not in payload:
            raise SchemaError(f"dataset missing field {key!r}")
    constants = dict(payload["constants"])
    domain = tuple(constants.pop("domain"))
    t_final = constants.pop("t_final")
    pde = PdeSpec(payload["pde"], domain, t_final, constants)
    samples = [
        OperatorSample(s["ic_params"], s["u_sensors"], s["x_out"], s["v_out"])
        for s in payload["samples"]
    ]
    return OperatorDataset(
        pde,
        int(payload.get("dofs", default_dofs(pde.id))),
        payload["sensor_grid"],
        samples,
        int(payload["seed"]),
        SolverMeta.from_json(payload["solver_meta"]),
        MeshPolicy.from_json(payload.get("mesh_policy", {"kind": "uniform", "m": len(samples[0].x_out)})),
    )


def save_dataset(dataset: OperatorDataset, path, extra: dict | None = None) -> None:
    with open(path, "w") as f:
        json.dump(dataset_to_payload(dataset, extra), f)


def load_dataset(path) -> OperatorDataset:
    with open(path) as f:
        return dataset_from_payload(json.load(f))
