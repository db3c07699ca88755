import json
from dataclasses import replace

import numpy as np
import pytest

from fern import pde_lab
from fern.errors import SolverError
from fern.pde_lab import MeshPolicy, solvers


def short(pid, t_final, n_cells=128):
    """Small/quick variant of a benchmark equation for unit-level checks."""
    pde = pde_lab.pde_spec(pid, t_final=t_final)
    meta = replace(pde_lab.default_meta(pid), n_cells=n_cells)
    return pde, meta


def test_pde_spec_defaults_carry_reported_constants():
    assert pde_lab.pde_spec("allen_cahn").constants["eps"] == 0.01
    assert pde_lab.pde_spec("cahn_hilliard").constants["mobility"] == 0.01
    ad = pde_lab.pde_spec("aggregation_diffusion")
    assert (ad.constants["diffusion"], ad.constants["m"], ad.constants["sigma"]) == (0.4, 2.0, 1.0)
    ks = pde_lab.pde_spec("keller_segel")
    assert (ks.constants["diffusion"], ks.constants["chi"]) == (0.01, 5.0)
    assert pde_lab.pde_spec("burgers").constants["nu"] == 0.01
    assert pde_lab.pde_spec("kdv").domain == (0.0, 2.0)
    with pytest.raises(ValueError):
        pde_lab.pde_spec("allen_cahn", bogus=1.0)
    with pytest.raises(ValueError):
        pde_lab.pde_spec("heat")


def test_ic_formula_endpoints():
    x = np.linspace(0, 1, 101)
    ac = pde_lab.pde_spec("allen_cahn")
    u0 = pde_lab.ic_function(ac, {"lambda": 1.0, "mu": 0.5})
    assert np.allclose(u0(x), np.sin(2 * np.pi * x), atol=1e-14)

    fp = pde_lab.pde_spec("fokker_planck")
    u0 = pde_lab.ic_function(fp, {"c0": 0.5, "c1": 1.0})
    assert u0(0.5) == pytest.approx(1.0 + 1e-3)

    ks = pde_lab.pde_spec("keller_segel")
    u0 = pde_lab.ic_function(ks, {"c0": 0.2})
    assert u0(0.25) == pytest.approx(1.0)
    assert u0(0.5) == pytest.approx(1.2)


def test_sample_ic_ranges_and_dofs():
    rng = np.random.default_rng(0)
    ac = pde_lab.pde_spec("allen_cahn")
    for _ in range(20):
        params, _ = pde_lab.sample_ic(ac, 1, rng)
        assert 0.0 <= params["lambda"] <= 1.0 and params["mu"] == 0.5
        params, _ = pde_lab.sample_ic(ac, 2, rng)
        assert 0.0 <= params["mu"] <= 1.0
    with pytest.raises(ValueError):
        pde_lab.sample_ic(ac, 3, rng)
    fp = pde_lab.pde_spec("fokker_planck")
    params, _ = pde_lab.sample_ic(fp, None, rng)
    assert 0.3 <= params["c0"] <= 0.7 and 1.0 <= params["c1"] <= 10.0
    with pytest.raises(ValueError):
        pde_lab.sample_ic(fp, 1, rng)
    bu = pde_lab.pde_spec("burgers")
    params, _ = pde_lab.sample_ic(bu, None, rng)
    assert 0.0 <= params["c0"] <= 0.5 and 0.5 <= params["c1"] <= 1.0


def test_sensor_points_include_endpoints():
    pde = pde_lab.pde_spec("kdv")
    grid = pde_lab.sensor_points(pde, 5)
    assert grid[0] == 0.0 and grid[-1] == 2.0 and grid.size == 5
    with pytest.raises(ValueError):
        pde_lab.sensor_points(pde, 1)


def test_mesh_policy_parse_and_validation():
    policy = MeshPolicy.parse("uniform:100")
    assert policy == MeshPolicy("uniform", 100)
    assert MeshPolicy.parse("thirds:49") == MeshPolicy("thirds", 49)
    with pytest.raises(ValueError):
        MeshPolicy.parse("uniform")
    with pytest.raises(ValueError):
        MeshPolicy("halves", 10)
    with pytest.raises(ValueError):
        MeshPolicy("uniform", 1)


def test_thirds_layout_blocks_and_intervals():
    fp = pde_lab.pde_spec("fokker_planck")
    grids = pde_lab.output_grids(fp, MeshPolicy("thirds", 64), 42)
    # first block on [0, 1/2], second on [1/2, 1], last on the full domain
    for i in range(0, 14):
        assert grids[i][0] == 0.0 and grids[i][-1] == 0.5
    for i in range(14, 28):
        assert grids[i][0] == 0.5 and grids[i][-1] == 1.0
    for i in range(28, 42):
        assert grids[i][0] == 0.0 and grids[i][-1] == 1.0
    ks = pde_lab.pde_spec("keller_segel")
    kgrids = pde_lab.output_grids(ks, MeshPolicy("thirds", 49), 42)
    assert kgrids[0][-1] == pytest.approx(1 / 3)
    assert kgrids[20][0] == pytest.approx(1 / 3) and kgrids[20][-1] == pytest.approx(2 / 3)
    assert kgrids[41][0] == pytest.approx(2 / 3) and kgrids[41][-1] == 1.0
    assert all(g.size == 49 for g in kgrids)


def test_uniform_policy_shares_one_grid():
    pde = pde_lab.pde_spec("burgers")
    grids = pde_lab.output_grids(pde, MeshPolicy("uniform", 64), 5)
    assert all(np.array_equal(g, grids[0]) for g in grids)
    assert grids[0].size == 64


def test_allen_cahn_constant_steady_state():
    pde, meta = short("allen_cahn", t_final=0.5)
    x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
    u = pde_lab.solve_pde(pde, np.ones_like(x), meta)
    assert np.allclose(u, 1.0, atol=1e-10)


def test_burgers_constant_advects_into_itself():
    pde, meta = short("burgers", t_final=0.2)
    x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
    u = pde_lab.solve_pde(pde, np.full_like(x, 0.5), meta)
    assert np.allclose(u, 0.5, atol=1e-12)


def test_short_horizon_energy_decay_allen_cahn():
    pde, meta = short("allen_cahn", t_final=0.2, n_cells=256)
    x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
    u0 = pde_lab.ic_function(pde, {"lambda": 0.4, "mu": 0.5})(x)
    dx = 1.0 / meta.n_cells
    energies = []
    pde_lab.solve_pde(pde, u0, meta, callback=lambda t, u: energies.append(
        solvers.ac_energy(u, dx, pde.constants["eps"])
    ))
    energies = np.array(energies)
    assert energies.size == 201
    assert np.all(np.diff(energies) <= 1e-12)


def test_short_horizon_mass_conservation_fv():
    for pid, t_final in (("fokker_planck", 0.002), ("keller_segel", 0.02)):
        pde, meta = short(pid, t_final, n_cells=256 if pid == "fokker_planck" else 512)
        x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
        params, u0f = pde_lab.sample_ic(pde, None, np.random.default_rng(4))
        u0 = u0f(x)
        u = pde_lab.solve_pde(pde, u0, meta)
        dx = (pde.domain[1] - pde.domain[0]) / meta.n_cells
        m0 = solvers.cell_mass(u0, dx)
        assert abs(solvers.cell_mass(u, dx) - m0) / abs(m0) < 1e-10


def test_fokker_planck_relaxes_to_gibbs_profile():
    # long-horizon solution aligns with the equilibrium exp(-potential) shape
    pde, meta = short("fokker_planck", t_final=1.0, n_cells=128)
    x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
    u0 = pde_lab.ic_function(pde, {"c0": 0.4, "c1": 2.0})(x)
    u = pde_lab.solve_pde(pde, u0, meta)
    gibbs = np.exp(-np.cos(2 * np.pi * x))
    cosine = float(u @ gibbs / (np.linalg.norm(u) * np.linalg.norm(gibbs)))
    assert cosine > 0.99


def test_positivity_guard_raises():
    pde, meta = short("fokker_planck", t_final=0.001)
    x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
    with pytest.raises(SolverError):
        pde_lab.solve_pde(pde, np.full_like(x, -1.0), meta)


def test_nonfinite_ic_rejected():
    pde, meta = short("burgers", t_final=0.01)
    x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
    u0 = np.full_like(x, 0.5)
    u0[3] = np.nan
    with pytest.raises(SolverError):
        pde_lab.solve_pde(pde, u0, meta)


def test_batched_solve_matches_single_columns():
    for pid, t_final in (("allen_cahn", 0.05), ("burgers", 0.05), ("keller_segel", 0.01)):
        pde, meta = short(pid, t_final, n_cells=128)
        x = pde_lab.solver_grid(pde.id, pde.domain, meta.n_cells)
        rngs = [np.random.default_rng(s) for s in range(3)]
        dofs = 1 if pid == "allen_cahn" else None
        cols = np.stack([pde_lab.sample_ic(pde, dofs, r)[1](x) for r in rngs], axis=1)
        batch = pde_lab.solve_pde(pde, cols, meta)
        for j in range(3):
            single = pde_lab.solve_pde(pde, cols[:, j], meta)
            assert np.allclose(batch[:, j], single, rtol=0, atol=1e-13)


def test_generate_dataset_deterministic_bytes():
    pde = pde_lab.pde_spec("burgers", t_final=0.05)
    meta = replace(pde_lab.default_meta("burgers"), n_cells=64)
    kwargs = dict(n_samples=3, dofs=None, sensor_count=8,
                  mesh_policy=MeshPolicy("uniform", 16), seed=9, solver_meta=meta)
    a = pde_lab.generate_dataset(pde, **kwargs)
    b = pde_lab.generate_dataset(pde, **kwargs)
    pa = json.dumps(pde_lab.dataset_to_payload(a))
    pb = json.dumps(pde_lab.dataset_to_payload(b))
    assert pa == pb


def test_dataset_roundtrip_bit_exact(tmp_path):
    pde = pde_lab.pde_spec("fokker_planck", t_final=0.002)
    meta = replace(pde_lab.default_meta("fokker_planck"), n_cells=64)
    ds = pde_lab.generate_dataset(pde, 4, None, 6, MeshPolicy("thirds", 8), 3, meta)
    path = tmp_path / "ds.json"
    pde_lab.save_dataset(ds, path)
    loaded = pde_lab.load_dataset(path)
    assert loaded.pde == ds.pde
    assert loaded.seed == ds.seed
    assert loaded.mesh_policy == ds.mesh_policy
    assert np.array_equal(loaded.sensor_grid, ds.sensor_grid)
    for a, b in zip(loaded.samples, ds.samples):
        assert np.array_equal(a.u_sensors, b.u_sensors)
        assert np.array_equal(a.x_out, b.x_out)
        assert np.array_equal(a.v_out, b.v_out)
        assert a.ic_params == b.ic_params


def test_dataset_sensor_values_are_analytic_ic():
    pde = pde_lab.pde_spec("burgers", t_final=0.02)
    meta = replace(pde_lab.default_meta("burgers"), n_cells=64)
    ds = pde_lab.generate_dataset(pde, 2, None, 7, MeshPolicy("uniform", 9), 5, meta)
    for s in ds.samples:
        u0 = pde_lab.ic_function(pde, s.ic_params)
        assert np.allclose(s.u_sensors, u0(ds.sensor_grid), atol=1e-15)


def test_interpolation_periodic_wrap():
    # periodic interpolation must be smooth across the seam at the right wall
    pde = pde_lab.pde_spec("burgers")
    x = pde_lab.solver_grid("burgers", pde.domain, 128)
    u = np.sin(2 * np.pi * x) + 0.5
    out = pde_lab.interpolate_to("burgers", pde.domain, x, u, np.array([0.0, 0.999, 1.0]))
    assert out[0] == pytest.approx(0.5, abs=1e-6)
    assert out[2] == pytest.approx(0.5, abs=1e-6)


def test_refined_meta_doubles_cells_and_halves_dt():
    meta = pde_lab.default_meta("allen_cahn")
    fine = pde_lab.refined_meta(meta)
    assert fine.n_cells == 2 * meta.n_cells and fine.dt == meta.dt / 2
    ks = pde_lab.refined_meta(pde_lab.default_meta("keller_segel"))
    assert ks.dt is None
