"""Command-line pipeline: gen, train, eval, analyze, sweep, repro.

Exit codes: 0 success, 2 usage error, 3 schema/compatibility error,
4 numeric failure (solver blow-up or training divergence).  The FERN_SEED
environment variable overrides configured seeds for smoke tests.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evalkit, pde_lab, trainer
from .artifacts import config_hash, dump_json
from .errors import GridMismatchError, SchemaError, SolverError, TrainingError
from .experiments import EXPERIMENTS, apply_seed_override, build_model, run_experiment
from .operator_models import (
    FernModel,
    load_model,
    model_to_payload,
    save_model,
)

_PDE_FLAGS = {
    "allen-cahn": "allen_cahn",
    "cahn-hilliard": "cahn_hilliard",
    "fokker-planck": "fokker_planck",
    "aggregation-diffusion": "aggregation_diffusion",
    "keller-segel": "keller_segel",
    "kdv": "kdv",
    "burgers": "burgers",
}


def _env_seed() -> int | None:
    raw = os.environ.get("FERN_SEED")
    return int(raw) if raw else None


def _seed_or_env(seed: int) -> int:
    env = _env_seed()
    return seed if env is None else env


def cmd_gen(args) -> int:
    pde = pde_lab.pde_spec(_PDE_FLAGS[args.pde])
    policy = pde_lab.MeshPolicy.parse(args.mesh)
    seed = _seed_or_env(args.seed)
    flags = {
        "command": "gen",
        "pde": pde.id,
        "dofs": args.dofs,
        "n": args.n,
        "sensors": args.sensors,
        "mesh": policy.to_json(),
        "seed": seed,
    }
    dataset = pde_lab.generate_dataset(pde, args.n, args.dofs, args.sensors, policy, seed)
    pde_lab.save_dataset(dataset, args.out, {"config_hash": config_hash(flags)})
    print(f"wrote {dataset.n_samples} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    dataset = pde_lab.load_dataset(args.data)
    seed = _seed_or_env(args.seed)
    from .experiments import ExperimentConfig

    config = ExperimentConfig(
        name=f"train:{Path(args.data).name}",
        pde_id=dataset.pde.id,
        n_basis=args.n_basis,
        model=args.model,
        dofs=dataset.dofs,
        sensors=dataset.sensor_grid.size,
        mesh=dataset.mesh_policy,
        model_seed=seed,
        branch_activation=args.branch_activation,
        trunk_hidden_layers=args.trunk_hidden,
        trunk_activation=args.trunk_activation,
        hat_h0=args.h0,
        epochs=args.epochs,
        lr0=args.lr0,
        lr_min=args.lr_min,
        batch="full" if args.batch == "full" else int(args.batch),
        h_min=args.h_min,
        loss=args.loss,
    )
    model = build_model(config, dataset)
    model, history = trainer.train(model, dataset, config.train_config())
    resolved = config.to_json()
    save_model(model, args.out, {"config_hash": config_hash(resolved), "seed": seed})
    if args.history:
        history.to_csv(args.history)
    print(f"trained {args.model} (N={args.n_basis}) for {args.epochs} epochs; "
          f"final loss {history.loss[-1]:.3e}; wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    dataset = pde_lab.load_dataset(args.data)
    model = load_model(args.model)
    from .operator_models import branch_input_dim

    if dataset.sensor_grid.size != branch_input_dim(model):
        raise SchemaError(
            f"sensor_grid has {dataset.sensor_grid.size} points but the model's branch "
            f"networks expect {branch_input_dim(model)} inputs"
        )
    report = evalkit.evaluate(model, dataset)
    payload = {"schema_version": 1, "data": str(args.data), "model": str(args.model),
               **report.to_json()}
    dump_json(payload, args.out)
    print(f"mean relative L2 error {report.mean:.4%} +/- {report.std:.4%} "
          f"over {len(report.per_sample)} samples; wrote {args.out}")
    return 0


def cmd_analyze(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, FernModel):
        raise SchemaError("analyze needs a fern model bundle (hat-basis diagnostics)")
    with open(args.model) as f:
        payload = json.load(f)
    domain = args.domain
    if domain is None:
        lo = float(np.min(model.hat.centers))
        hi = float(np.max(model.hat.centers))
        domain = (lo, hi)
    else:
        domain = tuple(float(v) for v in domain.split(","))
    diag = evalkit.basis_diagnostics(model.hat, domain, args.bins)
    diag.to_csv(args.out)
    print(f"histogrammed {payload['N']} bases over {args.bins} bins; wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    train_ds = pde_lab.load_dataset(args.train_data)
    test_ds = pde_lab.load_dataset(args.test_data)
    ns = [int(tok) for tok in args.ns.split(",")]
    config = trainer.TrainConfig(epochs=args.epochs, lr0=args.lr0, seed=_seed_or_env(args.seed))
    result = evalkit.sweep_basis_count(train_ds, test_ds, ns, config,
                                       model_seed=_seed_or_env(args.seed))
    result.to_csv(args.out)
    print(f"swept N={ns}; fitted log-log slope {result.slope:.3f}; wrote {args.out}")
    return 0


def cmd_repro(args) -> int:
    if args.list:
        for name in sorted(EXPERIMENTS):
            print(name)
        return 0
    if args.name not in EXPERIMENTS:
        options = ", ".join(sorted(EXPERIMENTS))
        raise SchemaError(f"unknown experiment {args.name!r}; choose from: {options}")
    config = EXPERIMENTS[args.name]
    env = _env_seed()
    if env is not None:
        config = apply_seed_override(config, env)
    if args.epochs is not None:
        from dataclasses import replace

        config = replace(config, epochs=args.epochs)
    report = run_experiment(config, args.outdir)
    print(f"experiment {config.name}: mean relative L2 error "
          f"{report['mean']:.4%} +/- {report['std']:.4%}; artifacts in {args.outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fern",
        description="Hat-basis operator learning pipeline (data, training, evaluation)",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads (default: library choice)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset")
    g.add_argument("--pde", required=True, choices=sorted(_PDE_FLAGS))
    g.add_argument("--dofs", type=int, default=None)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--sensors", type=int, default=22)
    g.add_argument("--mesh", required=True, help="uniform:M or thirds:M")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="train a model on a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--model", required=True, choices=("fern", "deeponet", "pod"))
    t.add_argument("--n-basis", type=int, required=True)
    t.add_argument("--epochs", type=int, default=2000)
    t.add_argument("--lr0", type=float, default=1e-2)
    t.add_argument("--lr-min", type=float, default=0.0)
    t.add_argument("--batch", default="full")
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--branch-activation", default="tanh", choices=("tanh", "relu"))
    t.add_argument("--trunk-hidden", type=int, default=5,
                   help="inner trunk layers for deeponet (5 = deep, 0 = shallow)")
    t.add_argument("--trunk-activation", default="tanh", choices=("tanh", "relu"))
    t.add_argument("--h0", type=float, default=0.05)
    t.add_argument("--h-min", type=float, default=1e-4)
    t.add_argument("--loss", default="mse", choices=("mse", "relative_mse"))
    t.add_argument("--out", required=True)
    t.add_argument("--history", default=None)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a model bundle on a dataset")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_eval)

    a = sub.add_parser("analyze", help="hat-basis center/support diagnostics")
    a.add_argument("--model", required=True)
    a.add_argument("--bins", type=int, default=10)
    a.add_argument("--domain", default=None, help="lo,hi (default: span of the centers)")
    a.add_argument("--out", required=True)
    a.set_defaults(fn=cmd_analyze)

    s = sub.add_parser("sweep", help="error vs basis-count sweep")
    s.add_argument("--train-data", required=True)
    s.add_argument("--test-data", required=True)
    s.add_argument("--ns", required=True, help="comma-separated ascending basis counts")
    s.add_argument("--epochs", type=int, default=2000)
    s.add_argument("--lr0", type=float, default=1e-2)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_sweep)

    r = sub.add_parser("repro", help="run a named experiment end to end")
    r.add_argument("name", nargs="?", default=None)
    r.add_argument("--outdir", default=None)
    r.add_argument("--epochs", type=int, default=None, help="override the epoch budget")
    r.add_argument("--list", action="store_true", help="list experiment names")
    r.set_defaults(fn=cmd_repro)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "repro" and not args.list:
        if args.name is None or args.outdir is None:
            print("repro needs an experiment name and --outdir", file=sys.stderr)
            return 2
    limiter = None
    if args.threads is not None:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    try:
        return args.fn(args)
    except (SchemaError, GridMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SolverError, TrainingError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
