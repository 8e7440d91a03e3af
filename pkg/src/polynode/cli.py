"""Command-line entry point wiring the library into reproducible runs.

Exit codes: 0 success, 2 configuration error, 3 evaluation error,
4 training divergence, 5 convexity violation, 1 failed check. Human tables
go to stdout, diagnostics to stderr; every command can also emit a
machine-readable JSON report. All randomness flows through one generator
seeded by --seed. The POLYNODE_THREADS environment variable caps the
numeric thread pools for the run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time


def _apply_thread_env():
    threads = os.environ.get("POLYNODE_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


_apply_thread_env()

import numpy as np  # noqa: E402  (thread env must be set before numpy loads)

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    IntegrationError,
    ParseError,
    PolynodeError,
    TrainingDivergedError,
    UnsupportedStateError,
)
from . import dataproto, material, oracles, surfaces, tangent, trainer  # noqa: E402
from .kinematics import invariants, plane_stress_deformation  # noqa: E402

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_EVAL = 3
EXIT_DIVERGED = 4
EXIT_NONCONVEX = 5


def _load_any_model(path: str):
    """Load either a learned-model or an oracle parameter document."""
    if not os.path.exists(path):
        raise ConfigError(f"model document not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", where=path) from exc
    if isinstance(doc, dict) and "kind" in doc:
        return oracles.oracle_from_document(doc)
    return material.from_document(doc)


def _write_report(path: str | None, payload: dict):
    text = json.dumps(payload, indent=1, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_protocols(spec: str, lambda_max: float, n_points: int):
    kinds = [k.strip() for k in spec.split(",") if k.strip()]
    if not kinds:
        raise ConfigError("no protocols given")
    for k in kinds:
        if k not in dataproto.PROTOCOL_TAGS or k == "custom":
            raise ConfigError(f"unknown protocol '{k}'")
    return [dataproto.LoadingProtocol(k, lambda_max, n_points) for k in kinds]


def _parse_split(spec: str):
    if spec.startswith("protocol:"):
        names = [s.strip() for s in spec[len("protocol:"):].split(",") if s.strip()]
        if not names:
            raise ConfigError("protocol split needs at least one name")
        return dataproto.ByProtocol(names)
    if spec.startswith("fraction:"):
        try:
            frac = float(spec[len("fraction:"):])
        except ValueError:
            raise ConfigError(f"bad fraction in split spec '{spec}'") from None
        return dataproto.ByPathFraction(frac)
    raise ConfigError(f"split must be 'protocol:...' or 'fraction:...', got '{spec}'")


def _parse_grid(spec: str) -> int:
    if "x" in spec:
        sides = spec.split("x")
        if len(sides) != 2 or sides[0] != sides[1]:
            raise ConfigError(f"grid must be square, got '{spec}'")
        spec = sides[0]
    try:
        n = int(spec)
    except ValueError:
        raise ConfigError(f"bad grid size '{spec}'") from None
    if n < 2:
        raise ConfigError("grid needs at least two points per axis")
    return n


def _print_mae_table(mae: dict, title: str):
    print(title)
    width = max([len(k) for k in mae] + [8])
    print(f"  {'protocol':<{width}}  MAE (MPa)")
    for key in mae:
        print(f"  {key:<{width}}  {mae[key]:.6g}")


# -- commands -----------------------------------------------------------------


def _cmd_synth(args) -> int:
    model = _load_any_model(args.model)
    protocols = _parse_protocols(args.protocols, args.lambda_max, args.points)
    dataset = dataproto.generate_synthetic(model, protocols)
    dataproto.save_csv(dataset, args.out)
    feas = dataproto.feasibility_report(dataset)
    print(f"wrote {len(dataset)} records to {args.out}")
    if not feas["feasible"]:
        print(f"warning: {len(feas['violations'])} records leave the invariant cone",
              file=sys.stderr)
    _write_report(args.report, {
        "command": "synth", "records": len(dataset), "out": args.out,
        "feasibility": feas, "source": dataset.source,
    })
    return EXIT_OK


def _load_train_config(path: str | None, seed: int) -> trainer.TrainConfig:
    if path is None:
        return trainer.TrainConfig(seed=seed)
    if not os.path.exists(path):
        raise ConfigError(f"config document not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    doc.setdefault("seed", seed)
    if "batch_size" in doc and doc["batch_size"] is not None:
        doc["batch_size"] = int(doc["batch_size"])
    try:
        return trainer.TrainConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad training config: {exc}") from exc


def _cmd_train(args) -> int:
    dataset = dataproto.load_csv(args.data)
    rule = _parse_split(args.split)
    data_split = dataproto.split(dataset, rule)
    config = _load_train_config(args.config, args.seed)
    model = material.random_model(seed=config.seed, n_steps=args.n_steps)
    start = time.perf_counter()
    trained, report = trainer.train(model, data_split.train, config)
    eval_report = trainer.evaluate(trained, data_split)
    material.save_model(trained, args.out)
    print(f"trained {report.n_iters} iterations, best loss "
          f"{report.total_mse:.6g} MPa^2 in {report.wall_time:.1f} s")
    _print_mae_table(eval_report.per_protocol_mae, "per-protocol MAE:")
    _write_report(args.report, {
        "command": "train",
        "config": {
            "learning_rate": config.learning_rate, "max_iters": config.max_iters,
            "optimizer": config.optimizer, "seed": config.seed,
            "batch_size": config.batch_size,
            "train_fiber_angles": config.train_fiber_angles,
        },
        "split": args.split,
        "train": report.to_dict() | {"history": report.to_dict()["history"][-50:]},
        "evaluation": eval_report.to_dict(),
        "model": args.out,
        "wall_time": time.perf_counter() - start,
    })
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = material.load_model(args.model)
    dataset = dataproto.load_csv(args.data)
    data_split = dataproto.split(dataset, _parse_split(args.split))
    report = trainer.evaluate(model, data_split)
    _print_mae_table(report.per_protocol_mae, "per-protocol MAE:")
    print(f"validation MSE: {report.total_mse:.6g} MPa^2")
    _write_report(args.report, {"command": "eval", "model": args.model,
                                "split": args.split, **report.to_dict()})
    return EXIT_OK


def _cmd_fit_oracle(args) -> int:
    dataset = dataproto.load_csv(args.data)
    config = oracles.FitConfig(restarts=args.restarts, seed=args.seed)
    params, report = oracles.fit_oracle(args.kind, dataset, config)
    oracles.save_oracle(params, args.out)
    print(f"fitted {args.kind}: mse {report.mse:.6g} MPa^2, "
          f"converged={report.converged}")
    _print_mae_table(report.per_protocol_mae, "per-protocol MAE:")
    _write_report(args.report, {
        "command": "fit-oracle", "kind": args.kind, "out": args.out,
        "params": oracles.oracle_to_document(params),
        "mse": report.mse, "converged": report.converged,
        "per_protocol_mae": report.per_protocol_mae,
    })
    return EXIT_OK


def _cmd_convexity_check(args) -> int:
    model = _load_any_model(args.model)
    n = _parse_grid(args.grid)
    scan = surfaces.convexity_scan(model, n=n, e_max=args.range)
    print(f"min second difference: {scan.min_second_difference:.3e}")
    print(f"violations: {scan.n_violations} grid, "
          f"{len(scan.monotonicity_violations)} monotonicity")
    _write_report(args.report, {"command": "convexity-check", **scan.to_dict()})
    if not scan.convex:
        for v in scan.violations[:10]:
            print(f"  grid violation {v}", file=sys.stderr)
        for v in scan.monotonicity_violations[:10]:
            print(f"  monotone violation {v}", file=sys.stderr)
        return EXIT_NONCONVEX
    return EXIT_OK


def _cmd_tangent_check(args) -> int:
    model = material.load_model(args.model)
    if args.samples < 1:
        raise ConfigError("samples must be positive")
    rng = np.random.default_rng(args.seed)
    from .validation import tangent_consistency  # local import to keep startup light

    worst, n_checked = tangent_consistency(model, rng, n_states=args.samples)
    print(f"max relative Frobenius error over {n_checked} states: {worst:.3e}")
    _write_report(args.report, {
        "command": "tangent-check", "samples": n_checked,
        "max_relative_error": worst, "tol": args.tol, "passed": worst <= args.tol,
    })
    if worst > args.tol:
        print(f"tangent check failed: {worst:.3e} > {args.tol:.3e}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_energy_surface(args) -> int:
    model = _load_any_model(args.model)
    n = _parse_grid(args.grid)
    axis, psi = surfaces.energy_surface(model, n=n, e_max=args.range)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("e_xx,e_yy,psi\n")
        for i in range(n):
            for k in range(n):
                fh.write("%.17g,%.17g,%.17g\n" % (axis[i], axis[k], psi[i, k]))
    print(f"wrote {n * n} grid points to {args.out}")
    _write_report(args.report, {
        "command": "energy-surface", "out": args.out, "grid": n,
        "range": args.range, "psi_max": float(psi.max()), "psi_min": float(psi.min()),
    })
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polynode",
        description="Polyconvex data-driven hyperelasticity toolbox")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for every random draw in the run")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic biaxial dataset")
    p.add_argument("--model", required=True, help="oracle or model document")
    p.add_argument("--protocols", default="offx,offy,equibiaxial,stripx,stripy")
    p.add_argument("--lambda-max", type=float, default=1.15, dest="lambda_max")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a learned model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="fraction:0.8")
    p.add_argument("--config", default=None, help="JSON training config")
    p.add_argument("--out", required=True, help="trained model document")
    p.add_argument("--report", default=None)
    p.add_argument("--n-steps", type=int, default=20, dest="n_steps")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="per-protocol errors of a model on a split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="fraction:0.8")
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("fit-oracle", help="fit a closed-form model to a dataset")
    p.add_argument("--kind", required=True, choices=sorted(oracles.ORACLE_KINDS))
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_fit_oracle)

    p = sub.add_parser("convexity-check",
                       help="monotonicity scan plus energy-grid second differences")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="21")
    p.add_argument("--range", type=float, default=0.2)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_convexity_check)

    p = sub.add_parser("tangent-check",
                       help="finite-difference check of the consistent tangent")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_tangent_check)

    p = sub.add_parser("energy-surface", help="emit the psi(Exx, Eyy) grid as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="21")
    p.add_argument("--range", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_energy_surface)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DomainError, UnsupportedStateError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except PolynodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
