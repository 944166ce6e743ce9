# Command-line experiment runner.

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfrcsim",
        description="Hybrid-beamforming simulator for dual-function "
                    "radar-communication systems")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", type=Path, help="YAML experiment spec")
    common.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    common.add_argument("--trials", type=int, default=None,
                        help="override the Monte-Carlo trial count")
    common.add_argument("--out", type=Path, default=None,
                        help="override the output stem")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for trial parallelism")
    common.add_argument("--no-figures", action="store_true",
                        help="skip figure rendering next to the CSV output")

    run = sub.add_parser("run", parents=[common],
                         help="run the Monte-Carlo sweep and write CSV results")
    run.add_argument("--strict", action="store_true",
                     help="exit with code 3 when any trial is infeasible")

    sub.add_parser("beampattern", parents=[common],
                   help="solve one instance per architecture and emit beampatterns")
    sub.add_parser("validate", parents=[common],
                   help="validate the spec file against the schema")
    return parser


def _load(args):
    from .experiment import ConfigError, load_spec

    try:
        spec = load_spec(args.spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    if args.trials is not None:
        if args.trials < 1:
            print("config error: --trials must be >= 1", file=sys.stderr)
            raise SystemExit(EXIT_CONFIG)
        spec = replace(spec, trials=args.trials)
    if args.out is not None:
        spec = replace(spec, output=str(args.out))
    return spec


def _output_stem(spec, default: str) -> Path:
    return Path(spec.output) if spec.output else Path(default)


def cmd_run(args) -> int:
    from .experiment import (RESULT_CSV_DROP, run_experiment, summarize,
                             write_csv, write_manifest)

    spec = _load(args)
    rows = run_experiment(spec, threads=args.threads)
    summary = summarize(spec, rows)
    stem = _output_stem(spec, "results")
    write_csv(rows, stem.with_suffix(".csv"), drop=RESULT_CSV_DROP)
    write_csv(summary, stem.parent / (stem.name + "_summary.csv"))
    write_manifest(spec, rows, stem.parent / (stem.name + ".manifest.json"))
    if not args.no_figures:
        from .report import render_sweep_figure

        render_sweep_figure(summary, stem.with_suffix(".png"))
    infeasible = sum(1 for r in rows if not r["feasible"])
    print(f"wrote {stem.with_suffix('.csv')} ({len(rows)} rows, "
          f"{infeasible} infeasible)")
    if args.strict and infeasible:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_beampattern(args) -> int:
    from .experiment import (_cell_config, beampattern_inputs, cell_channel_seed,
                             cell_init_seed, db_to_linear, emit_beampattern,
                             write_manifest)
    from .model import generate_channel
    from .pdd import solve_best

    spec = _load(args)
    gamma_db = spec.beampattern_gamma_db
    if gamma_db is None:
        gamma_db = spec.gamma_db
    cfg, _ = _cell_config(spec, spec.sweep_values[0])
    gamma = db_to_linear(gamma_db)
    channels = generate_channel(cfg, spec.path_loss, spec.distance_m,
                                spec.num_paths,
                                np.random.default_rng(cell_channel_seed(spec, 0, 0)))
    stem = _output_stem(spec, "beampattern")
    curves, rows = {}, []
    angles_deg = np.arange(-90.0, 90.0 + spec.beampattern_step_deg / 2,
                           spec.beampattern_step_deg)
    infeasible = 0
    for arch in spec.architectures:
        result = solve_best(cfg, channels, spec.scene, gamma, arch,
                            rng=cell_init_seed(spec, 0, arch, 0),
                            n_starts=spec.num_starts, **spec.solver)
        if not result.converged:
            infeasible += 1
            print(f"{arch}: {result.status}, no beampattern", file=sys.stderr)
            continue
        w, t = beampattern_inputs(result)
        out = stem.parent / f"{stem.name}_{arch.lower()}.csv"
        curves[arch] = emit_beampattern(w, t, cfg, out, spec.beampattern_step_deg)
        rows.append({"architecture": arch, "file": str(out),
                     "wall_time_s": 0.0, "feasible": 1})
        print(f"wrote {out}")
    if curves and not args.no_figures:
        from .report import render_beampattern_figure

        render_beampattern_figure(
            angles_deg, curves, stem.with_suffix(".png"),
            target_deg=np.degrees(spec.scene.theta_0),
            clutter_deg=np.degrees(spec.scene.theta_j))
    return EXIT_INFEASIBLE if infeasible and getattr(args, "strict", False) else EXIT_OK


def cmd_validate(args) -> int:
    spec = _load(args)
    cells = len(spec.sweep_values) * len(spec.architectures) * spec.trials
    print(f"spec OK: {len(spec.sweep_values)} sweep values x "
          f"{len(spec.architectures)} architectures x {spec.trials} trials "
          f"= {cells} cells")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "beampattern": cmd_beampattern,
               "validate": cmd_validate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
