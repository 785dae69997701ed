"""Command-line entry point.

Subcommands: solve, query-cdf, ber, calibrate, gate-count.  Exit codes:
0 success, 2 when the requested problem exceeds simulation capacity,
1 for any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import CapacityError, ConfigError
from .harness import (ExperimentSpec, fmt, load_spec, run_ber, run_calibration,
                      run_gate_count, run_query_cdf, solve_single, write_csv)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override cfg.seed")
    p.add_argument("--trials", type=int, default=None, help="override trial count")
    p.add_argument("--backend", choices=["amplitude", "circuit", "auto"], default=None)
    p.add_argument("--out", default=None, help="override output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasmld",
        description="Grover adaptive search workbench for overloaded-MIMO "
                    "maximum likelihood detection")
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="run one instance and print the trace")
    _add_common(solve)
    solve.add_argument("--dump-state", default=None,
                       help="write the prepared statevector (circuit backend)")
    for name in ("query-cdf", "ber", "calibrate", "gate-count"):
        _add_common(sub.add_parser(name))
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    spec = load_spec(args.config)
    if args.seed is not None:
        spec.cfg = type(spec.cfg)(**{**_cfg_dict(spec.cfg), "seed": args.seed})
    if args.trials is not None:
        spec.trials = args.trials
    if args.backend is not None:
        spec.backend = args.backend
    if args.out is not None:
        spec.output_dir = args.out
    return spec


def _cfg_dict(cfg) -> dict:
    return {"N": cfg.N, "M": cfg.M, "tau_max": cfg.tau_max,
            "modulation": cfg.modulation, "T_P": cfg.T_P, "T_D": cfg.T_D,
            "P_X": cfg.P_X, "snr_db": cfg.snr_db, "seed": cfg.seed}


def _run(args) -> int:
    spec = _spec_from_args(args)
    out = Path(spec.output_dir)
    if args.command == "solve":
        dump = Path(args.dump_state) if args.dump_state else None
        trace = solve_single(spec, dump_state=dump)
        print(trace.to_jsonl())
        summary = {"final_y": trace.final_y, "cd_queries": trace.cd_queries,
                   "qd_rotations": trace.qd_rotations, "converged": trace.converged}
        print(json.dumps(summary), file=sys.stderr)
        return 0
    if args.command == "query-cdf":
        rows = run_query_cdf(spec)
        path = write_csv(out / f"{spec.name}_query_cdf.csv",
                         ["variant", "trial", "cd_queries", "qd_rotations", "converged"],
                         rows)
        print(path)
        return 0
    if args.command == "ber":
        rows, _ = run_ber(spec)
        path = write_csv(out / f"{spec.name}_ber.csv",
                         ["detector", "snr_db", "t_p", "bits", "errors", "ber"],
                         rows)
        print(path)
        return 0
    if args.command == "calibrate":
        rows, _ = run_calibration(spec, out_dir=out)
        path = write_csv(out / f"{spec.name}_calibration.csv",
                         ["indicator", "value", "l_opt"], rows)
        print(path)
        return 0
    if args.command == "gate-count":
        reports = run_gate_count(spec)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{spec.name}_gate_count.json"
        path.write_text(json.dumps(reports, indent=2) + "\n")
        for rep in reports:
            print(f"M={rep['M']} tau_max={rep['tau_max']} q_v={rep['q_v']} "
                  f"{rep['modulation']}: q_k={rep['q_k']} G_UG={rep['g_ug_cnot']} "
                  f"G_prop={rep['g_prop_cnot']} ratio={fmt(rep['ratio'])}")
        print(path)
        return 0
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
