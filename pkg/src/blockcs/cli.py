"""``blockcs`` command-line entry point."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .datagen import MatrixKind, gen_matrix, write_bcsm
from .harness import (ConfigError, emit_defaults, parse_config, resolve_threads, run_detection,
                      run_oracle_suite, run_table)
from .types import ContractError


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", type=Path, required=True, help="JSON or YAML experiment config")
    sp.add_argument("--out", type=Path, default=None, help="output directory (overrides output_dir)")
    sp.add_argument("--seed", type=int, default=None, help="master seed (overrides seed)")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads for trials; BLOCKCS_THREADS takes precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockcs", description="Block-sparse recovery experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run the solver comparison grid and write results.csv")
    _common(sp)
    sp.add_argument("--inline-timing", action="store_true",
                    help="fill time_s in results.csv (breaks byte-reproducibility)")

    sp = sub.add_parser("detect", help="run the user-detection protocol and write plot data")
    _common(sp)
    sp.add_argument("--target-fap", type=float, default=None, help="target false-alarm probability")

    sp = sub.add_parser("oracle", help="compare BNHTP with exhaustive search on small instances")
    _common(sp)

    sp = sub.add_parser("gen-matrix", help="write a sensing matrix in the BCSM binary format")
    sp.add_argument("--kind", required=True, help="A1, A2, A3 or A4")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--m", type=int, default=839)
    sp.add_argument("--n", type=int, default=2048)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--normalize", action="store_true", help="unit-norm columns (A1 only)")

    sp = sub.add_parser("defaults", help="print the default config as JSON")
    return parser


def _load(args):
    spec = parse_config(args.config)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    out = args.out if args.out is not None else Path(spec.output_dir)
    return spec, out, resolve_threads(args.threads)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "defaults":
            sys.stdout.write(emit_defaults())
        elif args.command == "gen-matrix":
            kind = MatrixKind.parse(args.kind)
            m, n = kind.fixed_shape or (args.m, args.n)
            write_bcsm(args.out, gen_matrix(kind, m, n, args.seed, args.normalize))
            print(f"wrote {kind.value} ({m}x{n}) to {args.out}")
        elif args.command == "run":
            spec, out, threads = _load(args)
            rows = run_table(spec, out, threads, inline_timing=args.inline_timing)
            for r in rows:
                rec = r.record
                print(f"{r.matrix} s_bar={r.s_bar} sigma={r.sigma:g} {r.solver:5s} iter={rec.iterations:.2f} "
                      f"r_error={rec.r_error:.4g} obj={rec.obj_value:.4g} T={rec.t_rate:.2f} Tc={rec.tc_rate:.2f}")
            print(f"results in {out}")
        elif args.command == "detect":
            spec, out, threads = _load(args)
            if args.target_fap is not None:
                spec = replace(spec, target_fap=args.target_fap)
            for r in run_detection(spec, out, threads):
                print(f"sigma={r.sigma:g} {r.solver:5s} fap={r.stats.fap:.5f} fir={r.stats.fir:.5f} "
                      f"threshold={r.stats.threshold:.4g}")
            print(f"results in {out}")
        elif args.command == "oracle":
            spec, out, _ = _load(args)
            cases = run_oracle_suite(spec, out)
            n_opt = sum(c.optimal for c in cases)
            n_stat = sum(c.oracle_stationary for c in cases)
            print(f"global optimum reached: {n_opt}/{len(cases)}")
            print(f"exhaustive minimizers stationary at auto tau: {n_stat}/{len(cases)}")
            print(f"results in {out}")
    except (ConfigError, ContractError, OSError) as exc:
        print(f"blockcs: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
