"""Command-line entry point.

Subcommands: ``gen`` materializes the scenario database, ``run`` evaluates a
study end to end, ``marginal`` sweeps the converter capacity grid,
``hosting`` evaluates the voltage-constrained hosting improvement, and
``report`` collates result CSVs for the plotting component. Exit codes:
0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .errors import B2BValueError, ConfigError
from .hosting import AggMode, HostingQuery, estimate_vlsm, evaluate_hosting, load_network_json, load_vlsm_csv
from .study import (
    HostingStudySpec,
    ensure_database,
    generation_fingerprint,
    load_study_config,
    pool_digest,
    run_hosting_study,
    run_study,
    write_report,
)
from .profiles import load_pool_manifest


def _add_jobs(parser):
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="b2bvalue",
        description="Grid-value analysis of a back-to-back converter tie "
                    "between two distribution feeders",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate the scenario database only")
    p_gen.add_argument("--config", required=True, help="study JSON file")
    p_gen.add_argument("--out", required=True, help="database output directory")
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run a study end to end")
    p_run.add_argument("--config", required=True, help="study JSON file")
    p_run.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    p_run.add_argument("--db", default=None, help="use a pre-generated database directory")
    _add_jobs(p_run)
    p_run.set_defaults(func=cmd_run)

    p_marg = sub.add_parser("marginal", help="sweep the converter capacity grid")
    p_marg.add_argument("--config", required=True)
    p_marg.add_argument("--out", default=None)
    p_marg.add_argument("--db", default=None)
    p_marg.add_argument("--cap-min", type=float, default=None, help="grid start (kW)")
    p_marg.add_argument("--cap-max", type=float, default=None, help="grid end, inclusive (kW)")
    p_marg.add_argument("--cap-step", type=float, default=None, help="grid step (kW)")
    p_marg.add_argument("--metric", default=None,
                        choices=["r_ec", "r_ees", "r_pes", "r_deep"])
    _add_jobs(p_marg)
    p_marg.set_defaults(func=cmd_marginal)

    p_host = sub.add_parser("hosting", help="hosting-capacity improvement at one operating point")
    source = p_host.add_mutually_exclusive_group(required=True)
    source.add_argument("--vlsm", help="real-power sensitivity matrix CSV (V/W)")
    source.add_argument("--network", help="radial network JSON to estimate sensitivities from")
    p_host.add_argument("--vlsm-q", default=None, help="optional reactive matrix CSV (V/VAr)")
    p_host.add_argument("--perturbation-w", type=float, default=1000.0,
                        help="finite-difference injection size (W)")
    p_host.add_argument("--beta", required=True, help="converter connection bus id")
    p_host.add_argument("--weak", required=True, help="comma-separated weak bus ids")
    p_host.add_argument("--dp-kw", type=float, required=True,
                        help="exported power magnitude (kW)")
    p_host.add_argument("--agg", default="min", choices=["min", "mean"])
    p_host.add_argument("--base-kw", type=float, default=None,
                        help="baseline hosting capacity (kW) for the improvement rate")
    p_host.add_argument("--out", default=None, help="optional hosting CSV path")
    p_host.set_defaults(func=cmd_hosting)

    p_rep = sub.add_parser("report", help="collate result CSVs for the plot component")
    p_rep.add_argument("--results", required=True, help="results directory from 'run'")
    p_rep.add_argument("--out", required=True, help="report output directory")
    p_rep.set_defaults(func=cmd_report)
    return parser


def _resolve_out(args, config) -> Path:
    out = args.out if args.out is not None else config.output_dir
    if out is None:
        raise ConfigError("no output directory: pass --out or set output_dir in the config")
    return Path(out)


def cmd_gen(args) -> int:
    config = load_study_config(args.config)
    pool = load_pool_manifest(config.pool_manifest)
    gen_hash = generation_fingerprint(config, pool_digest(config.pool_manifest))
    ensure_database(Path(args.out), pool, config, gen_hash)
    print(f"database ready at {args.out}")
    return 0


def cmd_run(args) -> int:
    config = load_study_config(args.config)
    out = _resolve_out(args, config)
    run_study(config, out, jobs=args.jobs, db_dir=args.db)
    print(f"study complete: {out}")
    return 0


def _capacity_grid(cap_min: float, cap_max: float, cap_step: float) -> list[float]:
    if cap_step <= 0 or cap_max < cap_min:
        raise ConfigError("need cap-min <= cap-max and cap-step > 0")
    count = int((cap_max - cap_min) / cap_step + 1e-9) + 1
    return [cap_min + i * cap_step for i in range(count)]


def cmd_marginal(args) -> int:
    config = load_study_config(args.config)
    out = _resolve_out(args, config)
    flags = (args.cap_min, args.cap_max, args.cap_step)
    if any(f is not None for f in flags):
        if any(f is None for f in flags):
            raise ConfigError("give all of --cap-min/--cap-max/--cap-step or none")
        grid = _capacity_grid(args.cap_min, args.cap_max, args.cap_step)
    else:
        if not config.converter_capacities_kw or len(config.converter_capacities_kw) < 2:
            raise ConfigError("marginal sweep needs a capacity grid "
                              "(flags or >= 2 configured capacities)")
        grid = list(config.converter_capacities_kw)
    if len(grid) < 2:
        raise ConfigError("marginal sweep needs at least two capacities")
    run_study(config, out, jobs=args.jobs, db_dir=args.db,
              capacities_override=grid, metric=args.metric)
    print(f"marginal sweep complete: {out} ({len(grid)} capacity points)")
    return 0


def cmd_hosting(args) -> int:
    if args.vlsm:
        vlsm = load_vlsm_csv(args.vlsm, args.vlsm_q)
    else:
        vlsm = estimate_vlsm(load_network_json(args.network), args.perturbation_w)
    weak = tuple(b.strip() for b in args.weak.split(",") if b.strip())
    query = HostingQuery(
        beta=args.beta,
        weak_buses=weak,
        delta_p_beta_w=args.dp_kw * 1000.0,
        base_capacity_w=args.base_kw * 1000.0 if args.base_kw else None,
    )
    result = evaluate_hosting(vlsm, query, AggMode(args.agg))
    for bus in result.per_bus:
        print(f"bus {bus.bus}: delta_c = {bus.delta_c_w / 1000.0:.4f} kW")
    print(f"aggregate ({result.mode.value}): {result.aggregate_w / 1000.0:.4f} kW")
    if result.r_cder is not None:
        print(f"r_cder: {result.r_cder:.6f}")
    if args.out:
        spec = HostingStudySpec(
            beta=args.beta, weak_buses=weak, delta_p_kw=args.dp_kw,
            aggregate=AggMode(args.agg),
            network_path=Path(args.network) if args.network else None,
            vlsm_path=Path(args.vlsm) if args.vlsm else None,
            vlsm_q_path=Path(args.vlsm_q) if args.vlsm_q else None,
            perturbation_w=args.perturbation_w,
            base_capacity_kw=args.base_kw,
        )
        run_hosting_study(spec, Path(args.out))
        print(f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    write_report(args.results, args.out)
    print(f"report written to {args.out}")
    return 0


def main(argv=None) -> int:
    level = os.environ.get("B2BVALUE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except B2BValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
