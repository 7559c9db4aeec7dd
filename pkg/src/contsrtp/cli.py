"""Command-line entry point: ``run``, ``compare``, ``sweep`` and ``validate-network``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigurationError, ContsError
from .grid import load_network

EXIT_OK = 0
EXIT_CONFIG = 2


def _scenario(path: str | None):
    from .scenario import bundled_scenario, load_scenario

    return bundled_scenario() if path is None else load_scenario(path)


def _csv_list(text: str, kind=str) -> list:
    try:
        return [kind(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse list {text!r}: {exc}") from exc


def _seeds(count: int, first: int) -> list[int]:
    if count < 1:
        raise ConfigurationError("--seeds must be at least 1")
    return list(range(first, first + count))


def cmd_run(args) -> int:
    from .harness import run_scenario
    from .metrics import cumulative_regret, suboptimal_count

    sc = _scenario(args.scenario)
    if args.seed is not None:
        sc = sc.replace(seed=args.seed)
    if args.variant:
        sc = sc.replace(variant=args.variant)
    result = run_scenario(sc, out_dir=args.out)
    for node, recs in result.records.items():
        _, cum = cumulative_regret(recs)
        print(
            f"node {node}: {len(recs)} days, regret {cum[-1]:.3f} kW^2, "
            f"suboptimal {suboptimal_count(recs)[-1]}, mass on true {recs[-1].posterior_mass_on_true:.4f}"
        )
    print(f"outputs written to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .harness import compare_variants

    sc = _scenario(args.scenario)
    variants = _csv_list(args.variants)
    if len(variants) < 2:
        raise ConfigurationError("--variants needs at least two names")
    for v in variants:
        sc.replace(variant=v)  # validates the name
    seeds = _seeds(args.seeds, args.first_seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    summaries = compare_variants(sc, variants, seeds, out_path=args.out, n_jobs=args.jobs)
    for v in variants:
        final = [summaries[(v, s)].regret[-1] for s in seeds]
        viol = [summaries[(v, s)].violating_days[-1] for s in seeds]
        print(f"{v}: mean final regret {sum(final) / len(final):.3f}, mean violating days {sum(viol) / len(viol):.2f}")
    print(f"paired series written to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import SWEEP_PARAMS, sweep

    if args.param not in SWEEP_PARAMS:
        raise ConfigurationError(f"--param must be one of {SWEEP_PARAMS}")
    sc = _scenario(args.scenario)
    kind = int if args.param in ("cluster_count", "horizon") else float
    values = _csv_list(args.values, kind)
    if not values:
        raise ConfigurationError("--values is empty")
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    rows = sweep(args.param, values, sc, _seeds(args.seeds, args.first_seed), out_path=args.out, n_jobs=args.jobs)
    last = {}
    for row in rows:
        last[row["value"]] = row
    for v, row in last.items():
        print(f"{args.param}={v}: final regret {row['regret_mean']:.3f} +/- {row['regret_std']:.3f}")
    print(f"sweep written to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    topo = load_network(args.file)
    print(f"{args.file}: {topo.node_count} nodes, substation {topo.substation_voltage:g} V, radial tree OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contsrtp", description="Constrained Thompson-sampling price-response simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings from the simulation")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and write CSV outputs")
    r.add_argument("--scenario", help="scenario INI file (default: bundled base case)")
    r.add_argument("--seed", type=int)
    r.add_argument("--variant", help="override the scenario's variant")
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="paired comparison of variants under common random numbers")
    c.add_argument("--scenario")
    c.add_argument("--variants", required=True, help="comma-separated, e.g. ConTS-B,UnconstrainedTS")
    c.add_argument("--seeds", type=int, default=20, help="number of seeds")
    c.add_argument("--first-seed", type=int, default=0)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", default="compare.csv")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="mean and std of the run series over a parameter grid")
    s.add_argument("--scenario")
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--seeds", type=int, default=20)
    s.add_argument("--first-seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default="sweep.csv")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate-network", help="check a network file describes a radial tree")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ContsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
