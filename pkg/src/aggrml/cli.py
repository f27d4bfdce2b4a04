"""Command-line entry point.

Subcommands: `aggregate` (build and persist a bucket index), `run` (one
job), `bench` (ratio x epsilon sweep), `compare` (exact vs AccurateML vs
budget-matched sampling). All artifacts are written under --out; the
report CSV is byte-deterministic for a fixed seed, measured wall times go
to a sidecar wall_times.csv.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .dataset import load_dense, load_ratings, synth_clustered, synth_ratings
from .errors import AggrmlError, ConfigError
from .harness import (CSV_HEADER, JobConfig, accuracy_loss_pct, build_buckets,
                      run_comparison, run_job)
from .lsh_aggregate import write_index

SYNTH_DENSE_DEFAULT = (2000, 16, 20, 0.25)
SYNTH_RATINGS_DEFAULT = (500, 120, 0.2)


def parse_list(text: str) -> list[float]:
    """Comma list or start:stop:step sweep of floats."""
    if ":" in text:
        try:
            start, stop, step = (float(t) for t in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad sweep syntax: {text!r} (want start:stop:step)")
        if step <= 0 or stop < start:
            raise ConfigError(f"bad sweep range: {text!r}")
        vals = []
        i = 0
        while (v := start + i * step) <= stop + 1e-9:
            vals.append(round(v, 10))
            i += 1
        return vals
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise ConfigError(f"bad numeric list: {text!r}")


def load_input(spec: str, fmt: str, seed: int):
    """Resolve --input: a file path or a synth:/synthr: shorthand."""
    if spec == "synth":
        spec = ("synth:%d,%d,%d,%g" % SYNTH_DENSE_DEFAULT if fmt == "dense"
                else "synthr:%d,%d,%g" % SYNTH_RATINGS_DEFAULT)
    if spec.startswith("synth:"):
        try:
            n, dims, clusters, spread = parse_list(spec[len("synth:"):])
        except ValueError:
            raise ConfigError(f"bad synth spec: {spec!r} (want synth:<n>,<dims>,<clusters>,<spread>)")
        return synth_clustered(int(n), int(dims), int(clusters), spread, seed)
    if spec.startswith("synthr:"):
        try:
            users, items, density = parse_list(spec[len("synthr:"):])
        except ValueError:
            raise ConfigError(f"bad synthr spec: {spec!r} (want synthr:<users>,<items>,<density>)")
        return synth_ratings(int(users), int(items), density, seed)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    if fmt == "ratings":
        return load_ratings(path)
    return load_dense(path, has_label=True)


def _seed_default() -> int:
    return int(os.environ.get("AGGRML_SEED", "0"))


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--input", default="synth",
                   help="dataset path, 'synth', 'synth:<n>,<dims>,<clusters>,<spread>', "
                        "or 'synthr:<users>,<items>,<density>'")
    p.add_argument("--format", choices=("dense", "ratings"), default=None,
                   help="input file format (inferred from --workload if omitted)")
    p.add_argument("--seed", type=int, default=_seed_default(),
                   help="RNG seed (env AGGRML_SEED as fallback)")
    p.add_argument("--partitions", type=int, default=4, help="map-task count")
    p.add_argument("--threads", type=int, default=1, help="concurrent map tasks")
    p.add_argument("--out", default="aggrml_out", help="output directory")


def _add_job(p: argparse.ArgumentParser):
    p.add_argument("--workload", choices=("knn", "cf"), default="knn")
    p.add_argument("--k-nn", type=int, default=5, help="neighbor count for kNN")
    p.add_argument("--epsilon", default="0.05",
                   help="refinement threshold(s): comma list or start:stop:step")
    p.add_argument("--test-fraction", type=float, default=None,
                   help="held-out query fraction (default 0.005 knn / 0.2 cf)")
    p.add_argument("--active-users", type=int, default=100,
                   help="active users for the CF workload")
    p.add_argument("--include-build-budget", action="store_true",
                   help="count grouping/aggregation ops in the comparison budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggrml",
        description="Aggregation-based approximate processing benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="build aggregated points and write the index file")
    _add_common(p)
    p.add_argument("--ratio", default="10", help="target compression ratio")

    p = sub.add_parser("run", help="run one pipeline once")
    _add_common(p)
    _add_job(p)
    p.add_argument("--pipeline", choices=("exact", "accurateml", "sampling"),
                   default="accurateml")
    p.add_argument("--ratio", default="10", help="target compression ratio")
    p.add_argument("--sampling-fraction", type=float, default=None,
                   help="fraction for the sampling pipeline")

    p = sub.add_parser("bench", help="exact + AccurateML over a ratio x epsilon grid")
    _add_common(p)
    _add_job(p)
    p.add_argument("--sweep-ratio", default="10,20,100", help="comma list of ratios")
    p.add_argument("--sweep-epsilon", default="0.01:0.1:0.01",
                   help="epsilon sweep, start:stop:step or comma list")

    p = sub.add_parser("compare", help="exact vs AccurateML vs budget-matched sampling")
    _add_common(p)
    _add_job(p)
    p.add_argument("--ratio", default="10", help="comma list of ratios")
    return parser


def _base_config(args, ratio: float, epsilon: float) -> JobConfig:
    return JobConfig(
        workload=args.workload, ratio=ratio, epsilon=epsilon, seed=args.seed,
        partitions=args.partitions, k_nn=args.k_nn,
        test_fraction=args.test_fraction, active_users=args.active_users,
        threads=args.threads,
        include_build_in_budget=args.include_build_budget)


def _write_reports(out: Path, rows: list, wall_rows: list):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w") as f:
        f.write(CSV_HEADER + "\n")
        for row in rows:
            f.write(row + "\n")
    with open(out / "wall_times.csv", "w") as f:
        f.write("workload,pipeline,ratio,epsilon,t_group_s,t_agg_s,t_init_s,t_refine_s\n")
        for row in wall_rows:
            f.write(row + "\n")


def _wall_row(res) -> str:
    c, w = res.config, res.wall_times_s
    return (f"{c.workload},{c.pipeline},{c.ratio!r},{c.epsilon!r},"
            f"{w.get('group', 0):.6f},{w.get('agg', 0):.6f},"
            f"{w.get('init', 0):.6f},{w.get('refine', 0):.6f}")


def cmd_aggregate(args) -> int:
    ratio = parse_list(args.ratio)
    if len(ratio) != 1:
        raise ConfigError("aggregate takes a single --ratio")
    data = load_input(args.input, args.format or "dense", args.seed)
    if not hasattr(data, "features"):
        raise ConfigError("aggregate expects dense input")
    build = build_buckets(data.features, ratio[0], seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_index(build, out / "index.txt")
    print(f"buckets={build.index.n_buckets} "
          f"achieved_ratio={build.index.compression_ratio_achieved:.3f} "
          f"index={out / 'index.txt'}")
    return 0


def _resolve_data(args):
    fmt = args.format or ("ratings" if args.workload == "cf" else "dense")
    return load_input(args.input, fmt, args.seed)


def cmd_run(args) -> int:
    data = _resolve_data(args)
    rows, wall_rows = [], []
    for ratio in parse_list(args.ratio):
        for eps in parse_list(args.epsilon):
            cfg = replace(_base_config(args, ratio, eps), pipeline=args.pipeline,
                          sampling_fraction=args.sampling_fraction)
            res = run_job(cfg, data)
            rows.append(res.report_row())
            wall_rows.append(_wall_row(res))
            print(rows[-1])
    _write_reports(Path(args.out), rows, wall_rows)
    return 0


def cmd_bench(args) -> int:
    data = _resolve_data(args)
    rows, wall_rows = [], []
    exact = run_job(replace(_base_config(args, 1.0, 0.0), pipeline="exact"), data)
    exact.accuracy_loss_pct = 0.0
    rows.append(exact.report_row())
    wall_rows.append(_wall_row(exact))
    for ratio in parse_list(args.sweep_ratio):
        for eps in parse_list(args.sweep_epsilon):
            cfg = replace(_base_config(args, ratio, eps), pipeline="accurateml")
            res = run_job(cfg, data)
            res.accuracy_loss_pct = accuracy_loss_pct(
                args.workload, exact.accuracy, res.accuracy)
            rows.append(res.report_row())
            wall_rows.append(_wall_row(res))
    _write_reports(Path(args.out), rows, wall_rows)
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'report.csv'}")
    return 0


def cmd_compare(args) -> int:
    data = _resolve_data(args)
    rows, wall_rows = [], []
    for ratio in parse_list(args.ratio):
        for eps in parse_list(args.epsilon):
            results = run_comparison(_base_config(args, ratio, eps), data)
            for name in ("exact", "accurateml", "sampling"):
                rows.append(results[name].report_row())
                wall_rows.append(_wall_row(results[name]))
                print(rows[-1])
    _write_reports(Path(args.out), rows, wall_rows)
    return 0


COMMANDS = {"aggregate": cmd_aggregate, "run": cmd_run,
            "bench": cmd_bench, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except AggrmlError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
