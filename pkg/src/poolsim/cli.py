"""poolsim command line: simulate | verify | best-response | sweep | fig1."""
from __future__ import annotations

import argparse
import copy
import math
import os
import sys

import numpy as np
import yaml

from .analysis import best_response, ocdic_check
from .config import ConfigError, parse_config
from .csvio import ledger_header, ledger_rows, write_csv
from .engine import run_simulation
from .model import cost_eval
from .svgplot import line_plot_svg, write_svg
from .theorems import ALL_THEOREMS, run_audits

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2


def _load(path, args):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    cfg = parse_config(data)
    if getattr(args, "seed", None) is not None:
        cfg = _replace(cfg, seed=args.seed)
    if getattr(args, "replicas", None) is not None:
        cfg = _replace(cfg, replicas=args.replicas)
    return cfg


def _replace(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


def cmd_simulate(args) -> int:
    cfg = _load(args.config, args)
    ledger = run_simulation(cfg)
    n = len(cfg.miners)
    write_csv(os.path.join(args.out, "ledger.csv"), ledger_header(n), ledger_rows(ledger))

    rounds = len(ledger.records)
    mean_ratio = math.fsum(r.budget_ratio for r in ledger.records) / rounds
    summary_rows = []
    for i, spec in enumerate(cfg.miners):
        rewards = [r.rewards[i] for r in ledger.records]
        costs = [cost_eval(spec.cost, r.allocations[i]) for r in ledger.records]
        payoff = math.fsum(rw - c for rw, c in zip(rewards, costs)) / rounds
        freq = math.fsum(r.subsidy_flags[i] for r in ledger.records) / rounds
        summary_rows.append([
            i, math.fsum(rewards) / rounds, payoff, freq, mean_ratio,
        ])
    write_csv(
        os.path.join(args.out, "summary.csv"),
        ["miner", "mean_reward", "mean_payoff", "subsidy_frequency", "mean_budget_ratio"],
        summary_rows,
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args.config, args)
    theorems = args.theorems.split(",") if args.theorems else list(ALL_THEOREMS)
    theorems = [t.strip().upper() for t in theorems if t.strip()]
    try:
        rows = run_audits(cfg, theorems)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    write_csv(
        os.path.join(args.out, "theorem_report.csv"),
        ["theorem", "claim", "config_digest", "verdict", "metric", "bound", "ci"],
        [[r["theorem"], r["claim"], r["config_digest"], r["verdict"],
          r["metric"], r["bound"], r["ci"]] for r in rows],
    )
    for r in rows:
        print(f"{r['theorem']}: {r['verdict']} (metric={r['metric']:g}, bound={r['bound']:g})")
    unexpected = [r for r in rows if r["verdict"] == "FAIL"]
    return EXIT_CONFIG if False else (EXIT_OK if not unexpected else 1)


def cmd_best_response(args) -> int:
    cfg = _load(args.config, args)
    profiles = cfg.profiles()
    if not 0 <= args.miner < len(profiles):
        print(f"error: miner index {args.miner} out of range", file=sys.stderr)
        return EXIT_CONFIG
    capacities = np.array([p.capacity_A for p in profiles])
    objective = args.objective or ("floor" if cfg.mechanism == "ppss" else "payoff")
    result, curve = best_response(
        cfg.mechanism, args.miner, capacities, cfg.platform, profiles,
        cfg.demand, grid_points=args.grid, replicas=cfg.replicas,
        seed=cfg.seed, objective=objective, return_curve=True,
    )
    write_csv(
        os.path.join(args.out, "br_curve.csv"),
        ["a", "payoff_mean", "ci"],
        curve,
    )
    print(
        f"argmax a={result.argmax_a:.17g} value={result.value:.17g} "
        f"resolution={result.grid_resolution:.17g} method={result.method}"
    )
    return EXIT_OK


def _set_path(data: dict, dotted: str, value) -> bool:
    node = data
    parts = dotted.split(".")
    for part in parts[:-1]:
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                return False
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            return False
    last = parts[-1]
    if isinstance(node, list):
        if not last.isdigit() or int(last) >= len(node):
            return False
        node[int(last)] = value
    elif isinstance(node, dict) and last in node:
        node[last] = value
    else:
        return False
    return True


def cmd_sweep(args) -> int:
    if not args.axis or len(args.axis) > 2:
        print("error: provide one or two --axis specs", file=sys.stderr)
        return EXIT_CONFIG
    axes = []
    for spec in args.axis:
        try:
            path, rng = spec.split("=", 1)
            lo, hi, count = rng.split(":")
            axes.append((path, np.linspace(float(lo), float(hi), int(count))))
        except ValueError:
            print(f"error: bad axis spec {spec!r} (want field=lo:hi:count)", file=sys.stderr)
            return EXIT_CONFIG
    with open(args.config) as fh:
        base = yaml.safe_load(fh)

    grids = [axes[0][1]] if len(axes) == 1 else [axes[0][1], axes[1][1]]
    cells = (
        [(v,) for v in grids[0]]
        if len(axes) == 1
        else [(v0, v1) for v0 in grids[0] for v1 in grids[1]]
    )
    rows = []
    n_miners = None
    for cell in cells:
        data = copy.deepcopy(base)
        for (path, _), v in zip(axes, cell):
            if not _set_path(data, path, float(v)):
                print(f"error: unknown axis field {path!r}", file=sys.stderr)
                return EXIT_CONFIG
        try:
            cfg = parse_config(data)
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        if getattr(args, "seed", None) is not None:
            cfg = _replace(cfg, seed=args.seed)
        if getattr(args, "replicas", None) is not None:
            cfg = _replace(cfg, replicas=args.replicas)
        n_miners = len(cfg.miners)
        verdicts = ocdic_check(
            cfg.mechanism, cfg.platform, cfg.profiles(), cfg.demand,
            replicas=cfg.replicas, seed=cfg.seed,
        )
        ledger = run_simulation(cfg)
        mean_ratio = math.fsum(r.budget_ratio for r in ledger.records) / len(ledger.records)
        row = list(cell)
        for v in verdicts:
            row += [int(v["passed"]), v["argmax"]]
        row.append(mean_ratio)
        rows.append(row)

    header = [path for path, _ in axes]
    for i in range(1, n_miners + 1):
        header += [f"ocdic_pass_{i}", f"argmax_{i}"]
    header.append("mean_budget_ratio")
    write_csv(os.path.join(args.out, "sweep.csv"), header, rows)
    return EXIT_OK


def cmd_fig1(args) -> int:
    # subsidy shape vs capacity at k=2, lambda=0.8, D=10
    k, lam, D = 2.0, 0.8, 10.0
    A = np.linspace(20.0, 50.0, 301)
    x = lam * A * k / D
    K = 1.0 - x * np.exp(1.0 - x)
    write_csv(os.path.join(args.out, "fig1.csv"), ["A", "K"], zip(A, K))
    svg = line_plot_svg(
        A, K,
        xlabel="total computing power A",
        ylabel="subsidy shape K",
        title="Subsidy shape vs capacity (k=2, lambda=0.8, D=10)",
    )
    write_svg(os.path.join(args.out, "fig1.svg"), svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolsim",
        description="Simulate and audit pay-per-share reward mechanisms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--replicas", type=int, default=None, help="replica override")

    p = sub.add_parser("simulate", help="run the round loop, emit ledger.csv/summary.csv")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run theorem audits, emit theorem_report.csv")
    common(p)
    p.add_argument("--theorems", default=None, help="comma list, e.g. T1,T5")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("best-response", help="best-response curve for one miner")
    common(p)
    p.add_argument("--miner", type=int, required=True)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--objective", choices=["payoff", "floor"], default=None)
    p.set_defaults(func=cmd_best_response)

    p = sub.add_parser("sweep", help="1-2 axis parameter sweep, emit sweep.csv")
    common(p)
    p.add_argument("--axis", action="append", default=[], help="field=lo:hi:count")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fig1", help="subsidy-shape curve, emit fig1.csv and fig1.svg")
    common(p, config=False)
    p.set_defaults(func=cmd_fig1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        if args.command != "fig1" and getattr(args, "config", None) == getattr(e, "filename", None):
            print(f"error: config file not found: {e.filename}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
