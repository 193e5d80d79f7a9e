"""Command-line front end: pit, simulate, fit, smooth, mc.

Every command is deterministic given its flags and seed, independent of the
worker count; outputs are delimited text ready for external plotting.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .benchmark import Scenario, builtin_scenario, run_scenario, write_mc_report
from .copulas import Family, theta_to_tau
from .edgefit import Mode
from .eis import EisConfig
from .panels import (
    load_fit,
    load_panel,
    load_uniform_panel,
    rank_pit,
    save_fit,
    save_panel,
    save_tau_paths,
)
from .vine import (
    fit_dvine,
    implied_tau_path,
    order_variables,
    simulate_dvine,
    smoothed_tau_paths,
)


def _parse_families(spec_str: str) -> list[Family]:
    return [Family.from_code(code) for code in spec_str.split(",") if code.strip()]


def _add_run_flags(parser, families=True):
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--n-traj", type=int, default=100, help="importance-sampling trajectories")
    parser.add_argument("--workers", type=int, default=1, help="parallel workers (>= 1)")
    if families:
        parser.add_argument(
            "--families",
            default="N,C,G,SC,SG",
            help="comma-separated candidate family codes (subset of N,C,G,SC,SG)",
        )


def cmd_pit(args) -> int:
    panel = load_panel(args.input)
    save_panel(rank_pit(panel), args.output)
    return 0


def cmd_simulate(args) -> int:
    fit = load_fit(args.spec)
    panel, tau_paths = simulate_dvine(fit.spec, args.T, seed=args.seed)
    save_panel(panel, args.output)
    if args.tau_out:
        if tau_paths:
            labeled = {}
            for (tree, pos), series in sorted(tau_paths.items()):
                left, right = fit.spec.conditioned_labels(tree, pos)
                cond = fit.spec.conditioning_labels(tree, pos)
                label = f"{left}~{right}" + (f"|{'.'.join(cond)}" if cond else "")
                labeled[label] = series
            save_tau_paths(labeled, args.tau_out)
        else:
            print("no time-varying edges; tau-path file not written", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    panel = load_uniform_panel(args.data)
    families = _parse_families(args.families)
    config = EisConfig(n_traj=args.n_traj, seed=args.seed)
    ordering = order_variables(panel)
    d = panel.dim
    trunc = args.trunc_tree if args.trunc_tree is not None else d - 1
    fit = fit_dvine(
        panel,
        families=families,
        max_tv_tree=min(args.max_tv_tree, trunc),
        trunc_tree=trunc,
        config=config,
        workers=args.workers,
        ordering=ordering,
    )
    save_fit(fit, args.fit_out)
    with open(args.bic_out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["up_to_tree", "tree_bic", "cumulative_bic"])
        for k, (tb, cb) in enumerate(zip(fit.tree_bic, fit.cumulative_bic), start=1):
            writer.writerow([k, repr(tb), repr(cb)])
        writer.writerow(["total", "", repr(fit.total_bic)])
    return 0


def _edge_label(spec, tree, pos) -> str:
    left, right = spec.conditioned_labels(tree, pos)
    return f"{left}~{right}"


def cmd_smooth(args) -> int:
    fit = load_fit(args.fit)
    panel = load_uniform_panel(args.data)
    spec = fit.spec
    config = EisConfig(n_traj=args.n_traj, seed=fit.seed)
    T = panel.T

    if args.implied:
        requested = [pair.split("~") for pair in args.edges.split(",")]
        for pair in requested:
            if len(pair) != 2:
                raise ValueError("--implied expects edge selectors like A~B")
        smoothed = smoothed_tau_paths(panel, spec, config)
        series = {}
        for la, lb in requested:
            series[f"{la}~{lb}"] = implied_tau_path(
                spec, smoothed, la, lb, mc_reps=args.mc_reps, seed=args.seed
            )
        save_tau_paths(series, args.output)
        return 0

    tree1 = {_edge_label(spec, 1, pos): pos for pos in range(1, spec.dim)}
    if args.edges == "all-tv":
        wanted = [
            (label, pos) for label, pos in tree1.items()
            if spec.edges[(1, pos)].mode is Mode.TIME_VARYING
        ]
        if not wanted:
            raise ValueError("no time-varying edges on tree 1")
    else:
        wanted = []
        for token in args.edges.split(","):
            token = token.strip()
            rev = "~".join(reversed(token.split("~")))
            if token in tree1:
                wanted.append((token, tree1[token]))
            elif rev in tree1:
                wanted.append((rev, tree1[rev]))
            else:
                raise ValueError(f"{token!r} is not a tree-1 edge of the fitted vine")
    needs_tv = any(spec.edges[(1, pos)].mode is Mode.TIME_VARYING for _, pos in wanted)
    smoothed = smoothed_tau_paths(panel, spec, config) if needs_tv else {}
    series = {}
    for label, pos in wanted:
        edge = spec.edges[(1, pos)]
        if edge.mode is Mode.TIME_VARYING:
            series[label] = smoothed[(1, pos)]
        elif edge.mode is Mode.STATIC:
            print(f"edge {label} is static; writing its constant tau", file=sys.stderr)
            series[label] = np.full(T, theta_to_tau(edge.family, edge.theta))
        else:
            print(f"edge {label} is independence; writing zeros", file=sys.stderr)
            series[label] = np.zeros(T)
    save_tau_paths(series, args.output)
    return 0


def cmd_mc(args) -> int:
    try:
        scenario = builtin_scenario(args.scenario)
    except ValueError:
        import os

        if not os.path.exists(args.scenario):
            raise
        fit = load_fit(args.scenario)
        scenario = Scenario(name=args.scenario, spec=fit.spec, T=args.T)
    scenario = scenario.with_replications(args.reps)
    report = run_scenario(scenario, seed=args.seed, workers=args.workers)
    write_mc_report(report, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scarvine",
        description="Vine copula models with latent-AR(1)-driven pair dependence",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_pit = sub.add_parser("pit", help="rank probability integral transform (CSV to CSV)")
    p_pit.add_argument("input")
    p_pit.add_argument("output")
    p_pit.set_defaults(func=cmd_pit)

    p_sim = sub.add_parser("simulate", help="simulate a uniform panel from a spec document")
    p_sim.add_argument("spec", help="model document (JSON)")
    p_sim.add_argument("T", type=int)
    p_sim.add_argument("output", help="panel CSV destination")
    p_sim.add_argument("--tau-out", default=None, help="write true tau paths here")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="order variables and fit the vine sequentially")
    p_fit.add_argument("data", help="uniform panel CSV")
    p_fit.add_argument("fit_out", help="fit document destination (JSON)")
    p_fit.add_argument("bic_out", help="per-tree cumulative BIC CSV destination")
    p_fit.add_argument("--max-tv-tree", type=int, default=1,
                       help="allow time variation up to this tree")
    p_fit.add_argument("--trunc-tree", type=int, default=None,
                       help="force independence above this tree")
    _add_run_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_smooth = sub.add_parser("smooth", help="smoothed (or implied) Kendall's tau paths")
    p_smooth.add_argument("fit", help="fit document (JSON)")
    p_smooth.add_argument("data", help="uniform panel CSV the fit was made on")
    p_smooth.add_argument("edges", help="comma-separated A~B selectors, or all-tv")
    p_smooth.add_argument("output", help="tau-path CSV destination")
    p_smooth.add_argument("--implied", action="store_true",
                          help="Monte Carlo implied pairwise tau for possibly non-adjacent pairs")
    p_smooth.add_argument("--mc-reps", type=int, default=400,
                          help="Monte Carlo draws per period for --implied")
    _add_run_flags(p_smooth, families=False)
    p_smooth.set_defaults(func=cmd_smooth)

    p_mc = sub.add_parser("mc", help="Monte Carlo recovery study")
    p_mc.add_argument("scenario", help="builtin scenario name or spec document path")
    p_mc.add_argument("output", help="report CSV destination")
    p_mc.add_argument("--reps", type=int, default=None, help="replications (default 50)")
    p_mc.add_argument("--T", type=int, default=1000, help="series length for file scenarios")
    _add_run_flags(p_mc, families=False)
    p_mc.set_defaults(func=cmd_mc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"scarvine: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
