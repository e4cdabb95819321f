"""Command line entry points.

    edgeloop run --config run.yaml [--scenario S] [--controller C]
                 [--seeds 1,2,3] [--out DIR]
    edgeloop compare a.jsonl b.jsonl [--phase eval] [--json out.json]
    edgeloop alloc --instance instance.json [--mode exact|greedy]
    edgeloop plot-data metrics.jsonl --out series.csv [--phase train]
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import allocator, reporting
from .config import CONTROLLERS, SCENARIOS, load_config, resolve_out_dir
from .experiment import run_experiment


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeloop")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a seeded experiment sweep")
    run_p.add_argument("--config", default=None, help="YAML run config")
    run_p.add_argument("--scenario", choices=SCENARIOS, default=None)
    run_p.add_argument("--controller", choices=CONTROLLERS, default=None)
    run_p.add_argument("--seeds", type=_parse_seeds, default=None, help="comma separated")
    run_p.add_argument("--episodes", type=int, default=None)
    run_p.add_argument("--out", default=None, help="metrics output directory")

    cmp_p = sub.add_parser("compare", help="compare two metrics files")
    cmp_p.add_argument("metrics_a")
    cmp_p.add_argument("metrics_b")
    cmp_p.add_argument("--phase", default=None, help="restrict to one phase")
    cmp_p.add_argument("--json", dest="json_out", default=None, help="also write JSON")

    alloc_p = sub.add_parser("alloc", help="solve one allocation instance")
    alloc_p.add_argument("--instance", required=True, help="instance JSON file")
    alloc_p.add_argument("--mode", choices=["exact", "greedy"], default="exact")

    plot_p = sub.add_parser("plot-data", help="emit per-episode plot series as CSV")
    plot_p.add_argument("metrics")
    plot_p.add_argument("--out", required=True)
    plot_p.add_argument("--phase", default=None)

    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else load_config(None)
    overrides = {}
    if args.scenario:
        overrides["scenario"] = args.scenario
    if args.controller:
        overrides["controller"] = args.controller
    if args.seeds:
        overrides["seeds"] = args.seeds
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    out_dir = resolve_out_dir(args.out, cfg)
    result = run_experiment(cfg, out_dir)
    for seed in sorted(result.results):
        res = result.results[seed]
        note = " DIVERGED" if res.diverged else ""
        evals = [r for r in res.records if r.phase == "eval"]
        tail = ""
        if evals:
            mean_eval = sum(r.cumulative_reward for r in evals) / len(evals)
            tail = f" eval_reward={mean_eval:.2f}"
        print(
            f"seed {seed}: {len(res.records)} episodes"
            f" -> {result.metrics_paths[seed]}{tail}{note}"
        )
    print(f"summary -> {result.summary_path}")
    return 0


def _filter_phase(records, phase):
    if phase is None:
        return records
    return [r for r in records if r.phase == phase]


def _cmd_compare(args) -> int:
    a = _filter_phase(reporting.read_metrics(args.metrics_a), args.phase)
    b = _filter_phase(reporting.read_metrics(args.metrics_b), args.phase)
    comparisons = reporting.compare(a, b)
    print(reporting.render_table(comparisons, label_a="run_a", label_b="run_b"))
    if args.json_out:
        with open(args.json_out, "w") as f:
            json.dump(reporting.comparison_to_dict(comparisons), f, indent=2)
        print(f"json -> {args.json_out}")
    return 0


def _cmd_alloc(args) -> int:
    modules, resources, weights = allocator.load_instance(args.instance)
    if args.mode == "exact":
        plan = allocator.solve(modules, resources, weights)
    else:
        plan = allocator.solve_greedy(modules, resources, weights)
    violations = allocator.validate(plan, modules, resources)
    out = allocator.plan_to_dict(plan)
    out["violations"] = violations
    print(json.dumps(out, indent=2))
    return 0 if not violations else 1


def _cmd_plot_data(args) -> int:
    records = _filter_phase(reporting.read_metrics(args.metrics), args.phase)
    if not records:
        print("no records matched", file=sys.stderr)
        return 1
    reporting.emit_plot_data(records, args.out)
    print(f"csv -> {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "compare": _cmd_compare,
        "alloc": _cmd_alloc,
        "plot-data": _cmd_plot_data,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
