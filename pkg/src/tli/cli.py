"""Command-line front end.

Every subcommand is a thin wrapper over a library call: experiments
(`bench`), policy fitting (`fit`), automaton synthesis (`synth`), single
closed-loop runs (`run`), demonstration generation (`demo-gen`), and the
HTTP/WebSocket service (`serve`). Results are written as CSV (tables),
JSON (raw), and SVG (curves).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .errors import WorkbenchError

BENCH_KINDS = ("table", "curve", "contrast", "generalization", "colors", "campaign")


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise WorkbenchError("config file must hold a JSON object")
    return data


def _experiment_config(overrides: dict, kind):
    from .bench import ExperimentConfig

    if "noise_levels" in overrides:
        overrides["noise_levels"] = tuple(overrides["noise_levels"])
    if "variants" in overrides:
        overrides["variants"] = tuple(overrides["variants"])
    return ExperimentConfig(kind=kind, **overrides)


def _write(out_dir: Optional[str], name: str, text: str) -> None:
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)
    print(f"wrote {path / name}")


def cmd_bench(args) -> int:
    from . import bench

    overrides = _load_config(args.config)
    if args.seed is not None:
        overrides["seed"] = args.seed

    if args.kind == "table":
        config = _experiment_config(overrides, bench.ExperimentKind.SINGLE_MODE_TABLE)
        if args.full_scale:
            config = config.full_scale()
        table, campaign = bench.run_single_mode_table(config)
        csv_text = bench.table_to_csv(table, config.noise_levels)
        print(csv_text, end="")
        _write(args.out, "table.csv", csv_text)
        rows = [
            {"variant": v, "noise": nl, "success_rate": r}
            for (v, nl), r in sorted(table.items())
        ]
        _write(args.out, "table.json", json.dumps({"rows": rows}, indent=2))
        return 0

    if args.kind == "curve":
        config = _experiment_config(overrides, bench.ExperimentKind.CUTS_CURVE)
        if args.full_scale:
            config = config.full_scale()
        curves, campaign = bench.run_cuts_curve(config)
        payload = {}
        for (kind, nl), stats in curves.items():
            label = f"{kind}_noise{nl:g}"
            payload[label] = stats
            _write(args.out, f"curve_{label}.svg", bench.curve_to_svg(stats, label))
            print(
                f"{label}: mean {stats['mean'][0]:.1f}% -> {stats['mean'][-1]:.1f}%"
                f" over budgets {stats['budgets']}"
            )
        _write(args.out, "curve.json", bench.results_to_json(payload))
        return 0

    if args.kind == "contrast":
        result = bench.run_multimode(seed=overrides.get("seed", 0))
        print(
            f"modulation off: {result.off_verdict.value} ({result.off_replans} replans); "
            f"on: {result.on_verdict.value} ({result.on_replans} replans, "
            f"trace satisfied: {result.on_trace_satisfied})"
        )
        _write(args.out, "contrast.json", bench.results_to_json(result))
        return 0

    if args.kind == "generalization":
        runs = bench.run_generalization(seed=overrides.get("seed", 0))
        for r in runs:
            print(
                f"{r.spec_name}: {r.verdict.value}, satisfied={r.satisfied}, "
                f"safety={r.safety_satisfied}, goal visits={r.goal_visits}"
            )
        _write(args.out, "generalization.json", bench.results_to_json(runs))
        return 0

    if args.kind == "colors":
        traces = bench.run_color_tracing()
        for t in traces:
            print(f"{t.spec_name}: route {'->'.join(t.nominal_route)}")
        _write(args.out, "colors.json", bench.results_to_json(traces))
        return 0

    # campaign
    result = bench.run_perturbation_campaign(
        runs=overrides.get("runs", 500),
        seed=overrides.get("seed", 0),
        max_events=overrides.get("max_events", 10),
    )
    print(
        f"{result.successes}/{result.runs} Success, "
        f"{result.satisfied}/{result.runs} satisfied, "
        f"{result.runtime_s:.1f}s"
    )
    _write(args.out, "campaign.json", bench.results_to_json(result))
    return 0


def cmd_fit(args) -> int:
    from . import bc, lpvds
    from .pipeline import build_policy_library
    from .sim import builtin_scene, demos_for_scene

    scene = builtin_scene(args.scene)
    demos = demos_for_scene(scene, args.scene, count=args.demos, seed=args.seed)
    library = build_policy_library(scene, demos, kind=args.kind, seed=args.seed)
    manifest = []
    for key in sorted(library.policies, key=lambda k: (k[0], k[1] or "")):
        policy = library.policies[key]
        name = f"{key[0]}__{key[1] or 'stay'}.json"
        manifest.append(
            {
                "mode": key[0],
                "target": key[1],
                "kind": policy.kind,
                "attractor": [float(v) for v in policy.x_star],
                "file": name,
            }
        )
        if args.out is not None:
            blob = (
                lpvds.model_to_json(policy.model)
                if policy.kind in ("ds", "contraction")
                else bc.policy_to_json(policy.model)
            )
            _write(args.out, name, blob)
        print(
            f"{key[0]} -> {key[1] or '(stay)'}: {policy.kind} policy, "
            f"attractor ({policy.x_star[0]:.3f}, {policy.x_star[1]:.3f})"
        )
    _write(args.out, "library.json", json.dumps({"scene": args.scene, "policies": manifest}, indent=2))
    return 0


def cmd_synth(args) -> int:
    from .ltl import parse_spec, synthesize
    from .sim import builtin_spec_text

    source = (
        Path(args.spec).read_text() if args.spec.endswith(".ltl") else builtin_spec_text(args.spec)
    )
    automaton = synthesize(parse_spec(source))
    view = {
        "modes": [m.name for m in automaton.modes],
        "edges": sorted([i.name, j.name] for i, j in automaton.edges),
        "goals": sorted(m.name for m in automaton.goal_modes),
        "strategy": {i.name: j.name for i, j in automaton.strategy},
    }
    print(json.dumps(view, indent=2))
    return 0


def cmd_run(args) -> int:
    from .core import trace_to_json
    from .executor import ExecutorConfig, discrete_pairs, run_task, trace_satisfies
    from .ltl import parse_spec
    from .pipeline import build_policy_library
    from .sim import (
        builtin_scene,
        builtin_spec_text,
        demos_for_scene,
        schedule_from_json,
    )

    scene = builtin_scene(args.scene)
    spec = parse_spec(builtin_spec_text(args.spec))
    demos = demos_for_scene(scene, args.scene, count=args.demos, seed=args.seed)
    kind = "bc" if args.variant.startswith("bc") else "ds"
    library = build_policy_library(scene, demos, kind=kind, seed=args.seed)
    config = ExecutorConfig(
        seed=args.seed,
        max_steps=args.max_steps,
        modulation_enabled=args.variant.endswith("+mod"),
    )
    schedule = (
        schedule_from_json(Path(args.schedule).read_text()) if args.schedule else None
    )
    outcome = run_task(scene, spec, library, config=config, schedule=schedule)
    sequence = [mode.name for _, mode in discrete_pairs(outcome.trace)]
    view = {
        "verdict": outcome.verdict.value,
        "steps": outcome.steps,
        "replans": outcome.replans,
        "cuts_added": outcome.cuts_added,
        "mode_sequence": sequence,
        "satisfied": trace_satisfies(outcome.spec, outcome.trace),
    }
    print(json.dumps(view, indent=2))
    if args.trace is not None:
        Path(args.trace).write_text(trace_to_json(outcome.trace))
        print(f"wrote {args.trace}")
    return 0


def cmd_demo_gen(args) -> int:
    from .core import save_demonstrations
    from .sim import builtin_scene, demos_for_scene

    scene = builtin_scene(args.scene)
    demos = demos_for_scene(scene, args.scene, count=args.count, seed=args.seed)
    save_demonstrations(args.out, demos)
    total = sum(len(d.positions()) for d in demos)
    print(f"wrote {len(demos)} demonstrations ({total} samples) to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(host=args.host, port=args.port, assets_dir=args.assets, static_dir=args.static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tli",
        description="Workbench for mode-sequenced dynamical-system policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run an experiment and write CSV/JSON/SVG results")
    p.add_argument("kind", choices=BENCH_KINDS)
    p.add_argument("--config", help="JSON file with experiment parameters")
    p.add_argument("--out", help="directory for result files")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--full-scale",
        action="store_true",
        help="full reference protocol size (slower)",
    )
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("fit", help="fit a policy library from generated demonstrations")
    p.add_argument("--scene", required=True)
    p.add_argument("--kind", choices=("ds", "bc"), default="ds")
    p.add_argument("--demos", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for serialized models")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("synth", help="synthesize a mode automaton from a task formula")
    p.add_argument("--spec", required=True, help="builtin name or path to a .ltl file")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("run", help="one closed-loop run from start to verdict")
    p.add_argument("--scene", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--variant", choices=("bc", "bc+mod", "ds", "ds+mod"), default="ds+mod")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--demos", type=int, default=5)
    p.add_argument("--max-steps", type=int, default=20000)
    p.add_argument("--schedule", help="JSON file with a perturbation schedule")
    p.add_argument("--trace", help="write the executed trace to this JSON file")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("demo-gen", help="generate demonstrations for a builtin scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON file")
    p.set_defaults(fn=cmd_demo_gen)

    p = sub.add_parser("serve", help="start the HTTP/WebSocket session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--assets", help="directory with scenes/*.json and specs/*.ltl")
    p.add_argument("--static", help="directory with a built web client to serve at /")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except WorkbenchError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
