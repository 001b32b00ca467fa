"""Command-line entry points for the full pipeline.

Every command emits machine-readable JSON (or CSV where noted) on stdout;
``--pretty`` switches ranked outputs to aligned human tables. Exit codes:
0 success, 1 missing files or analysis errors, 2 flag/usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, graph, model, sim
from .analysis import to_json_bytes
from .blame import WorkloadSlicing


def _fail(msg: str, code: int = 1) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _emit(obj) -> None:
    sys.stdout.buffer.write(to_json_bytes(obj))


def _load_trace(path: str, strict: bool = False) -> model.WorkloadTrace:
    if not Path(path).exists():
        raise FileNotFoundError(f"trace file not found: {path}")
    return model.ingest_trace(path, strict=strict)


def _build_config(args) -> graph.BuildConfig:
    return graph.BuildConfig(
        hosts=set(args.hosts) if getattr(args, "hosts", None) else None,
        resources=set(args.resources) if getattr(args, "resources", None) else None,
        source_users=set(args.source_users)
        if getattr(args, "source_users", None)
        else None,
        scope=getattr(args, "scope", "all"),
    )


def _parse_fix(pairs: list[str]) -> dict[str, str]:
    fix = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--fix expects field=value, got {pair!r}")
        fld, val = pair.split("=", 1)
        fix[fld] = val
    return fix


def _parse_bounds(text: str) -> list[tuple[float, float]]:
    windows = []
    for part in text.split(","):
        if not part:
            continue
        lo, _, hi = part.partition(":")
        windows.append((float(lo), float(hi)))
    return windows


def _print_ranked(
    ranked: analysis.RankedList, pretty: bool, fmt: str = "json"
) -> None:
    if fmt == "csv":
        rows = [[ent, score] for ent, score in ranked.entries]
        sys.stdout.write(analysis.rows_to_csv(["id", "score"], rows))
    elif pretty:
        for ent, score in ranked.entries:
            print(f"{ent:32s} {score:.6f}")
    else:
        _emit(ranked.to_dict())


# -- command implementations ---------------------------------------------------


def cmd_ingest(args) -> int:
    trace = _load_trace(args.trace, strict=args.strict)
    violations = model.validate(trace)
    _emit(
        {
            "queries": len(trace.queries),
            "stages": len(trace.stages),
            "tasks": len(trace.tasks),
            "hosts": len(trace.hosts),
            "heartbeat": trace.heartbeat_interval,
            "violations": [str(v) for v in violations],
        }
    )
    return 0


def cmd_simulate(args) -> int:
    if args.list:
        _emit({"scenarios": sorted(sim.scenario_library())})
        return 0
    if bool(args.scenario) == bool(args.config):
        raise ValueError("exactly one of --scenario / --config is required")
    if args.scenario:
        lib = sim.scenario_library(seed=args.seed)
        if args.scenario not in lib:
            raise ValueError(
                f"unknown scenario {args.scenario!r}; try --list"
            )
        config = lib[args.scenario]
    else:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = sim.SimConfig.from_dict(json.load(fh))
        if args.seed is not None:
            config.seed = args.seed
    trace, truth = sim.simulate_to_files(config, args.out, args.truth)
    _emit(
        {
            "trace": args.out,
            "truth": args.truth,
            "tasks": len(trace.tasks),
            "queries": len(trace.queries),
            "aggressors": truth.aggressors,
        }
    )
    return 0


def cmd_analyze(args) -> int:
    trace = _load_trace(args.trace)
    config = _build_config(args)
    g = graph.analyze(trace, args.target, config)
    graph.export_graph(g, args.out)
    for warning in g.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _emit(
        {
            "graph": args.out,
            "targets": g.targets,
            "nodes": len(g.nodes),
            "edges": len(g.edges),
        }
    )
    return 0


def _load_graph(path: str) -> graph.ProtoGraph:
    if not Path(path).exists():
        raise FileNotFoundError(f"graph file not found: {path}")
    return graph.load_graph(path)


def _pick_target(g: graph.ProtoGraph, target: str | None) -> str:
    if target:
        if target not in g.targets:
            raise ValueError(f"unknown target query {target!r}")
        return target
    if len(g.targets) != 1:
        raise ValueError("graph has multiple targets; pass --target")
    return g.targets[0]


def cmd_topk(args) -> int:
    if args.k <= 0:
        raise _Usage("--k must be a positive integer")
    g = _load_graph(args.graph)
    target = _pick_target(g, args.target)
    paths = analysis.topk_explanations(g, target, args.k, _parse_fix(args.fix))
    doc = analysis.explanations_to_json(paths)
    if args.format == "csv":
        sys.stdout.write(analysis.rows_to_csv(doc["columns"], doc["rows"]))
    elif args.pretty:
        for p in paths:
            print(
                f"{p.weight:.6f}  {p.sq} -> {p.ss} -> {p.res}/{p.res_p}"
                f" @ {p.host} -> {p.ts} -> {p.tq}"
            )
    else:
        _emit(doc)
    return 0


def cmd_aggressive(args) -> int:
    if args.k <= 0:
        raise _Usage("--k must be a positive integer")
    g = _load_graph(args.graph)
    _print_ranked(analysis.aggressive_sources(g, args.k), args.pretty, args.format)
    return 0


def cmd_slownodes(args) -> int:
    g = _load_graph(args.graph)
    _print_ranked(analysis.slow_nodes(g, weighted=args.weighted), args.pretty, args.format)
    return 0


def cmd_hotresources(args) -> int:
    g = _load_graph(args.graph)
    _print_ranked(analysis.hot_resources(g, weighted=args.weighted), args.pretty, args.format)
    return 0


def cmd_baseline(args) -> int:
    trace = _load_trace(args.trace)
    if args.method == "naive":
        _print_ranked(
            analysis.baseline_naive_overlap(trace, args.target), args.pretty, args.format
        )
    elif args.method == "deep":
        _print_ranked(
            analysis.baseline_deep_overlap(trace, args.target), args.pretty, args.format
        )
    else:
        _emit(analysis.baseline_blocked_time(trace, args.target))
    return 0


def cmd_windows(args) -> int:
    trace = _load_trace(args.trace)
    windows = _parse_bounds(args.bounds)
    config = _build_config(args)
    shares = analysis.windowed_analysis(trace, args.target, windows, config)
    _emit(
        {
            "target": args.target,
            "windows": [
                {"t0": w[0], "t1": w[1], "shares": s}
                for w, s in zip(windows, shares)
            ],
        }
    )
    return 0


def cmd_export(args) -> int:
    g = _load_graph(args.graph)
    doc = graph.graph_to_dict(g)
    if args.what == "nodes":
        columns = ["id", "level", "vc", "dor"]
        rows = [
            [n["id"], n["level"], n["vc"], json.dumps(n["dor"], sort_keys=True)]
            for n in doc["nodes"]
        ]
        payload = doc["nodes"]
    elif args.what == "edges":
        columns = ["from", "to", "if"]
        rows = [[e["from"], e["to"], e["if"]] for e in doc["edges"]]
        payload = doc["edges"]
    else:
        target = _pick_target(g, args.target)
        paths = analysis.enumerate_explanations(g, target)
        paths.sort(key=lambda p: (-p.weight, p.path_id))
        exp = analysis.explanations_to_json(paths)
        columns, rows = exp["columns"], exp["rows"]
        payload = exp
    text = (
        analysis.rows_to_csv(columns, rows)
        if args.format == "csv"
        else to_json_bytes(payload).decode()
    )
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _emit({"written": args.out})
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(persist_dir=args.persist)
    port = args.port or int(os.environ.get("CONTENDSCOPE_PORT", "8780"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


class _Usage(Exception):
    """Flag-contract violation that should exit with the usage code."""


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="contendscope",
        description="Contention blame attribution for dataflow workloads",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="parse and validate a trace file")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("simulate", help="generate a synthetic workload trace")
    sp.add_argument("--scenario")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--out", default="trace.jsonl")
    sp.add_argument("--truth", default="truth.json")
    sp.add_argument("--list", action="store_true", help="list scenarios")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="build the explanation graph")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--target", action="append", required=True)
    sp.add_argument("--hosts", nargs="*")
    sp.add_argument("--resources", nargs="*")
    sp.add_argument("--source-users", dest="source_users", nargs="*")
    sp.add_argument(
        "--scope", default="all", help="all | stage:<id> | longest-path"
    )
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("topk", help="top-k explanation paths")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--target")
    sp.add_argument("--fix", action="append", default=[], metavar="FIELD=VALUE")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--pretty", action="store_true")
    sp.set_defaults(func=cmd_topk)

    sp = sub.add_parser("aggressive", help="rank sources by total impact")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--pretty", action="store_true")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_aggressive)

    sp = sub.add_parser("slownodes", help="rank hosts by outgoing impact")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--weighted", action="store_true")
    sp.add_argument("--pretty", action="store_true")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_slownodes)

    sp = sub.add_parser("hotresources", help="rank requests by outgoing impact")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--weighted", action="store_true")
    sp.add_argument("--pretty", action="store_true")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_hotresources)

    sp = sub.add_parser("baseline", help="overlap / blocked-time baselines")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument(
        "--method", choices=["naive", "deep", "blocked"], required=True
    )
    sp.add_argument("--pretty", action="store_true")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("windows", help="per-window responsibility shares")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--bounds", required=True, metavar="T0:T1,T0:T1,...")
    sp.add_argument("--resources", nargs="*")
    sp.add_argument("--hosts", nargs="*")
    sp.set_defaults(func=cmd_windows)

    sp = sub.add_parser("export", help="export graph tables or explanations")
    sp.add_argument("--graph", required=True)
    sp.add_argument(
        "--what", choices=["nodes", "edges", "explanations"], default="nodes"
    )
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--target")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("serve", help="run the HTTP analysis service")
    sp.add_argument("--port", type=int)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--persist", help="directory for per-session graph JSON")
    sp.set_defaults(func=cmd_serve)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Usage as exc:
        parser.error(str(exc))  # exits 2
        return 2
    except FileNotFoundError as exc:
        return _fail(str(exc))
    except (ValueError, model.TraceError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
