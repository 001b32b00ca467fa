"""HTTP JSON service exposing graph and analysis results.

Sessions are in-memory: POST /sessions ingests a trace, builds the graph
for the requested targets and returns a session id; all reads address the
immutable session by id. Payloads are byte-identical with the CLI's JSON
output because both go through the same canonical serializer.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware

from . import analysis, graph, model
from .analysis import to_json_bytes
from .graph import BuildConfig, ProtoGraph


@dataclass
class AnalysisSession:
    session_id: str
    trace_path: str
    trace: model.WorkloadTrace
    config: BuildConfig
    graph: ProtoGraph
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )


def _json(payload, status_code: int = 200) -> Response:
    return Response(
        content=to_json_bytes(payload),
        status_code=status_code,
        media_type="application/json",
    )


def _error(status: int, message: str) -> Response:
    return _json({"error": message}, status_code=status)


def create_app(persist_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="contendscope", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )
    sessions: dict[str, AnalysisSession] = {}
    lock = threading.Lock()
    counter = {"n": 0}

    def get_session(sid: str) -> AnalysisSession | None:
        return sessions.get(sid)

    @app.post("/sessions")
    def create_session(body: dict = Body(...)):
        trace_path = body.get("trace_path")
        targets = body.get("targets") or []
        if not trace_path:
            return _error(400, "trace_path is required")
        if not targets:
            return _error(400, "targets is required")
        if not Path(trace_path).exists():
            return _error(400, f"trace file not found: {trace_path}")
        try:
            trace = model.ingest_trace(trace_path)
            config = BuildConfig.from_dict(body.get("config") or {})
            g = graph.analyze(trace, list(targets), config)
        except (model.TraceError, ValueError) as exc:
            return _error(400, str(exc))
        with lock:
            counter["n"] += 1
            sid = f"s{counter['n']}"
            session = AnalysisSession(
                session_id=sid,
                trace_path=trace_path,
                trace=trace,
                config=config,
                graph=g,
            )
            sessions[sid] = session
        if persist_dir:
            Path(persist_dir).mkdir(parents=True, exist_ok=True)
            graph.export_graph(g, Path(persist_dir) / f"{sid}.json")
        return _json(
            {
                "session_id": sid,
                "targets": g.targets,
                "nodes": len(g.nodes),
                "edges": len(g.edges),
                "created_at": session.created_at,
                "warnings": g.warnings,
            }
        )

    @app.get("/sessions")
    def list_sessions():
        return _json(
            {
                "sessions": [
                    {
                        "session_id": s.session_id,
                        "targets": s.graph.targets,
                        "trace_path": s.trace_path,
                        "created_at": s.created_at,
                    }
                    for s in sessions.values()
                ]
            }
        )

    @app.get("/sessions/{sid}/graph")
    def get_graph(sid: str):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        return _json(graph.graph_to_dict(session.graph))

    @app.get("/sessions/{sid}/topk")
    def get_topk(sid: str, k: int = 5, target: str = "", fix: str = ""):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        if k <= 0:
            return _error(400, "k must be positive")
        g = session.graph
        try:
            tq = target or _single_target(g)
            fixes = {}
            for part in fix.split(","):
                if part:
                    fld, _, val = part.partition("=")
                    fixes[fld] = val
            paths = analysis.topk_explanations(g, tq, k, fixes)
        except ValueError as exc:
            return _error(400, str(exc))
        return _json(analysis.explanations_to_json(paths))

    @app.get("/sessions/{sid}/aggressive")
    def get_aggressive(sid: str, k: int = 5):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        if k <= 0:
            return _error(400, "k must be positive")
        return _json(analysis.aggressive_sources(session.graph, k).to_dict())

    @app.get("/sessions/{sid}/slownodes")
    def get_slownodes(sid: str, weighted: bool = False):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        return _json(analysis.slow_nodes(session.graph, weighted=weighted).to_dict())

    @app.get("/sessions/{sid}/hotresources")
    def get_hotresources(sid: str, weighted: bool = False):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        return _json(
            analysis.hot_resources(session.graph, weighted=weighted).to_dict()
        )

    @app.get("/sessions/{sid}/baseline")
    def get_baseline(sid: str, method: str = "naive", target: str = ""):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        try:
            tq = target or _single_target(session.graph)
            if method == "naive":
                payload = analysis.baseline_naive_overlap(session.trace, tq).to_dict()
            elif method == "deep":
                payload = analysis.baseline_deep_overlap(session.trace, tq).to_dict()
            elif method == "blocked":
                payload = analysis.baseline_blocked_time(session.trace, tq)
            else:
                return _error(400, f"unknown baseline method {method!r}")
        except ValueError as exc:
            return _error(400, str(exc))
        return _json(payload)

    @app.get("/sessions/{sid}/windows")
    def get_windows(sid: str, bounds: str, target: str = ""):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        try:
            tq = target or _single_target(session.graph)
            windows = []
            for part in bounds.split(","):
                if part:
                    lo, _, hi = part.partition(":")
                    windows.append((float(lo), float(hi)))
            shares = analysis.windowed_analysis(
                session.trace, tq, windows, session.config
            )
        except ValueError as exc:
            return _error(400, str(exc))
        return _json(
            {
                "target": tq,
                "windows": [
                    {"t0": w[0], "t1": w[1], "shares": s}
                    for w, s in zip(windows, shares)
                ],
            }
        )

    @app.get("/sessions/{sid}/node/{node_id:path}")
    def get_node(sid: str, node_id: str):
        session = get_session(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        g = session.graph
        node = g.nodes.get(node_id)
        if node is None:
            return _error(404, f"unknown node {node_id}")
        children = []
        for e in sorted(g.incoming(node_id), key=lambda e: e.src):
            child = g.nodes[e.src]
            children.append(
                {
                    "id": child.id,
                    "level": child.level,
                    "payload": child.payload,
                    "vc": child.vc,
                    "dor": child.dor,
                    "if": e.impact,
                }
            )
        parents = []
        for e in sorted(g.outgoing(node_id), key=lambda e: e.dst):
            parent = g.nodes[e.dst]
            parents.append(
                {
                    "id": parent.id,
                    "level": parent.level,
                    "payload": parent.payload,
                    "vc": parent.vc,
                    "dor": parent.dor,
                    "if": e.impact,
                }
            )
        return _json(
            {
                "node": {
                    "id": node.id,
                    "level": node.level,
                    "payload": node.payload,
                    "vc": node.vc,
                    "dor": node.dor,
                },
                "children": children,
                "parents": parents,
            }
        )

    return app


def _single_target(g: ProtoGraph) -> str:
    if len(g.targets) != 1:
        raise ValueError("session has multiple targets; pass target=")
    return g.targets[0]
