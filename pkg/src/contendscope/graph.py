"""The 7-level explanation DAG: construction, impact factors, responsibility.

Levels, from the analyzed side down to the blamed side:

    L0 target query          VC = 1 (configurable per query/user)
    L1 target stage          VC = work done (cumulative cpu-seconds)
    L2 (stage, resource)     VC = sum over tasks of the full penalty integral
    L3 (stage, request, host)VC = same integral, blocked numerator, per host
    L4 (stage, request, host, source stage) VC = aggregated blame
    L5 source stage          VC = 1 (configurable)
    L6 source query          VC = 1 (configurable)

Impact flows along edges from level l+1 to level l. Each edge carries an
impact factor: the share of the child's received impact attributed to that
parent (parent VC normalized over all parents; uniform when all zero).
A node's degree of responsibility toward a target query is the sum over
all paths to that query's L0 node of the product of edge factors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .blame import (
    GcSource,
    KnownCauseSource,
    SourceEntity,
    TaskSource,
    UnknownSource,
    WorkloadSlicing,
    blame_vector,
    concurrent_sources,
    ideal_vector,
    synthetic_sources,
)
from .model import (
    CLASS_REQUESTS,
    REQUEST_INDEX,
    ResourceClass,
    ResourceRequest,
    WorkloadTrace,
)

UNKNOWN_KEY = "Unknown"
GC_KEY = "GC"


@dataclass
class BuildConfig:
    """Filters and weighting knobs for one graph build."""

    hosts: set[str] | None = None
    resources: set[str] | None = None  # class and/or request names
    source_users: set[str] | None = None
    scope: str = "all"  # "all" | "stage:<id>" | "longest-path"
    blocked_at_resource_level: bool = False
    query_weights: dict[str, float] = field(default_factory=dict)
    user_weights: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "BuildConfig":
        return cls(
            hosts=set(d["hosts"]) if d.get("hosts") else None,
            resources=set(d["resources"]) if d.get("resources") else None,
            source_users=set(d["source_users"]) if d.get("source_users") else None,
            scope=d.get("scope", "all"),
            blocked_at_resource_level=bool(d.get("blocked_at_resource_level", False)),
            query_weights={k: float(v) for k, v in d.get("query_weights", {}).items()},
            user_weights={k: float(v) for k, v in d.get("user_weights", {}).items()},
        )

    def to_dict(self) -> dict:
        return {
            "hosts": sorted(self.hosts) if self.hosts else None,
            "resources": sorted(self.resources) if self.resources else None,
            "source_users": sorted(self.source_users) if self.source_users else None,
            "scope": self.scope,
            "blocked_at_resource_level": self.blocked_at_resource_level,
            "query_weights": self.query_weights,
            "user_weights": self.user_weights,
        }

    def request_allowed(self, req: ResourceRequest) -> bool:
        if self.resources is None:
            return True
        cls = None
        for c, reqs in CLASS_REQUESTS.items():
            if req in reqs:
                cls = c
        return req.value in self.resources or (cls and cls.value in self.resources)

    def class_allowed(self, cls: ResourceClass) -> bool:
        if self.resources is None:
            return True
        if cls.value in self.resources:
            return True
        return any(r.value in self.resources for r in CLASS_REQUESTS[cls])

    def host_allowed(self, host_id: str) -> bool:
        return self.hosts is None or host_id in self.hosts


@dataclass
class GraphNode:
    id: str
    level: int
    payload: dict
    vc: float = 0.0
    dor: dict[str, float] = field(default_factory=dict)


@dataclass
class GraphEdge:
    src: str  # node at level l+1 (impact source side)
    dst: str  # node at level l (impact target side)
    impact: float = 0.0  # IF


class ProtoGraph:
    def __init__(
        self,
        targets: list[str] | None = None,
        config: BuildConfig | None = None,
    ):
        self.nodes: dict[str, GraphNode] = {}
        self.edges: list[GraphEdge] = []
        self.targets: list[str] = targets or []
        self.config = config or BuildConfig()
        self.warnings: list[str] = []
        self._out: dict[str, list[GraphEdge]] | None = None
        self._in: dict[str, list[GraphEdge]] | None = None

    def add_node(self, node: GraphNode) -> GraphNode:
        self.nodes[node.id] = node
        self._out = self._in = None
        return node

    def add_edge(self, src: str, dst: str) -> None:
        self.edges.append(GraphEdge(src=src, dst=dst))
        self._out = self._in = None

    def outgoing(self, node_id: str) -> list[GraphEdge]:
        if self._out is None:
            self._out = {}
            for e in self.edges:
                self._out.setdefault(e.src, []).append(e)
        return self._out.get(node_id, [])

    def incoming(self, node_id: str) -> list[GraphEdge]:
        if self._in is None:
            self._in = {}
            for e in self.edges:
                self._in.setdefault(e.dst, []).append(e)
        return self._in.get(node_id, [])

    def level_nodes(self, level: int) -> list[GraphNode]:
        return sorted(
            (n for n in self.nodes.values() if n.level == level),
            key=lambda n: n.id,
        )


# -- node id helpers ---------------------------------------------------------


def _l0_id(qid: str) -> str:
    return f"L0|{qid}"


def _l1_id(qid: str, sid: str) -> str:
    return f"L1|{qid}|{sid}"


def _l2_id(qid: str, sid: str, cls: ResourceClass) -> str:
    return f"L2|{qid}|{sid}|{cls.value}"


def _l3_id(qid: str, sid: str, req: ResourceRequest, host: str) -> str:
    return f"L3|{qid}|{sid}|{req.value}|{host}"


def source_key(src: SourceEntity) -> tuple[str, str]:
    """(stage-level key, query-level key) for grouping a blame source."""
    if isinstance(src, TaskSource):
        return f"{src.query_id}/{src.stage_id}", src.query_id
    if isinstance(src, GcSource):
        return GC_KEY, GC_KEY
    if isinstance(src, KnownCauseSource):
        return f"known:{src.name}", f"known:{src.name}"
    if isinstance(src, UnknownSource):
        return UNKNOWN_KEY, UNKNOWN_KEY
    raise TypeError(f"unsupported source {src!r}")


def _l4_id(qid: str, sid: str, req: ResourceRequest, host: str, skey: str) -> str:
    return f"L4|{qid}|{sid}|{req.value}|{host}|{skey}"


def _l5_id(skey: str) -> str:
    return f"L5|{skey}"


def _l6_id(qkey: str) -> str:
    return f"L6|{qkey}"


# -- scope handling ----------------------------------------------------------


def _stage_wall_time(trace: WorkloadTrace, sid: str) -> float:
    tasks = trace.stage_tasks(sid)
    if not tasks:
        return 0.0
    return max(t.end_time for t in tasks) - min(t.start_time for t in tasks)


def _longest_path_stages(trace: WorkloadTrace, qid: str) -> list[str]:
    """Stages on the execution path maximizing total wall time."""
    stages = sorted(s for s, st in trace.stages.items() if st.query_id == qid)
    best: dict[str, float] = {}
    back: dict[str, str | None] = {}

    def solve(sid: str) -> float:
        if sid in best:
            return best[sid]
        dur = _stage_wall_time(trace, sid)
        parents = sorted(trace.stages[sid].parent_stage_ids)
        best[sid] = dur
        back[sid] = None
        for p in parents:
            cand = dur + solve(p)
            if cand > best[sid]:
                best[sid] = cand
                back[sid] = p
        return best[sid]

    if not stages:
        return []
    tip = max(stages, key=lambda s: (solve(s), s))
    path = []
    cur: str | None = tip
    while cur is not None:
        path.append(cur)
        cur = back[cur]
    return sorted(path)


def _target_stages(trace: WorkloadTrace, qid: str, config: BuildConfig) -> list[str]:
    scope = config.scope
    all_stages = sorted(s for s, st in trace.stages.items() if st.query_id == qid)
    if scope == "all":
        return all_stages
    if scope == "longest-path":
        return _longest_path_stages(trace, qid)
    if scope.startswith("stage:"):
        sid = scope.split(":", 1)[1]
        if sid not in trace.stages or trace.stages[sid].query_id != qid:
            raise ValueError(f"stage {sid!r} does not belong to query {qid!r}")
        return [sid]
    raise ValueError(f"unknown target-stage scope {scope!r}")


# -- construction ------------------------------------------------------------


def build_graph(
    trace: WorkloadTrace,
    targets: list[str],
    config: BuildConfig | None = None,
    slicing: WorkloadSlicing | None = None,
) -> ProtoGraph:
    """Construct nodes, edges and vertex contributions for target queries."""
    config = config or BuildConfig()
    for qid in targets:
        if qid not in trace.queries:
            raise ValueError(f"unknown target query {qid!r}")
    g = ProtoGraph(targets=list(targets), config=config)
    ws = slicing or WorkloadSlicing(trace)

    def query_weight(qid: str) -> float:
        if qid in config.query_weights:
            return config.query_weights[qid]
        user = trace.queries[qid].user if qid in trace.queries else ""
        return config.user_weights.get(user, 1.0)

    classes = [c for c in ResourceClass if config.class_allowed(c)]
    requests = [r for r in ResourceRequest if config.request_allowed(r)]
    any_content = False

    # L5/L6 bookkeeping: stage key -> (query key, payload)
    l5_seen: dict[str, str] = {}

    for qid in sorted(set(targets)):
        stages = _target_stages(trace, qid, config)
        if not stages:
            g.warnings.append(f"target {qid}: empty scope after filters")
            continue
        l0 = g.add_node(
            GraphNode(
                id=_l0_id(qid),
                level=0,
                payload={"query": qid},
                vc=query_weight(qid),
            )
        )
        summary = _target_summary(ws, trace, qid)
        l0.payload.update(summary)

        for sid in stages:
            stage = trace.stages[sid]
            stage_hosts = sorted(
                {
                    trace.tasks[tid].host_id
                    for tid in stage.task_ids
                    if config.host_allowed(trace.tasks[tid].host_id)
                }
            )
            l1 = g.add_node(
                GraphNode(
                    id=_l1_id(qid, sid),
                    level=1,
                    payload={"query": qid, "stage": sid},
                    vc=stage.work_done,
                )
            )
            g.add_edge(l1.id, l0.id)

            # Per (request, host) penalty integrals over the stage's tasks.
            full_int: dict[tuple[ResourceRequest, str], float] = {}
            blocked_int: dict[tuple[ResourceRequest, str], float] = {}
            blame_acc: dict[tuple[ResourceRequest, str, str], float] = {}
            src_query_of: dict[str, str] = {}

            for tid in sorted(stage.task_ids):
                task = trace.tasks[tid]
                if not config.host_allowed(task.host_id):
                    continue
                any_content = True
                hs = ws.host(task.host_id)
                ts = hs.by_task[tid]
                fi = kernels.ratp_integrals(ts.wt, ts.ct, ts.ra, ts.dtau)
                bi = kernels.ratp_blocked_integrals(ts.wt, ts.ra, ts.dtau)
                for req in requests:
                    j = REQUEST_INDEX[req]
                    key = (req, task.host_id)
                    full_int[key] = full_int.get(key, 0.0) + float(fi[j])
                    blocked_int[key] = blocked_int.get(key, 0.0) + float(bi[j])

                sources: list[SourceEntity] = []
                for src in concurrent_sources(hs, tid):
                    if config.source_users is not None:
                        user = trace.queries[src.query_id].user
                        if user not in config.source_users:
                            continue
                    sources.append(src)
                sources.extend(synthetic_sources(hs))
                for src in sources:
                    skey, qkey = source_key(src)
                    src_query_of[skey] = qkey
                    vec = blame_vector(hs, tid, src)
                    for req in requests:
                        j = REQUEST_INDEX[req]
                        if vec[j] != 0.0:
                            akey = (req, task.host_id, skey)
                            blame_acc[akey] = blame_acc.get(akey, 0.0) + float(vec[j])

            for cls in classes:
                integ = blocked_int if config.blocked_at_resource_level else full_int
                vc2 = sum(
                    integ.get((req, h), 0.0)
                    for req in CLASS_REQUESTS[cls]
                    for h in stage_hosts
                )
                l2 = g.add_node(
                    GraphNode(
                        id=_l2_id(qid, sid, cls),
                        level=2,
                        payload={"query": qid, "stage": sid, "resource": cls.value},
                        vc=vc2,
                    )
                )
                g.add_edge(l2.id, l1.id)
                for req in CLASS_REQUESTS[cls]:
                    if req not in requests:
                        continue
                    for host in stage_hosts:
                        l3 = g.add_node(
                            GraphNode(
                                id=_l3_id(qid, sid, req, host),
                                level=3,
                                payload={
                                    "query": qid,
                                    "stage": sid,
                                    "request": req.value,
                                    "host": host,
                                },
                                vc=blocked_int.get((req, host), 0.0),
                            )
                        )
                        g.add_edge(l3.id, l2.id)
                        acc_items = sorted(
                            blame_acc.items(),
                            key=lambda kv: (kv[0][0].value, kv[0][1], kv[0][2]),
                        )
                        for (r4, h4, skey), beta in acc_items:
                            if r4 is not req or h4 != host or beta == 0.0:
                                continue
                            l4 = g.add_node(
                                GraphNode(
                                    id=_l4_id(qid, sid, req, host, skey),
                                    level=4,
                                    payload={
                                        "query": qid,
                                        "stage": sid,
                                        "request": req.value,
                                        "host": host,
                                        "source": skey,
                                    },
                                    vc=beta,
                                )
                            )
                            g.add_edge(l4.id, l3.id)
                            l5_seen[skey] = src_query_of[skey]
                            g.add_edge(_l5_id(skey), l4.id)

    # L5/L6 for every source that survived pruning.
    l6_seen: set[str] = set()
    for skey in sorted(l5_seen):
        qkey = l5_seen[skey]
        weight = 1.0
        if "/" in skey:  # real source stage: weight by its query/user
            weight = query_weight(qkey)
        g.add_node(
            GraphNode(
                id=_l5_id(skey),
                level=5,
                payload={"source": skey, "source_query": qkey},
                vc=weight,
            )
        )
        g.add_edge(_l6_id(qkey), _l5_id(skey))
        l6_seen.add(qkey)
    for qkey in sorted(l6_seen):
        weight = query_weight(qkey) if qkey in trace.queries else 1.0
        g.add_node(
            GraphNode(
                id=_l6_id(qkey), level=6, payload={"source": qkey}, vc=weight
            )
        )

    if targets and not any_content:
        g.warnings.append("empty scope after filters: graph has no task content")
    return g


def _target_summary(
    ws: WorkloadSlicing, trace: WorkloadTrace, qid: str
) -> dict:
    """Blocked seconds and mean slowdown per resource class for one query."""
    blocked: dict[str, float] = {c.value: 0.0 for c in ResourceClass}
    slow: dict[str, float] = {c.value: 0.0 for c in ResourceClass}
    total_dur = 0.0
    ideals: dict[str, np.ndarray] = {}
    sums = np.zeros(len(REQUEST_INDEX))
    for task in trace.tasks.values():
        if task.query_id != qid:
            continue
        hs = ws.host(task.host_id)
        if task.host_id not in ideals:
            ideals[task.host_id] = ideal_vector(hs)
        ts = hs.by_task[task.task_id]
        sums += kernels.slowdown_sums(ts.wt, ts.ct, ts.ra, ts.dtau, ideals[task.host_id])
        total_dur += task.duration
        for req, j in REQUEST_INDEX.items():
            blocked[_class_of(req).value] += float(ts.wt[:, j].sum())
    if total_dur > 0:
        per_req = sums / total_dur
        for req, j in REQUEST_INDEX.items():
            cls = _class_of(req).value
            slow[cls] = max(slow[cls], float(per_req[j]))
    return {"blocked_s": blocked, "slowdown": slow}


def _class_of(req: ResourceRequest) -> ResourceClass:
    from .model import REQUEST_CLASS

    return REQUEST_CLASS[req]


# -- impact factors and responsibility ----------------------------------------


def compute_impact_factors(g: ProtoGraph) -> ProtoGraph:
    """Set each edge's impact factor: parent VC share, uniform when all 0."""
    for node_id in sorted(g.nodes):
        incoming = g.incoming(node_id)
        if not incoming:
            continue
        total = sum(g.nodes[e.src].vc for e in incoming)
        if total > 0:
            for e in incoming:
                e.impact = g.nodes[e.src].vc / total
        else:
            share = 1.0 / len(incoming)
            for e in incoming:
                e.impact = share
    return g


def compute_dor(g: ProtoGraph) -> ProtoGraph:
    """Propagate responsibility from each target's L0 node up the levels.

    Equivalent to, for every node, the sum over all paths to the target's
    L0 node of the product of edge impact factors along the path.
    """
    for node in g.nodes.values():
        node.dor = {t: 0.0 for t in g.targets}
    for target in g.targets:
        root = _l0_id(target)
        if root not in g.nodes:
            continue
        g.nodes[root].dor[target] = 1.0
        for level in range(1, 7):
            for node in g.level_nodes(level):
                acc = 0.0
                for e in g.outgoing(node.id):
                    dst = g.nodes[e.dst]
                    if dst.level == level - 1:
                        acc += e.impact * dst.dor.get(target, 0.0)
                node.dor[target] = acc
    return g


def analyze(
    trace: WorkloadTrace,
    targets: list[str],
    config: BuildConfig | None = None,
    slicing: WorkloadSlicing | None = None,
) -> ProtoGraph:
    """Build the graph and compute impact factors plus responsibility."""
    g = build_graph(trace, targets, config, slicing)
    compute_impact_factors(g)
    compute_dor(g)
    return g


# -- export / import -----------------------------------------------------------


def graph_to_dict(g: ProtoGraph) -> dict:
    nodes = [
        {
            "id": n.id,
            "level": n.level,
            "payload": n.payload,
            "vc": n.vc,
            "dor": {k: n.dor[k] for k in sorted(n.dor)},
        }
        for n in sorted(g.nodes.values(), key=lambda n: (n.level, n.id))
    ]
    edges = [
        {"from": e.src, "to": e.dst, "if": e.impact}
        for e in sorted(g.edges, key=lambda e: (e.src, e.dst))
    ]
    return {"nodes": nodes, "edges": edges}


def graph_to_json(g: ProtoGraph) -> str:
    return json.dumps(graph_to_dict(g), sort_keys=True, separators=(",", ":"))


def export_graph(g: ProtoGraph, path: str | Path) -> None:
    """Write the graph as a deterministic JSON document."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(graph_to_json(g))
        fh.write("\n")


def graph_from_dict(doc: dict) -> ProtoGraph:
    g = ProtoGraph()
    for nd in doc.get("nodes", []):
        g.add_node(
            GraphNode(
                id=nd["id"],
                level=int(nd["level"]),
                payload=dict(nd.get("payload", {})),
                vc=float(nd.get("vc", 0.0)),
                dor={k: float(v) for k, v in nd.get("dor", {}).items()},
            )
        )
    for ed in doc.get("edges", []):
        e = GraphEdge(src=ed["from"], dst=ed["to"], impact=float(ed.get("if", 0.0)))
        g.edges.append(e)
    g.targets = sorted(
        n.payload.get("query", "") for n in g.nodes.values() if n.level == 0
    )
    return g


def load_graph(path: str | Path) -> ProtoGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))
