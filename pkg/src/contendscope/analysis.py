"""Use-case queries over a computed graph, baselines, windowed analysis.

An explanation is one full path through the graph: source query -> source
stage -> blame node -> (request, host) node -> resource node -> target
stage -> target query, scored by the product of the impact factors along
the path. Grouping those path weights by source query reproduces the L6
responsibility values exactly, which keeps ranked outputs and drill-down
views mutually consistent.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import BuildConfig, ProtoGraph, analyze
from .model import (
    N_REQUESTS,
    REQUEST_INDEX,
    REQUESTS,
    KnownCause,
    MetricDelta,
    MetricSample,
    QueryRecord,
    StageRecord,
    TaskRecord,
    WorkloadTrace,
    _recompute_work_done,
)


@dataclass(frozen=True)
class Explanation:
    """One scored contention path, deepest cause first."""

    tq: str
    ts: str
    res: str
    res_p: str
    host: str
    ss: str
    sq: str
    weight: float
    path_id: str

    def row(self) -> list:
        return [
            self.tq,
            self.ts,
            self.res,
            self.res_p,
            self.host,
            self.ss,
            self.sq,
            self.weight,
        ]


@dataclass
class RankedList:
    entries: list[tuple[str, float]]
    k: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "entries": [{"id": e, "score": s} for e, s in self.entries],
        }


def _rank(scores: dict[str, float], k: int | None) -> RankedList:
    items = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    if k is not None:
        items = items[:k]
    return RankedList(entries=items, k=k if k is not None else len(items))


EXPLANATION_FIELDS = ("tq", "ts", "res", "res_p", "host", "ss", "sq")


def enumerate_explanations(g: ProtoGraph, target: str) -> list[Explanation]:
    """All paths toward one target query with their impact-factor products."""
    if target not in g.targets:
        raise ValueError(f"unknown target query {target!r}")
    edge_if: dict[tuple[str, str], float] = {
        (e.src, e.dst): e.impact for e in g.edges
    }
    out: list[Explanation] = []
    for l4 in g.level_nodes(4):
        pl = l4.payload
        if pl.get("query") != target:
            continue
        skey = pl["source"]
        l5_id = f"L5|{skey}"
        l5 = g.nodes.get(l5_id)
        if l5 is None:
            continue
        qkey = l5.payload.get("source_query", skey)
        l6_id = f"L6|{qkey}"
        l3_id = f"L3|{pl['query']}|{pl['stage']}|{pl['request']}|{pl['host']}"
        l2_id = f"L2|{pl['query']}|{pl['stage']}|{_class_name(pl['request'])}"
        l1_id = f"L1|{pl['query']}|{pl['stage']}"
        l0_id = f"L0|{pl['query']}"
        weight = 1.0
        hops = [
            (l6_id, l5_id),
            (l5_id, l4.id),
            (l4.id, l3_id),
            (l3_id, l2_id),
            (l2_id, l1_id),
            (l1_id, l0_id),
        ]
        ok = True
        for hop in hops:
            f = edge_if.get(hop)
            if f is None:
                ok = False
                break
            weight *= f
        if not ok:
            continue
        out.append(
            Explanation(
                tq=pl["query"],
                ts=pl["stage"],
                res=_class_name(pl["request"]),
                res_p=pl["request"],
                host=pl["host"],
                ss=skey,
                sq=qkey,
                weight=weight,
                path_id=l4.id,
            )
        )
    return out


def _class_name(request_name: str) -> str:
    from .model import REQUEST_CLASS, ResourceRequest

    return REQUEST_CLASS[ResourceRequest(request_name)].value


def topk_explanations(
    g: ProtoGraph,
    target: str,
    k: int,
    fix: dict[str, str] | None = None,
) -> list[Explanation]:
    """Top-k paths by weight, optionally pinning any explanation fields."""
    if k <= 0:
        raise ValueError("k must be positive")
    fix = fix or {}
    unknown = set(fix) - set(EXPLANATION_FIELDS)
    if unknown:
        raise ValueError(f"unknown fixed fields: {sorted(unknown)}")
    paths = enumerate_explanations(g, target)
    for fld, val in fix.items():
        paths = [p for p in paths if getattr(p, fld) == val]
    paths.sort(key=lambda p: (-p.weight, p.path_id))
    return paths[:k]


def aggressive_sources(g: ProtoGraph, k: int) -> RankedList:
    """Sources ranked by total responsibility across all analyzed targets."""
    scores: dict[str, float] = {}
    for node in g.level_nodes(6):
        scores[node.payload["source"]] = sum(node.dor.values())
    return _rank(scores, k)


def _l3_impact_scores(g: ProtoGraph, key: str, weighted: bool) -> dict[str, float]:
    """Sum outgoing impact factors of L3 nodes, grouped by a payload key.

    Nodes with zero contribution are counted as zero impact: their edges
    only carry the uniform split that keeps responsibility mass flowing,
    not measured impact. ``weighted=True`` multiplies each factor by the
    receiving node's total responsibility.
    """
    scores: dict[str, float] = {}
    for node in g.level_nodes(3):
        group = node.payload[key]
        scores.setdefault(group, 0.0)
        if node.vc <= 0.0:
            continue
        for e in g.outgoing(node.id):
            w = e.impact
            if weighted:
                w *= sum(g.nodes[e.dst].dor.values())
            scores[group] += w
    return scores


def slow_nodes(g: ProtoGraph, weighted: bool = False) -> RankedList:
    """Hosts ranked by the total outgoing impact of their L3 nodes.

    ``weighted=True`` scores by impact * responsibility instead of the
    plain impact-factor sum.
    """
    return _rank(_l3_impact_scores(g, "host", weighted), None)


def hot_resources(g: ProtoGraph, weighted: bool = False) -> RankedList:
    """Resource requests ranked by total outgoing impact of L3 nodes."""
    return _rank(_l3_impact_scores(g, "request", weighted), None)


# -- baselines ----------------------------------------------------------------


def baseline_naive_overlap(trace: WorkloadTrace, target: str) -> RankedList:
    """Wall-clock lifetime overlap between the target and each other query."""
    if target not in trace.queries:
        raise ValueError(f"unknown target query {target!r}")
    tgt = trace.queries[target]
    scores: dict[str, float] = {}
    for qid, q in trace.queries.items():
        if qid == target:
            continue
        lo = max(tgt.submit_time, q.submit_time)
        hi = min(tgt.finish_time, q.finish_time)
        scores[qid] = max(0.0, hi - lo)
    return _rank(scores, None)


def baseline_deep_overlap(trace: WorkloadTrace, target: str) -> RankedList:
    """Cumulative same-host task-pair overlap against each other query."""
    if target not in trace.queries:
        raise ValueError(f"unknown target query {target!r}")
    scores: dict[str, float] = {
        qid: 0.0 for qid in trace.queries if qid != target
    }
    tgt_tasks = [t for t in trace.tasks.values() if t.query_id == target]
    for t in tgt_tasks:
        for s in trace.tasks.values():
            if s.query_id == target or s.host_id != t.host_id:
                continue
            lo = max(t.start_time, s.start_time)
            hi = min(t.end_time, s.end_time)
            if hi > lo:
                scores[s.query_id] = scores.get(s.query_id, 0.0) + (hi - lo)
    return _rank(scores, None)


def baseline_blocked_time(trace: WorkloadTrace, target: str) -> dict:
    """Per-stage and query-total blocked seconds per request for a query."""
    if target not in trace.queries:
        raise ValueError(f"unknown target query {target!r}")
    stages: dict[str, dict[str, float]] = {}
    query_total: dict[str, float] = {r.value: 0.0 for r in REQUESTS}
    for sid, stage in sorted(trace.stages.items()):
        if stage.query_id != target:
            continue
        per = {r.value: 0.0 for r in REQUESTS}
        for tid in stage.task_ids:
            task = trace.tasks[tid]
            for req in REQUESTS:
                per[req.value] += task.total(req).wt
        stages[sid] = per
        for key, v in per.items():
            query_total[key] += v
    return {"query": target, "stages": stages, "total": query_total}


# -- trace surgery ----------------------------------------------------------


def clip_trace(trace: WorkloadTrace, t0: float, t1: float) -> WorkloadTrace:
    """Restrict a trace to a window, splitting metrics proportionally.

    Tasks are clipped to their intersection with [t0, t1]; sample deltas
    are scaled by time overlap, matching the interval engine's
    piecewise-uniform reading. Tasks fully outside the window are dropped.
    """
    if t1 <= t0:
        raise ValueError("window must have positive length")
    out = WorkloadTrace(heartbeat_interval=trace.heartbeat_interval)
    for qid, q in trace.queries.items():
        out.queries[qid] = QueryRecord(
            query_id=qid,
            user=q.user,
            submit_time=min(max(q.submit_time, t0), t1),
            finish_time=min(max(q.finish_time, t0), t1),
        )
    for sid, st in trace.stages.items():
        out.stages[sid] = StageRecord(
            stage_id=sid,
            query_id=st.query_id,
            parent_stage_ids=list(st.parent_stage_ids),
        )
    for hid, host in trace.hosts.items():
        prof = type(host)(host_id=hid)
        prof.capacity = dict(host.capacity)
        for req, series in host.syscounters.items():
            if not series:
                continue
            ts = np.asarray([p[0] for p in series])
            vs = np.asarray([p[1] for p in series])
            pts = [(t0, float(np.interp(t0, ts, vs)))]
            pts += [(t, v) for t, v in series if t0 < t < t1]
            pts.append((t1, float(np.interp(t1, ts, vs))))
            prof.syscounters[req] = pts
        prof.gc_windows = [
            (max(a, t0), min(b, t1))
            for a, b in host.gc_windows
            if min(b, t1) > max(a, t0)
        ]
        out.hosts[hid] = prof
    for name, kc in trace.known_causes.items():
        windows = []
        for a, b, units in kc.windows:
            lo, hi = max(a, t0), min(b, t1)
            if hi > lo and b > a:
                windows.append((lo, hi, units * (hi - lo) / (b - a)))
        out.known_causes[name] = KnownCause(
            name=name, request=kc.request, host_id=kc.host_id, windows=windows
        )
    for tid, task in trace.tasks.items():
        lo = max(task.start_time, t0)
        hi = min(task.end_time, t1)
        if hi - lo <= 1e-12:
            continue
        samples: list[MetricSample] = []
        prev = task.start_time
        for sample in task.samples:
            w0, w1 = max(prev, lo), min(sample.t, hi)
            if w1 > w0:
                frac = (w1 - w0) / (sample.t - prev)
                metrics = {
                    req: MetricDelta(d.wt * frac, d.ct * frac, d.ra * frac)
                    for req, d in sample.metrics.items()
                }
                samples.append(MetricSample(t=w1, metrics=metrics))
            prev = sample.t
        if samples and abs(samples[-1].t - hi) > 1e-9:
            samples.append(MetricSample(t=hi, metrics={}))
        out.tasks[tid] = TaskRecord(
            task_id=tid,
            stage_id=task.stage_id,
            query_id=task.query_id,
            host_id=task.host_id,
            start_time=lo,
            end_time=hi,
            samples=samples,
        )
        out.stages[task.stage_id].task_ids.append(tid)
    _recompute_work_done(out)
    return out


def resample_trace(trace: WorkloadTrace, interval: float) -> WorkloadTrace:
    """Re-emit every task's samples on a fixed heartbeat-only grid.

    Models collecting metrics at a coarser cadence: all task-event-aligned
    sample boundaries are lost and deltas are redistributed onto multiples
    of ``interval`` (plus each task's end), conserving totals.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    out = WorkloadTrace(heartbeat_interval=trace.heartbeat_interval)
    out.queries = {k: QueryRecord(v.query_id, v.user, v.submit_time, v.finish_time) for k, v in trace.queries.items()}
    for sid, st in trace.stages.items():
        out.stages[sid] = StageRecord(
            stage_id=sid,
            query_id=st.query_id,
            parent_stage_ids=list(st.parent_stage_ids),
        )
    for hid, host in trace.hosts.items():
        prof = type(host)(host_id=hid)
        prof.capacity = dict(host.capacity)
        prof.syscounters = {r: list(s) for r, s in host.syscounters.items()}
        prof.gc_windows = list(host.gc_windows)
        out.hosts[hid] = prof
    out.known_causes = dict(trace.known_causes)
    for tid, task in trace.tasks.items():
        new_times: list[float] = []
        k = int(np.floor(task.start_time / interval)) + 1
        while k * interval < task.end_time - 1e-12:
            if k * interval > task.start_time + 1e-12:
                new_times.append(k * interval)
            k += 1
        new_times.append(task.end_time)
        if task.samples:
            win = np.empty(len(task.samples) + 1)
            win[0] = task.start_time
            win[1:] = [s.t for s in task.samples]
            wt = np.zeros((len(task.samples), N_REQUESTS))
            ct = np.zeros_like(wt)
            ra = np.zeros_like(wt)
            for i, sample in enumerate(task.samples):
                for req, d in sample.metrics.items():
                    j = REQUEST_INDEX[req]
                    wt[i, j] = d.wt
                    ct[i, j] = d.ct
                    ra[i, j] = d.ra
            bounds = np.asarray([task.start_time] + new_times)
            wt_n = kernels.apportion(win, wt, bounds)
            ct_n = kernels.apportion(win, ct, bounds)
            ra_n = kernels.apportion(win, ra, bounds)
            samples = []
            for i, t in enumerate(new_times):
                metrics = {}
                for j in range(N_REQUESTS):
                    if wt_n[i, j] or ct_n[i, j] or ra_n[i, j]:
                        metrics[REQUESTS[j]] = MetricDelta(
                            float(wt_n[i, j]), float(ct_n[i, j]), float(ra_n[i, j])
                        )
                samples.append(MetricSample(t=t, metrics=metrics))
        else:
            samples = []
        out.tasks[tid] = TaskRecord(
            task_id=tid,
            stage_id=task.stage_id,
            query_id=task.query_id,
            host_id=task.host_id,
            start_time=task.start_time,
            end_time=task.end_time,
            samples=samples,
        )
        out.stages[task.stage_id].task_ids.append(tid)
    _recompute_work_done(out)
    return out


def windowed_analysis(
    trace: WorkloadTrace,
    target: str,
    windows: list[tuple[float, float]],
    config: BuildConfig | None = None,
) -> list[dict[str, float]]:
    """Per-window L6 responsibility shares toward the target.

    Each window re-runs the full analysis on the trace clipped to the
    window; a window in which the target is absent reports empty shares.
    """
    if target not in trace.queries:
        raise ValueError(f"unknown target query {target!r}")
    for t0, t1 in windows:
        if t1 <= t0:
            raise ValueError(f"invalid window [{t0}, {t1}]")
    results: list[dict[str, float]] = []
    for t0, t1 in windows:
        clipped = clip_trace(trace, t0, t1)
        has_target = any(t.query_id == target for t in clipped.tasks.values())
        if not has_target:
            results.append({})
            continue
        g = analyze(clipped, [target], config)
        shares = {
            n.payload["source"]: n.dor.get(target, 0.0) for n in g.level_nodes(6)
        }
        results.append(shares)
    return results


# -- report export -------------------------------------------------------------


def explanations_to_rows(paths: list[Explanation]) -> list[list]:
    return [p.row() for p in paths]


def to_json_bytes(obj) -> bytes:
    """Canonical JSON serialization shared by the CLI and the service."""
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()


def explanations_to_json(paths: list[Explanation]) -> dict:
    return {
        "columns": list(EXPLANATION_FIELDS) + ["weight"],
        "rows": [p.row() for p in paths],
    }


def rows_to_csv(columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()
