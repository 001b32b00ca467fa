"""Workload trace data model, on-disk format, ingestion and validation.

A trace is a UTF-8 file with one JSON record per line. Every record carries
a ``kind`` discriminator; unknown keys inside a record are ignored:

    {"kind":"meta","heartbeat":2.0}
    {"kind":"host","id":"H1","capacity":{"IoRead":1e8},"gc":[[3.0,3.5]]}
    {"kind":"query","id":"Q1","user":"u1","submit":0.0,"finish":30.0}
    {"kind":"stage","id":"S1","query":"Q1","parents":[]}
    {"kind":"task","id":"T1","stage":"S1","query":"Q1","host":"H1",
     "start":0.0,"end":10.0}
    {"kind":"sample","task":"T1","t":2.0,
     "metrics":{"IoRead":{"wt":0.4,"ct":1.2,"ra":4096.0}}}
    {"kind":"syscounter","host":"H1","t":2.0,"used":{"IoRead":8192.0}}
    {"kind":"knowncause","name":"hdfs-replication","request":"IoRead",
     "host":"H1","windows":[[4.0,6.0,2048.0]]}

Times are float seconds from the workload epoch. Sample metrics are deltas
since the previous sample of the same task (or since task start for the
first sample). Resource-acquired units are bytes for Io/Network/Memory
requests, cpu-seconds for Cpu requests and slot-offer counts for SlotWait.
Syscounter series are cumulative used units per host and request.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, TextIO


class ResourceClass(enum.Enum):
    """The five resource groupings tracked per target stage."""

    SchedulingQueue = "SchedulingQueue"
    Cpu = "Cpu"
    Network = "Network"
    Io = "Io"
    Memory = "Memory"


class ResourceRequest(enum.Enum):
    """Concrete resource requests a task can block on."""

    SlotWait = "SlotWait"
    CpuMonitorLock = "CpuMonitorLock"
    CpuGc = "CpuGc"
    CpuOsSched = "CpuOsSched"
    NetworkFetch = "NetworkFetch"
    IoRead = "IoRead"
    IoWrite = "IoWrite"
    StorageMemory = "StorageMemory"
    ExecutionMemory = "ExecutionMemory"


REQUEST_CLASS: dict[ResourceRequest, ResourceClass] = {
    ResourceRequest.SlotWait: ResourceClass.SchedulingQueue,
    ResourceRequest.CpuMonitorLock: ResourceClass.Cpu,
    ResourceRequest.CpuGc: ResourceClass.Cpu,
    ResourceRequest.CpuOsSched: ResourceClass.Cpu,
    ResourceRequest.NetworkFetch: ResourceClass.Network,
    ResourceRequest.IoRead: ResourceClass.Io,
    ResourceRequest.IoWrite: ResourceClass.Io,
    ResourceRequest.StorageMemory: ResourceClass.Memory,
    ResourceRequest.ExecutionMemory: ResourceClass.Memory,
}

CLASS_REQUESTS: dict[ResourceClass, tuple[ResourceRequest, ...]] = {
    cls: tuple(r for r in ResourceRequest if REQUEST_CLASS[r] is cls)
    for cls in ResourceClass
}

#: Canonical request ordering used for all array-backed metric layouts.
REQUESTS: tuple[ResourceRequest, ...] = tuple(ResourceRequest)
REQUEST_INDEX: dict[ResourceRequest, int] = {r: i for i, r in enumerate(REQUESTS)}
N_REQUESTS = len(REQUESTS)

#: Unit of the resource-acquired counter, per request.
REQUEST_UNIT: dict[ResourceRequest, str] = {
    ResourceRequest.SlotWait: "slot-offers",
    ResourceRequest.CpuMonitorLock: "cpu-seconds",
    ResourceRequest.CpuGc: "cpu-seconds",
    ResourceRequest.CpuOsSched: "cpu-seconds",
    ResourceRequest.NetworkFetch: "bytes",
    ResourceRequest.IoRead: "bytes",
    ResourceRequest.IoWrite: "bytes",
    ResourceRequest.StorageMemory: "bytes",
    ResourceRequest.ExecutionMemory: "bytes",
}

#: Slack absorbed by validation when comparing accumulated float times.
TIME_TOLERANCE = 1e-6


class TraceError(Exception):
    """Raised for malformed trace files and broken references."""


class MetricDelta(NamedTuple):
    """Per-request deltas accumulated since the previous sample."""

    wt: float = 0.0
    ct: float = 0.0
    ra: float = 0.0


@dataclass
class MetricSample:
    """One sample point of a task: timestamp plus per-request deltas."""

    t: float
    metrics: dict[ResourceRequest, MetricDelta] = field(default_factory=dict)

    def delta(self, request: ResourceRequest) -> MetricDelta:
        return self.metrics.get(request, MetricDelta())


@dataclass
class TaskRecord:
    task_id: str
    stage_id: str
    query_id: str
    host_id: str
    start_time: float
    end_time: float
    samples: list[MetricSample] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    def total(self, request: ResourceRequest) -> MetricDelta:
        wt = ct = ra = 0.0
        for s in self.samples:
            d = s.delta(request)
            wt += d.wt
            ct += d.ct
            ra += d.ra
        return MetricDelta(wt, ct, ra)


@dataclass
class StageRecord:
    stage_id: str
    query_id: str
    parent_stage_ids: list[str] = field(default_factory=list)
    task_ids: list[str] = field(default_factory=list)
    #: Cumulative cpu-seconds consumed by the stage's tasks (work done).
    work_done: float = 0.0


@dataclass
class QueryRecord:
    query_id: str
    user: str = ""
    submit_time: float = 0.0
    finish_time: float = 0.0


@dataclass
class HostProfile:
    host_id: str
    #: Units/second the host can serve, per request; absent means unknown.
    capacity: dict[ResourceRequest, float] = field(default_factory=dict)
    #: Cumulative system-level used units, per request: list of (t, used).
    syscounters: dict[ResourceRequest, list[tuple[float, float]]] = field(
        default_factory=dict
    )
    #: Garbage-collection activity windows [(t0, t1), ...].
    gc_windows: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class KnownCause:
    """A named non-concurrency cause with explicit per-window usage."""

    name: str
    request: ResourceRequest
    host_id: str
    #: (t0, t1, units used uniformly across the window)
    windows: list[tuple[float, float, float]] = field(default_factory=list)


#: Registry presets for commonly configured causes. Inert unless the trace
#: supplies usage windows under the same name.
KNOWN_CAUSE_PRESETS: dict[str, ResourceRequest] = {
    "jvm-gc": ResourceRequest.CpuGc,
    "hdfs-replication": ResourceRequest.IoWrite,
    "cached-storage": ResourceRequest.StorageMemory,
}


@dataclass
class WorkloadTrace:
    """Fully linked, immutable-by-convention view of one workload trace."""

    queries: dict[str, QueryRecord] = field(default_factory=dict)
    stages: dict[str, StageRecord] = field(default_factory=dict)
    tasks: dict[str, TaskRecord] = field(default_factory=dict)
    hosts: dict[str, HostProfile] = field(default_factory=dict)
    known_causes: dict[str, KnownCause] = field(default_factory=dict)
    heartbeat_interval: float = 2.0

    def tasks_on_host(self, host_id: str) -> list[TaskRecord]:
        return [t for t in self.tasks.values() if t.host_id == host_id]

    def stage_tasks(self, stage_id: str) -> list[TaskRecord]:
        return [self.tasks[tid] for tid in self.stages[stage_id].task_ids]


@dataclass(frozen=True)
class Violation:
    """One broken invariant: the offending entity plus the rule name."""

    entity: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        msg = f"{self.entity}: {self.rule}"
        return f"{msg} ({self.detail})" if self.detail else msg


_REQUEST_BY_NAME: dict[str, ResourceRequest] = {r.value: r for r in ResourceRequest}


def _parse_request(name: str, where: str) -> ResourceRequest:
    req = _REQUEST_BY_NAME.get(name)
    if req is None:
        raise TraceError(f"{where}: unknown resource request {name!r}")
    return req


def _parse_metrics(raw: dict, where: str) -> dict[ResourceRequest, MetricDelta]:
    metrics: dict[ResourceRequest, MetricDelta] = {}
    by_name = _REQUEST_BY_NAME
    for name, vals in raw.items():
        req = by_name.get(name)
        if req is None:
            raise TraceError(f"{where}: unknown resource request {name!r}")
        get = vals.get
        metrics[req] = MetricDelta(
            float(get("wt", 0.0)), float(get("ct", 0.0)), float(get("ra", 0.0))
        )
    return metrics


def ingest_trace(path: str | Path, strict: bool = False) -> WorkloadTrace:
    """Parse and link a trace file.

    Structural problems (malformed lines, dangling references, non-monotone
    samples) raise :class:`TraceError` naming the offending line or entity.
    With ``strict=True`` any remaining invariant violation found by
    :func:`validate` also raises.
    """
    trace = WorkloadTrace()
    samples: list[tuple[str, MetricSample]] = []
    sys_rows: list[tuple[str, float, dict[ResourceRequest, float]]] = []

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(f"line {lineno}: malformed record: {exc}") from None
            if not isinstance(rec, dict) or "kind" not in rec:
                raise TraceError(f"line {lineno}: record without a 'kind' field")
            kind = rec["kind"]
            where = f"line {lineno}"
            try:
                if kind == "meta":
                    trace.heartbeat_interval = float(rec.get("heartbeat", 2.0))
                elif kind == "host":
                    host = HostProfile(host_id=str(rec["id"]))
                    for name, cap in (rec.get("capacity") or {}).items():
                        host.capacity[_parse_request(name, where)] = float(cap)
                    host.gc_windows = [
                        (float(a), float(b)) for a, b in rec.get("gc", [])
                    ]
                    trace.hosts[host.host_id] = host
                elif kind == "query":
                    q = QueryRecord(
                        query_id=str(rec["id"]),
                        user=str(rec.get("user", "")),
                        submit_time=float(rec.get("submit", 0.0)),
                        finish_time=float(rec.get("finish", 0.0)),
                    )
                    trace.queries[q.query_id] = q
                elif kind == "stage":
                    st = StageRecord(
                        stage_id=str(rec["id"]),
                        query_id=str(rec["query"]),
                        parent_stage_ids=[str(p) for p in rec.get("parents", [])],
                    )
                    trace.stages[st.stage_id] = st
                elif kind == "task":
                    t = TaskRecord(
                        task_id=str(rec["id"]),
                        stage_id=str(rec["stage"]),
                        query_id=str(rec["query"]),
                        host_id=str(rec["host"]),
                        start_time=float(rec["start"]),
                        end_time=float(rec["end"]),
                    )
                    trace.tasks[t.task_id] = t
                elif kind == "sample":
                    samples.append(
                        (
                            str(rec["task"]),
                            MetricSample(
                                t=float(rec["t"]),
                                metrics=_parse_metrics(rec.get("metrics", {}), where),
                            ),
                        )
                    )
                elif kind == "syscounter":
                    used = {
                        _parse_request(name, where): float(v)
                        for name, v in rec.get("used", {}).items()
                    }
                    sys_rows.append((str(rec["host"]), float(rec["t"]), used))
                elif kind == "knowncause":
                    kc = KnownCause(
                        name=str(rec["name"]),
                        request=_parse_request(str(rec["request"]), where),
                        host_id=str(rec["host"]),
                        windows=[
                            (float(a), float(b), float(u))
                            for a, b, u in rec.get("windows", [])
                        ],
                    )
                    trace.known_causes[kc.name] = kc
                else:
                    raise TraceError(f"{where}: unknown record kind {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise TraceError(f"{where}: bad {kind} record: {exc}") from None

    # Link samples to tasks, keeping file order per task.
    for task_id, sample in samples:
        task = trace.tasks.get(task_id)
        if task is None:
            raise TraceError(f"sample references unknown task {task_id!r}")
        task.samples.append(sample)
    for task in trace.tasks.values():
        ts = [s.t for s in task.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise TraceError(f"task {task.task_id}: non-monotone sample timestamps")

    # Link syscounter rows to hosts.
    for host_id, t, used in sys_rows:
        host = trace.hosts.get(host_id)
        if host is None:
            raise TraceError(f"syscounter references unknown host {host_id!r}")
        for req, value in used.items():
            host.syscounters.setdefault(req, []).append((t, value))
    for host in trace.hosts.values():
        for series in host.syscounters.values():
            series.sort(key=lambda p: p[0])

    # Referential integrity.
    for task in trace.tasks.values():
        if task.stage_id not in trace.stages:
            raise TraceError(
                f"task {task.task_id} references unknown stage {task.stage_id!r}"
            )
        if task.query_id not in trace.queries:
            raise TraceError(
                f"task {task.task_id} references unknown query {task.query_id!r}"
            )
        if task.host_id not in trace.hosts:
            raise TraceError(
                f"task {task.task_id} references unknown host {task.host_id!r}"
            )
        trace.stages[task.stage_id].task_ids.append(task.task_id)
    for stage in trace.stages.values():
        if stage.query_id not in trace.queries:
            raise TraceError(
                f"stage {stage.stage_id} references unknown query {stage.query_id!r}"
            )
        for parent in stage.parent_stage_ids:
            if parent not in trace.stages:
                raise TraceError(
                    f"stage {stage.stage_id} references unknown parent {parent!r}"
                )

    _recompute_work_done(trace)

    if strict:
        violations = validate(trace)
        if violations:
            raise TraceError(
                "trace failed strict validation: "
                + "; ".join(str(v) for v in violations[:5])
                + (f" (+{len(violations) - 5} more)" if len(violations) > 5 else "")
            )
    return trace


def _recompute_work_done(trace: WorkloadTrace) -> None:
    cpu_requests = CLASS_REQUESTS[ResourceClass.Cpu]
    for stage in trace.stages.values():
        wd = 0.0
        for tid in stage.task_ids:
            task = trace.tasks[tid]
            for sample in task.samples:
                for req in cpu_requests:
                    wd += sample.delta(req).ct
        stage.work_done = wd


def _stage_cycle(trace: WorkloadTrace) -> list[str] | None:
    """Return one cycle in the stage DAG, or None. Iterative DFS."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {sid: WHITE for sid in trace.stages}
    for root in sorted(trace.stages):
        if color[root] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        path = [root]
        color[root] = GREY
        while stack:
            sid, idx = stack[-1]
            parents = trace.stages[sid].parent_stage_ids
            if idx < len(parents):
                stack[-1] = (sid, idx + 1)
                nxt = parents[idx]
                if color[nxt] == GREY:
                    return path[path.index(nxt):] + [nxt]
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, 0))
                    path.append(nxt)
            else:
                color[sid] = BLACK
                stack.pop()
                path.pop()
    return None


def validate(trace: WorkloadTrace) -> list[Violation]:
    """Check every model invariant; violations are data, not failures."""
    out: list[Violation] = []

    for task in trace.tasks.values():
        ent = f"task {task.task_id}"
        if not task.start_time < task.end_time:
            out.append(Violation(ent, "task-lifetime", "start_time >= end_time"))
            continue
        prev = task.start_time
        for i, sample in enumerate(task.samples):
            if sample.t <= prev:
                out.append(
                    Violation(ent, "sample-monotone", f"sample {i} at t={sample.t}")
                )
                break
            elapsed = sample.t - prev
            for req, d in sample.metrics.items():
                if d.wt < 0 or d.ct < 0 or d.ra < 0:
                    out.append(
                        Violation(ent, "negative-delta", f"{req.value} at t={sample.t}")
                    )
                if d.wt + d.ct > elapsed + TIME_TOLERANCE:
                    out.append(
                        Violation(
                            ent,
                            "time-budget",
                            f"{req.value} wt+ct={d.wt + d.ct:.9g} > "
                            f"elapsed={elapsed:.9g} at t={sample.t}",
                        )
                    )
            prev = sample.t
        if task.samples:
            last = task.samples[-1].t
            if not math.isclose(last, task.end_time, abs_tol=TIME_TOLERANCE):
                out.append(
                    Violation(ent, "last-sample", f"t={last} != end={task.end_time}")
                )
            if task.samples[0].t <= task.start_time:
                out.append(Violation(ent, "sample-before-start"))

    for stage in trace.stages.values():
        wd = stage.work_done
        expect = 0.0
        for tid in stage.task_ids:
            task = trace.tasks[tid]
            for req in CLASS_REQUESTS[ResourceClass.Cpu]:
                expect += task.total(req).ct
        if not math.isclose(wd, expect, rel_tol=1e-9, abs_tol=TIME_TOLERANCE):
            out.append(
                Violation(f"stage {stage.stage_id}", "work-done", f"{wd} != {expect}")
            )

    cycle = _stage_cycle(trace)
    if cycle is not None:
        out.append(Violation("stage-dag", "cycle", " -> ".join(cycle)))

    for host in trace.hosts.values():
        ent = f"host {host.host_id}"
        for req, cap in host.capacity.items():
            if cap <= 0:
                out.append(Violation(ent, "capacity-positive", req.value))
        for req, series in host.syscounters.items():
            vals = [v for _, v in series]
            if any(b < a for a, b in zip(vals, vals[1:])):
                out.append(Violation(ent, "syscounter-monotone", req.value))
        for a, b in host.gc_windows:
            if b < a:
                out.append(Violation(ent, "gc-window", f"[{a}, {b}]"))

    return out


def _dump(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"), allow_nan=False)


def trace_records(trace: WorkloadTrace) -> Iterable[dict]:
    """Yield the canonical record stream for :func:`write_trace`."""
    yield {"kind": "meta", "heartbeat": trace.heartbeat_interval}
    for host_id in sorted(trace.hosts):
        host = trace.hosts[host_id]
        rec: dict = {"kind": "host", "id": host_id}
        if host.capacity:
            rec["capacity"] = {
                r.value: host.capacity[r] for r in REQUESTS if r in host.capacity
            }
        if host.gc_windows:
            rec["gc"] = [[a, b] for a, b in host.gc_windows]
        yield rec
    for qid in sorted(trace.queries):
        q = trace.queries[qid]
        yield {
            "kind": "query",
            "id": qid,
            "user": q.user,
            "submit": q.submit_time,
            "finish": q.finish_time,
        }
    for sid in sorted(trace.stages):
        st = trace.stages[sid]
        yield {
            "kind": "stage",
            "id": sid,
            "query": st.query_id,
            "parents": sorted(st.parent_stage_ids),
        }
    for tid in sorted(trace.tasks):
        t = trace.tasks[tid]
        yield {
            "kind": "task",
            "id": tid,
            "stage": t.stage_id,
            "query": t.query_id,
            "host": t.host_id,
            "start": t.start_time,
            "end": t.end_time,
        }
    for tid in sorted(trace.tasks):
        for sample in trace.tasks[tid].samples:
            yield {
                "kind": "sample",
                "task": tid,
                "t": sample.t,
                "metrics": {
                    r.value: {"wt": d.wt, "ct": d.ct, "ra": d.ra}
                    for r in REQUESTS
                    if (d := sample.metrics.get(r)) is not None
                },
            }
    for host_id in sorted(trace.hosts):
        host = trace.hosts[host_id]
        by_t: dict[float, dict[str, float]] = {}
        for req in REQUESTS:
            for t, v in host.syscounters.get(req, []):
                by_t.setdefault(t, {})[req.value] = v
        for t in sorted(by_t):
            yield {"kind": "syscounter", "host": host_id, "t": t, "used": by_t[t]}
    for name in sorted(trace.known_causes):
        kc = trace.known_causes[name]
        yield {
            "kind": "knowncause",
            "name": name,
            "request": kc.request.value,
            "host": kc.host_id,
            "windows": [[a, b, u] for a, b, u in kc.windows],
        }


def write_trace(trace: WorkloadTrace, path: str | Path | TextIO) -> None:
    """Serialize a trace in canonical order (byte-stable for equal traces)."""
    if hasattr(path, "write"):
        fh = path
        for rec in trace_records(trace):
            fh.write(_dump(rec) + "\n")
        return
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace_records(trace):
            fh.write(_dump(rec) + "\n")
