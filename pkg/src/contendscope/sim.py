"""Synthetic multi-tenant workload generator with known ground truth.

Discrete-time simulation (default tick 0.1 s). Per host and resource
request, runnable tasks plus any external load share the capacity
proportionally to their demand rates; within a tick the fluid state is
advanced event-exactly to each request completion. A task that receives
grant factor f on a request accrues f * dt consume time and (1 - f) * dt
wait time, so its acquire-time penalty is exactly 1/(granted rate) and the
reciprocal penalties of all demanders sum to the capacity whenever the
request is saturated.

Every accrued wait second is attributed to the co-demanders of that
request proportionally to their granted usage in the same instant, which
gives the ground-truth caused-blocked ledger used to score attribution.

Scheduling: tasks enter a per-user FIFO once their stage's parents finish;
each tick, free slots go to the user with the fewest running tasks.
External injections demand capacity and write cumulative system counters
but never appear as tasks, so the engine can only recover them through
the Unknown source.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    N_REQUESTS,
    REQUEST_INDEX,
    REQUESTS,
    HostProfile,
    MetricDelta,
    MetricSample,
    QueryRecord,
    ResourceRequest,
    StageRecord,
    TaskRecord,
    WorkloadTrace,
    write_trace,
)

UNKNOWN_LABEL = "Unknown"

_REQ_VALUES = tuple(r.value for r in REQUESTS)
_ZERO_R = np.zeros(N_REQUESTS)

EXTERNAL_REQUEST = {
    "IoExternal": ResourceRequest.IoRead,
    "CpuExternal": ResourceRequest.CpuOsSched,
}
INTERNAL_REQUEST = {
    "CpuInternal": ResourceRequest.CpuOsSched,
    "IoInternal": ResourceRequest.IoRead,
    "MemInternal": ResourceRequest.StorageMemory,
}


@dataclass
class TaskDemand:
    """Per-request demand: acquire ``units`` at up to ``rate`` units/s."""

    request: ResourceRequest
    rate: float
    units: float


@dataclass
class StageSpec:
    tasks: int
    demands: list[TaskDemand]
    parents: list[int] = field(default_factory=list)  # indices within query
    pin_hosts: list[str] | None = None  # round-robin pinning
    rate_jitter: float = 0.0
    units_jitter: float = 0.0


@dataclass
class QuerySpec:
    query_id: str
    user: str
    submit: float
    stages: list[StageSpec]


@dataclass
class InjectionSpec:
    kind: str  # CpuInternal | IoInternal | MemInternal | IoExternal | CpuExternal
    magnitude: float  # units/s demanded
    duration: float
    start: float | None = None  # absolute seconds, tick-aligned
    on_query_start: str | None = None
    hosts: list[str] | None = None  # None = all hosts
    label: str | None = None

    def __post_init__(self):
        if self.kind not in EXTERNAL_REQUEST and self.kind not in INTERNAL_REQUEST:
            raise ValueError(f"unknown injection kind {self.kind!r}")
        if (self.start is None) == (self.on_query_start is None):
            raise ValueError("exactly one of start / on_query_start required")

    @property
    def external(self) -> bool:
        return self.kind in EXTERNAL_REQUEST

    @property
    def request(self) -> ResourceRequest:
        return EXTERNAL_REQUEST.get(self.kind) or INTERNAL_REQUEST[self.kind]


@dataclass
class SimConfig:
    seed: int
    n_hosts: int
    slots_per_host: int
    capacity: dict[ResourceRequest, float]
    queries: list[QuerySpec]
    heartbeat: float = 2.0
    tick: float = 0.1
    injections: list[InjectionSpec] = field(default_factory=list)
    target: str | None = None
    max_time: float = 600.0

    def host_ids(self) -> list[str]:
        return [f"H{i + 1}" for i in range(self.n_hosts)]

    def validate(self) -> None:
        if self.n_hosts <= 0 or self.slots_per_host <= 0:
            raise ValueError("host and slot counts must be positive")
        if self.tick <= 0 or self.heartbeat <= 0:
            raise ValueError("tick and heartbeat must be positive")
        for req, cap in self.capacity.items():
            if cap <= 0:
                raise ValueError(f"capacity for {req.value} must be positive")
        seen = set()
        for q in self.queries:
            if q.query_id in seen:
                raise ValueError(f"duplicate query id {q.query_id}")
            seen.add(q.query_id)
            for st in q.stages:
                if st.tasks <= 0:
                    raise ValueError("stage task count must be positive")
                if not st.demands:
                    raise ValueError("stage needs at least one demand")
                for d in st.demands:
                    if d.rate <= 0 or d.units <= 0:
                        raise ValueError("demand rate/units must be positive")
                for p in st.parents:
                    if not 0 <= p < len(q.stages):
                        raise ValueError("stage parent index out of range")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_hosts": self.n_hosts,
            "slots_per_host": self.slots_per_host,
            "capacity": {r.value: v for r, v in self.capacity.items()},
            "heartbeat": self.heartbeat,
            "tick": self.tick,
            "target": self.target,
            "max_time": self.max_time,
            "queries": [
                {
                    "id": q.query_id,
                    "user": q.user,
                    "submit": q.submit,
                    "stages": [
                        {
                            "tasks": s.tasks,
                            "parents": s.parents,
                            "pin_hosts": s.pin_hosts,
                            "rate_jitter": s.rate_jitter,
                            "units_jitter": s.units_jitter,
                            "demands": [
                                {"request": d.request.value, "rate": d.rate, "units": d.units}
                                for d in s.demands
                            ],
                        }
                        for s in q.stages
                    ],
                }
                for q in self.queries
            ],
            "injections": [
                {
                    "kind": i.kind,
                    "magnitude": i.magnitude,
                    "duration": i.duration,
                    "start": i.start,
                    "on_query_start": i.on_query_start,
                    "hosts": i.hosts,
                    "label": i.label,
                }
                for i in self.injections
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(
            seed=int(d["seed"]),
            n_hosts=int(d["n_hosts"]),
            slots_per_host=int(d["slots_per_host"]),
            capacity={ResourceRequest(k): float(v) for k, v in d["capacity"].items()},
            heartbeat=float(d.get("heartbeat", 2.0)),
            tick=float(d.get("tick", 0.1)),
            target=d.get("target"),
            max_time=float(d.get("max_time", 600.0)),
            queries=[
                QuerySpec(
                    query_id=q["id"],
                    user=q["user"],
                    submit=float(q["submit"]),
                    stages=[
                        StageSpec(
                            tasks=int(s["tasks"]),
                            parents=[int(p) for p in s.get("parents", [])],
                            pin_hosts=s.get("pin_hosts"),
                            rate_jitter=float(s.get("rate_jitter", 0.0)),
                            units_jitter=float(s.get("units_jitter", 0.0)),
                            demands=[
                                TaskDemand(
                                    request=ResourceRequest(dd["request"]),
                                    rate=float(dd["rate"]),
                                    units=float(dd["units"]),
                                )
                                for dd in s["demands"]
                            ],
                        )
                        for s in q["stages"]
                    ],
                )
                for q in d["queries"]
            ],
            injections=[
                InjectionSpec(
                    kind=i["kind"],
                    magnitude=float(i["magnitude"]),
                    duration=float(i["duration"]),
                    start=i.get("start"),
                    on_query_start=i.get("on_query_start"),
                    hosts=i.get("hosts"),
                    label=i.get("label"),
                )
                for i in d.get("injections", [])
            ],
        )


@dataclass
class GroundTruth:
    """Simulator-known attribution: who caused each task's blocked time."""

    aggressors: list[str]
    target: str | None
    #: (target task id, source query id or "Unknown", request name) -> seconds
    caused: dict[tuple[str, str, str], float]
    injections: list[dict]

    def caused_by_source(self, request: ResourceRequest | None = None) -> dict[str, float]:
        out: dict[str, float] = {}
        for (_, source, req), s in self.caused.items():
            if request is not None and req != request.value:
                continue
            out[source] = out.get(source, 0.0) + s
        return out

    def to_dict(self) -> dict:
        rows = [
            {"target_task": t, "source": s, "request": r, "caused_blocked_s": v}
            for (t, s, r), v in sorted(self.caused.items())
        ]
        return {
            "aggressors": sorted(self.aggressors),
            "target": self.target,
            "injections": self.injections,
            "caused": rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            aggressors=list(d.get("aggressors", [])),
            target=d.get("target"),
            caused={
                (r["target_task"], r["source"], r["request"]): float(
                    r["caused_blocked_s"]
                )
                for r in d.get("caused", [])
            },
            injections=list(d.get("injections", [])),
        )


def load_ground_truth(path: str | Path) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as fh:
        return GroundTruth.from_dict(json.load(fh))


# -- simulation internals ----------------------------------------------------


class _Task:
    __slots__ = (
        "task_id",
        "stage_id",
        "query_id",
        "host",
        "start",
        "rates",
        "remaining",
        "seg_end",
        "seg_wt",
        "seg_ct",
        "seg_ra",
    )

    def __init__(self, task_id, stage_id, query_id, host, start, rates, remaining):
        self.task_id = task_id
        self.stage_id = stage_id
        self.query_id = query_id
        self.host = host
        self.start = start
        self.rates = rates  # (R,) demanded units/s, 0 where unused
        self.remaining = remaining  # (R,) units left to acquire
        self.seg_end: list[float] = []
        self.seg_wt: list[np.ndarray] = []
        self.seg_ct: list[np.ndarray] = []
        self.seg_ra: list[np.ndarray] = []


class _Waiting:
    __slots__ = ("seq", "user", "query_id", "stage_id", "index", "rates", "units", "pin")

    def __init__(self, seq, user, query_id, stage_id, index, rates, units, pin):
        self.seq = seq
        self.user = user
        self.query_id = query_id
        self.stage_id = stage_id
        self.index = index
        self.rates = rates
        self.units = units
        self.pin = pin


class _ActiveInjection:
    __slots__ = ("spec", "t0", "t1", "hosts", "req_idx", "label")

    def __init__(self, spec: InjectionSpec, t0: float, hosts: list[str]):
        self.spec = spec
        self.t0 = t0
        self.t1 = t0 + spec.duration
        self.hosts = hosts
        self.req_idx = REQUEST_INDEX[spec.request]
        self.label = spec.label or spec.kind


def simulate(config: SimConfig) -> tuple[WorkloadTrace, GroundTruth]:
    """Run the simulation and return the trace plus its ground truth."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    hosts = config.host_ids()
    tps = int(round(1.0 / config.tick))
    hb_ticks = max(1, int(round(config.heartbeat * tps)))

    cap = np.full(N_REQUESTS, np.inf)
    for req, c in config.capacity.items():
        cap[REQUEST_INDEX[req]] = c

    # Expand query specs into concrete stage/task descriptions; jitter is
    # drawn once up front in a fixed order so run order cannot perturb it.
    stage_ids: dict[tuple[str, int], str] = {}
    stage_parents: dict[str, list[str]] = {}
    stage_query: dict[str, str] = {}
    stage_tasks_left: dict[str, int] = {}
    stage_children: dict[str, list[tuple[str, int]]] = {}
    task_protos: dict[str, list[tuple[np.ndarray, np.ndarray, str | None]]] = {}
    query_user = {q.query_id: q.user for q in config.queries}

    for q in config.queries:
        for si, stage in enumerate(q.stages):
            sid = f"{q.query_id}.{si}"
            stage_ids[(q.query_id, si)] = sid
            stage_query[sid] = q.query_id
            stage_tasks_left[sid] = stage.tasks
            protos = []
            for ti in range(stage.tasks):
                rates = np.zeros(N_REQUESTS)
                units = np.zeros(N_REQUESTS)
                for d in stage.demands:
                    j = REQUEST_INDEX[d.request]
                    rj = d.rate
                    uj = d.units
                    if stage.rate_jitter > 0:
                        rj *= 1.0 + stage.rate_jitter * (2.0 * rng.random() - 1.0)
                    if stage.units_jitter > 0:
                        uj *= 1.0 + stage.units_jitter * (2.0 * rng.random() - 1.0)
                    rates[j] = rj
                    units[j] = uj
                pin = None
                if stage.pin_hosts:
                    pin = stage.pin_hosts[ti % len(stage.pin_hosts)]
                protos.append((rates, units, pin))
            task_protos[sid] = protos
    for q in config.queries:
        for si, stage in enumerate(q.stages):
            sid = stage_ids[(q.query_id, si)]
            stage_parents[sid] = [stage_ids[(q.query_id, p)] for p in stage.parents]
            for p in stage.parents:
                stage_children.setdefault(stage_ids[(q.query_id, p)], []).append(
                    (q.query_id, si)
                )

    # Runtime state.
    t_idx = 0
    waiting_by_user: dict[str, list[_Waiting]] = {}
    n_waiting = 0
    running: dict[str, list[_Task]] = {h: [] for h in hosts}
    free_slots: dict[str, int] = {h: config.slots_per_host for h in hosts}
    running_per_user: dict[str, int] = {}
    host_events: dict[str, list[float]] = {h: [] for h in hosts}
    stage_done: set[str] = set()
    stage_released: set[str] = set()
    query_started: dict[str, float] = {}
    query_finished: dict[str, float] = {}
    cum_used: dict[str, np.ndarray] = {h: np.zeros(N_REQUESTS) for h in hosts}
    sys_rows: dict[str, list[tuple[float, np.ndarray]]] = {h: [] for h in hosts}
    sys_requests: dict[str, set[int]] = {h: set() for h in hosts}
    caused: dict[tuple[str, str, str], float] = {}
    finished_tasks: list[TaskRecord] = []
    seq_counter = 0
    task_counter = 0
    pending_injections = list(config.injections)
    active_injections: list[_ActiveInjection] = []
    any_external = any(i.external for i in config.injections)

    def release_stage(qid: str, si: int, now: float) -> None:
        nonlocal seq_counter, n_waiting
        sid = stage_ids[(qid, si)]
        if sid in stage_released:
            return
        stage_released.add(sid)
        user = query_user[qid]
        queue = waiting_by_user.setdefault(user, [])
        for ti, (rates, units, pin) in enumerate(task_protos[sid]):
            seq_counter += 1
            n_waiting += 1
            queue.append(
                _Waiting(
                    seq=seq_counter,
                    user=user,
                    query_id=qid,
                    stage_id=sid,
                    index=ti,
                    rates=rates,
                    units=units,
                    pin=pin,
                )
            )

    query_submit = {q.query_id: q.submit for q in config.queries}

    def stage_ready(qid: str, si: int, now: float) -> bool:
        if now + 1e-12 < query_submit[qid]:
            return False
        sid = stage_ids[(qid, si)]
        return all(p in stage_done for p in stage_parents[sid])

    all_queries = list(config.queries)

    def maybe_activate_injections(now: float) -> None:
        for spec in list(pending_injections):
            fire = False
            if spec.start is not None and now + 1e-9 >= spec.start:
                fire = True
                t0 = max(spec.start, 0.0)
            elif spec.on_query_start is not None and spec.on_query_start in query_started:
                fire = True
                t0 = now
            if not fire:
                continue
            pending_injections.remove(spec)
            inj_hosts = spec.hosts or hosts
            if spec.external:
                active_injections.append(_ActiveInjection(spec, t0, list(inj_hosts)))
                for h in inj_hosts:
                    sys_requests[h].add(REQUEST_INDEX[spec.request])
            else:
                qid = spec.label or f"Q{spec.kind}"
                if qid not in query_user:
                    query_user[qid] = "injector"
                    sid = f"{qid}.0"
                    stage_ids[(qid, 0)] = sid
                    stage_query[sid] = qid
                    stage_parents[sid] = []
                    n = len(inj_hosts)
                    stage_tasks_left[sid] = n
                    protos = []
                    for ti in range(n):
                        rates = np.zeros(N_REQUESTS)
                        units = np.zeros(N_REQUESTS)
                        j = REQUEST_INDEX[spec.request]
                        rates[j] = spec.magnitude
                        units[j] = spec.magnitude * spec.duration
                        protos.append((rates, units, inj_hosts[ti]))
                    task_protos[sid] = protos
                    all_queries.append(
                        QuerySpec(query_id=qid, user="injector", submit=t0, stages=[])
                    )
                    injection_queries.append((qid, t0, spec))
                    release_stage(qid, 0, now)

    injection_queries: list[tuple[str, float, InjectionSpec]] = []

    def schedule(now: float) -> None:
        # FAIR per user: grant the next free slot to the least-running user.
        if not n_waiting or not any(free_slots[h] > 0 for h in hosts):
            return
        launched = True
        while launched:
            launched = False
            users = sorted(
                (u for u, lst in waiting_by_user.items() if lst),
                key=lambda u: (running_per_user.get(u, 0), u),
            )
            for user in users:
                lst = waiting_by_user[user]
                placed_idx = -1
                host = None
                for idx, w in enumerate(lst):
                    if w.pin is not None:
                        host = w.pin if free_slots.get(w.pin, 0) > 0 else None
                    else:
                        best = min(hosts, key=lambda h: (-free_slots[h], h))
                        host = best if free_slots[best] > 0 else None
                    if host is not None:
                        placed_idx = idx
                        break
                if placed_idx >= 0:
                    launch(lst.pop(placed_idx), host, now)
                    launched = True
                    break

    def launch(w: _Waiting, host: str, now: float) -> None:
        nonlocal task_counter, n_waiting
        n_waiting -= 1
        task_counter += 1
        task = _Task(
            task_id=f"T{task_counter:06d}",
            stage_id=w.stage_id,
            query_id=w.query_id,
            host=host,
            start=now,
            rates=w.rates.copy(),
            remaining=w.units.copy(),
        )
        running[host].append(task)
        free_slots[host] -= 1
        running_per_user[w.user] = running_per_user.get(w.user, 0) + 1
        host_events[host].append(now)
        if w.query_id not in query_started:
            query_started[w.query_id] = now

    def external_rate(host: str, now: float) -> np.ndarray:
        if not active_injections:
            return _ZERO_R
        ext = np.zeros(N_REQUESTS)
        for inj in active_injections:
            if host in inj.hosts and inj.t0 - 1e-12 <= now < inj.t1 - 1e-12:
                ext[inj.req_idx] += inj.spec.magnitude
        return ext

    def advance_host(host: str, t0: float, t1: float) -> list[_Task]:
        """Fluid-advance one host across [t0, t1]; returns finished tasks."""
        done: list[_Task] = []
        cur = t0
        tasks = running[host]
        while cur < t1 - 1e-12:
            ext = external_rate(host, cur)
            # Next external on/off boundary bounds the constant-rate window.
            seg_end = t1
            for inj in active_injections:
                if host in inj.hosts:
                    for b in (inj.t0, inj.t1):
                        if cur + 1e-12 < b < seg_end - 1e-12:
                            seg_end = b
            if not tasks and not ext.any():
                cur = seg_end
                continue
            if tasks:
                remaining = np.vstack([t.remaining for t in tasks])
                rates = np.vstack([t.rates for t in tasks])
                demands = rates * (remaining > 0)
            else:
                remaining = demands = np.zeros((0, N_REQUESTS))
            total = demands.sum(axis=0) + ext
            f = np.ones(N_REQUESTS)
            hot = total > cap
            f[hot] = cap[hot] / total[hot]
            grants = demands * f
            dt = seg_end - cur
            tta = None
            if tasks:
                tta = np.where(
                    grants > 0, remaining / np.where(grants > 0, grants, 1.0), np.inf
                )
                soon = tta.min()
                if soon < dt - 1e-15:
                    dt = max(soon, 1e-12)
            step_end = cur + dt if cur + dt < seg_end - 1e-15 else seg_end

            width = step_end - cur
            ext_granted = ext * f
            if ext_granted.any():
                cum_used[host] += ext_granted * width

            finished_now: list[_Task] = []
            if tasks:
                live = demands > 0
                ra_mat = grants * width
                ct_row = f * width
                wt_row = (1.0 - f) * width
                new_rem = np.where(live, np.maximum(remaining - ra_mat, 0.0), remaining)
                new_rem[live & (tta <= width + 1e-12)] = 0.0
                cum_used[host] += ra_mat.sum(axis=0)
                hot_reqs = np.nonzero((f < 1.0) & live.any(axis=0))[0]
                granted_sum = None
                if hot_reqs.size:
                    granted_sum = grants.sum(axis=0) + ext_granted
                for i, task in enumerate(tasks):
                    row_live = live[i]
                    task.remaining = new_rem[i]
                    task.seg_end.append(step_end)
                    task.seg_wt.append(np.where(row_live, wt_row, 0.0))
                    task.seg_ct.append(np.where(row_live, ct_row, 0.0))
                    task.seg_ra.append(ra_mat[i])
                    # Ground truth: split each wait second among co-demanders.
                    for j in hot_reqs:
                        if not row_live[j]:
                            continue
                        wt_j = wt_row[j]
                        if wt_j <= 0:
                            continue
                        others = granted_sum[j] - grants[i, j]
                        if others <= 0:
                            key = (task.task_id, UNKNOWN_LABEL, _REQ_VALUES[j])
                            caused[key] = caused.get(key, 0.0) + wt_j
                            continue
                        for k, other in enumerate(tasks):
                            if k == i or grants[k, j] <= 0:
                                continue
                            key = (task.task_id, other.query_id, _REQ_VALUES[j])
                            caused[key] = caused.get(key, 0.0) + wt_j * grants[k, j] / others
                        if ext_granted[j] > 0:
                            key = (task.task_id, UNKNOWN_LABEL, _REQ_VALUES[j])
                            caused[key] = caused.get(key, 0.0) + wt_j * ext_granted[j] / others
                    if not task.remaining.any():
                        finished_now.append(task)
            cur = step_end
            for task in finished_now:
                tasks.remove(task)
                done.append(task)
                finish_task(task, cur)
        return done

    def finish_task(task: _Task, now: float) -> None:
        host_events[task.host].append(now)
        free_slots[task.host] += 1
        user = query_user[task.query_id]
        running_per_user[user] = running_per_user.get(user, 0) - 1
        record = _emit_task(task, now, host_events[task.host], config, tps, hb_ticks)
        finished_tasks.append(record)
        left = stage_tasks_left[task.stage_id] - 1
        stage_tasks_left[task.stage_id] = left
        if left == 0:
            stage_done.add(task.stage_id)
        qf = query_finished.get(task.query_id, 0.0)
        query_finished[task.query_id] = max(qf, now)

    # -- main loop ------------------------------------------------------------
    release_scan = [
        (q.query_id, si) for q in config.queries for si in range(len(q.stages))
    ]
    max_ticks = int(round(config.max_time * tps))
    clean_exit = False
    while t_idx <= max_ticks:
        now = t_idx / tps
        maybe_activate_injections(now)
        for qid, si in release_scan:
            if stage_ids[(qid, si)] not in stage_released and stage_ready(
                qid, si, now
            ):
                release_stage(qid, si, now)
        schedule(now)
        maybe_activate_injections(now)

        all_idle = (
            n_waiting == 0
            and not pending_injections
            and len(stage_released) >= len(stage_ids)
            and all(not r for r in running.values())
            and all(inj.t1 <= now + 1e-9 for inj in active_injections)
        )
        if all_idle:
            clean_exit = True
            break

        t_next = (t_idx + 1) / tps
        for host in hosts:
            advance_host(host, now, t_next)
            if sys_requests[host] and (
                t_idx % hb_ticks == 0
                or _any_injection_edge(active_injections, host, now, t_next)
            ):
                sys_rows[host].append((t_next, cum_used[host].copy()))
        t_idx += 1

    if not clean_exit:
        raise ValueError(
            f"simulation did not drain within max_time={config.max_time}s"
        )
    end_time = t_idx / tps
    return _assemble(
        config,
        hosts,
        finished_tasks,
        stage_ids,
        stage_parents,
        stage_query,
        all_queries,
        query_user,
        query_started,
        query_finished,
        sys_rows,
        sys_requests,
        caused,
        injection_queries,
        active_injections,
        end_time,
    )


def _stages_of(config: SimConfig, qid: str) -> list[StageSpec]:
    for q in config.queries:
        if q.query_id == qid:
            return q.stages
    return []


def _any_injection_edge(
    active: list[_ActiveInjection], host: str, t0: float, t1: float
) -> bool:
    for inj in active:
        if host in inj.hosts and (t0 - 1e-9 <= inj.t0 <= t1 + 1e-9 or t0 - 1e-9 <= inj.t1 <= t1 + 1e-9 or inj.t0 <= t0 < inj.t1):
            return True
    return False


def _emit_task(
    task: _Task,
    end: float,
    events: list[float],
    config: SimConfig,
    tps: int,
    hb_ticks: int,
) -> TaskRecord:
    """Merge fluid segments into samples at event + heartbeat boundaries."""
    emit: set[float] = set()
    for e in events:
        if task.start < e < end:
            emit.add(e)
    k0 = math.floor(task.start * tps / hb_ticks) + 1
    k = k0
    while True:
        t = (k * hb_ticks) / tps
        if t >= end:
            break
        if t > task.start:
            emit.add(t)
        k += 1
    # Merge near-coincident boundaries (a completion instant can sit a few
    # ulps from a tick) and force the exact end as the last emission.
    emission: list[float] = []
    for t in sorted(emit):
        if not emission or t - emission[-1] > 1e-6:
            emission.append(t)
    while emission and emission[-1] > end - 1e-6:
        emission.pop()
    emission.append(end)

    samples: list[MetricSample] = []
    if task.seg_end:
        seg_end = np.asarray(task.seg_end)
        wt_m = np.vstack(task.seg_wt)
        ct_m = np.vstack(task.seg_ct)
        ra_m = np.vstack(task.seg_ra)
        # Window i covers segments (idx[i-1], idx[i]]; every emission time
        # is a segment boundary, so searchsorted partitions them exactly.
        idx = np.searchsorted(seg_end, np.asarray(emission) - 1e-12, side="left")
        starts = np.concatenate([[0], idx[:-1] + 1])
        keep = starts <= idx
        sums_wt = np.zeros((len(emission), N_REQUESTS))
        sums_ct = np.zeros_like(sums_wt)
        sums_ra = np.zeros_like(sums_wt)
        if keep.any():
            red_wt = np.add.reduceat(wt_m, starts[keep].astype(int))
            # reduceat sums from each start to the next start; windows are
            # contiguous so consecutive starts partition the rows
            sums_wt[keep] = red_wt
            sums_ct[keep] = np.add.reduceat(ct_m, starts[keep].astype(int))
            sums_ra[keep] = np.add.reduceat(ra_m, starts[keep].astype(int))
        hot = (sums_wt + sums_ct + sums_ra) != 0.0
        for i, t_emit in enumerate(emission):
            metrics = {}
            for j in np.nonzero(hot[i])[0]:
                metrics[REQUESTS[j]] = MetricDelta(
                    float(sums_wt[i, j]), float(sums_ct[i, j]), float(sums_ra[i, j])
                )
            samples.append(MetricSample(t=t_emit, metrics=metrics))
    if not samples or abs(samples[-1].t - end) > 1e-12:
        samples.append(MetricSample(t=end, metrics={}))
    return TaskRecord(
        task_id=task.task_id,
        stage_id=task.stage_id,
        query_id=task.query_id,
        host_id=task.host,
        start_time=task.start,
        end_time=end,
        samples=samples,
    )


def _assemble(
    config: SimConfig,
    hosts: list[str],
    tasks: list[TaskRecord],
    stage_ids: dict,
    stage_parents: dict,
    stage_query: dict,
    all_queries: list[QuerySpec],
    query_user: dict,
    query_started: dict,
    query_finished: dict,
    sys_rows: dict,
    sys_requests: dict,
    caused: dict,
    injection_queries: list,
    active_injections: list[_ActiveInjection],
    end_time: float,
) -> tuple[WorkloadTrace, GroundTruth]:
    trace = WorkloadTrace(heartbeat_interval=config.heartbeat)
    for h in hosts:
        prof = HostProfile(host_id=h)
        for req, c in config.capacity.items():
            prof.capacity[req] = c
        for t, cum in sys_rows[h]:
            for j in sorted(sys_requests[h]):
                prof.syscounters.setdefault(REQUESTS[j], []).append((t, float(cum[j])))
        trace.hosts[h] = prof
    for q in all_queries:
        qid = q.query_id
        trace.queries[qid] = QueryRecord(
            query_id=qid,
            user=query_user[qid],
            submit_time=query_started.get(qid, q.submit),
            finish_time=query_finished.get(qid, query_started.get(qid, q.submit)),
        )
    for (qid, si), sid in sorted(stage_ids.items()):
        trace.stages[sid] = StageRecord(
            stage_id=sid,
            query_id=stage_query[sid],
            parent_stage_ids=list(stage_parents.get(sid, [])),
        )
    for task in sorted(tasks, key=lambda t: t.task_id):
        trace.tasks[task.task_id] = task
        trace.stages[task.stage_id].task_ids.append(task.task_id)

    from .model import _recompute_work_done

    _recompute_work_done(trace)

    aggressors = []
    inj_meta = []
    for qid, t0, spec in injection_queries:
        aggressors.append(qid)
        # The injected query's load lasts until its tasks actually finish,
        # which contention stretches beyond the configured duration.
        inj_meta.append(
            {
                "kind": spec.kind,
                "query": qid,
                "start": query_started.get(qid, t0),
                "end": float(query_finished.get(qid, t0 + spec.duration)),
                "hosts": spec.hosts or hosts,
                "request": spec.request.value,
                "magnitude": spec.magnitude,
            }
        )
    for inj in active_injections:
        aggressors.append(UNKNOWN_LABEL)
        inj_meta.append(
            {
                "kind": inj.spec.kind,
                "query": UNKNOWN_LABEL,
                "start": inj.t0,
                "end": inj.t1,
                "hosts": inj.hosts,
                "request": inj.spec.request.value,
                "magnitude": inj.spec.magnitude,
            }
        )
    truth = GroundTruth(
        aggressors=sorted(set(aggressors)),
        target=config.target,
        caused=caused,
        injections=sorted(inj_meta, key=lambda m: (m["start"], m["kind"])),
    )
    return trace, truth


def simulate_to_files(
    config: SimConfig, trace_path: str | Path, truth_path: str | Path
) -> tuple[WorkloadTrace, GroundTruth]:
    trace, truth = simulate(config)
    write_trace(trace, trace_path)
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth.to_dict(), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    return trace, truth


def score_attribution(
    truth: GroundTruth,
    ranked: list[tuple[str, float]],
    k: int,
    request: ResourceRequest | None = None,
) -> dict[str, float]:
    """Precision@k against labeled aggressors plus L1 share error.

    ``ranked`` is a (entity id, score) list, highest first; entity ids are
    source query ids or "Unknown". Share error compares the normalized
    ranked scores with the normalized ground-truth caused-blocked shares
    over the union of entities.
    """
    top = [e for e, _ in ranked[:k]]
    labeled = set(truth.aggressors)
    hits = sum(1 for e in top if e in labeled)
    precision = hits / k if k > 0 else 0.0

    truth_by_source = truth.caused_by_source(request)
    score_by_source = {e: max(s, 0.0) for e, s in ranked}
    entities = sorted(set(truth_by_source) | set(score_by_source))
    tv = np.array([truth_by_source.get(e, 0.0) for e in entities])
    sv = np.array([score_by_source.get(e, 0.0) for e in entities])
    if tv.sum() > 0:
        tv = tv / tv.sum()
    if sv.sum() > 0:
        sv = sv / sv.sum()
    share_error = float(np.abs(tv - sv).sum())
    return {"precision_at_k": precision, "share_error": share_error}


# -- scenario library ----------------------------------------------------------

RR = ResourceRequest

_BASE_CAPACITY = {
    RR.IoRead: 1e8,
    RR.IoWrite: 1e8,
    RR.NetworkFetch: 1e8,
    RR.CpuOsSched: 8.0,
    RR.CpuMonitorLock: 8.0,
    RR.CpuGc: 8.0,
    RR.StorageMemory: 5e8,
    RR.ExecutionMemory: 5e8,
}


def _background_queries(n: int, spread: float = 4.0) -> list[QuerySpec]:
    """Light mixed-demand tenants submitting on a fixed cadence."""
    out = []
    for i in range(n):
        out.append(
            QuerySpec(
                query_id=f"Qbg{i + 1}",
                user=f"u{i + 1}",
                submit=i * spread,
                stages=[
                    StageSpec(
                        tasks=2,
                        rate_jitter=0.15,
                        units_jitter=0.15,
                        demands=[
                            TaskDemand(RR.IoRead, rate=1.2e7, units=1.0e8),
                            TaskDemand(RR.CpuOsSched, rate=0.8, units=6.0),
                        ],
                    ),
                    StageSpec(
                        tasks=2,
                        parents=[0],
                        rate_jitter=0.15,
                        units_jitter=0.15,
                        demands=[
                            TaskDemand(RR.NetworkFetch, rate=1.5e7, units=7.5e7),
                            TaskDemand(RR.CpuOsSched, rate=0.6, units=3.0),
                        ],
                    ),
                ],
            )
        )
    return out


def _target_query(hosts: list[str]) -> QuerySpec:
    """The analyzed tenant: one task per host per stage, CPU + IO work."""
    return QuerySpec(
        query_id="Qt",
        user="analyst",
        submit=4.0,
        stages=[
            StageSpec(
                tasks=len(hosts),
                pin_hosts=hosts,
                demands=[
                    TaskDemand(RR.IoRead, rate=4.0e7, units=2.4e8),
                    TaskDemand(RR.CpuOsSched, rate=2.0, units=12.0),
                ],
            ),
            StageSpec(
                tasks=len(hosts),
                parents=[0],
                pin_hosts=hosts,
                demands=[
                    TaskDemand(RR.CpuOsSched, rate=2.0, units=8.0),
                    TaskDemand(RR.IoWrite, rate=2.0e7, units=8.0e7),
                ],
            ),
        ],
    )


def scenario_library(seed: int = 7) -> dict[str, SimConfig]:
    """Named induced-contention scenarios with known aggressors."""
    hosts2 = ["H1", "H2"]
    lib: dict[str, SimConfig] = {}

    lib["baseline-no-injection"] = SimConfig(
        seed=seed,
        n_hosts=2,
        slots_per_host=8,
        capacity=dict(_BASE_CAPACITY),
        heartbeat=2.0,
        target="Qt",
        queries=[_target_query(hosts2)] + _background_queries(3),
    )

    cfg = SimConfig(
        seed=seed,
        n_hosts=2,
        slots_per_host=8,
        capacity=dict(_BASE_CAPACITY),
        heartbeat=2.0,
        target="Qt",
        queries=[_target_query(hosts2)] + _background_queries(3),
        injections=[
            InjectionSpec(
                kind="CpuInternal",
                magnitude=24.0,
                duration=6.0,
                on_query_start="Qt",
                label="Qhog",
            )
        ],
    )
    lib["cpu-internal-hog"] = cfg

    lib["io-external-load"] = SimConfig(
        seed=seed,
        n_hosts=2,
        slots_per_host=8,
        capacity=dict(_BASE_CAPACITY),
        heartbeat=2.0,
        target="Qt",
        queries=[
            QuerySpec(
                query_id="Qt",
                user="analyst",
                submit=4.0,
                stages=[
                    StageSpec(
                        tasks=2,
                        pin_hosts=hosts2,
                        demands=[
                            TaskDemand(RR.IoRead, rate=8.0e7, units=4.8e8),
                            TaskDemand(RR.CpuOsSched, rate=1.0, units=6.0),
                        ],
                    )
                ],
            )
        ]
        + _background_queries(3),
        injections=[
            InjectionSpec(
                kind="IoExternal",
                magnitude=4.0e8,
                duration=6.0,
                on_query_start="Qt",
            )
        ],
    )

    lib["mem-internal-cache"] = SimConfig(
        seed=seed,
        n_hosts=2,
        slots_per_host=8,
        capacity=dict(_BASE_CAPACITY),
        heartbeat=2.0,
        target="Qt",
        queries=[
            QuerySpec(
                query_id="Qt",
                user="analyst",
                submit=6.0,
                stages=[
                    StageSpec(
                        tasks=2,
                        pin_hosts=hosts2,
                        demands=[
                            TaskDemand(RR.StorageMemory, rate=2.0e8, units=1.2e9),
                            TaskDemand(RR.CpuOsSched, rate=1.0, units=6.0),
                        ],
                    )
                ],
            )
        ]
        + _background_queries(3),
        injections=[
            InjectionSpec(
                kind="MemInternal",
                magnitude=4.0e8,
                duration=8.0,
                start=5.0,
                label="Qmem",
            )
        ],
    )

    lib["disjoint-resource-decoy"] = SimConfig(
        seed=seed,
        n_hosts=2,
        slots_per_host=8,
        capacity=dict(_BASE_CAPACITY),
        heartbeat=2.0,
        target="Qt",
        queries=[
            QuerySpec(
                query_id="Qt",
                user="analyst",
                submit=4.0,
                stages=[
                    StageSpec(
                        tasks=2,
                        pin_hosts=hosts2,
                        demands=[
                            TaskDemand(RR.IoRead, rate=8.0e7, units=4.8e8),
                            TaskDemand(RR.CpuOsSched, rate=0.5, units=3.0),
                        ],
                    )
                ],
            ),
            # Fully overlapping but demanding only uncontended CPU.
            QuerySpec(
                query_id="Qdecoy",
                user="decoy",
                submit=2.0,
                stages=[
                    StageSpec(
                        tasks=2,
                        pin_hosts=hosts2,
                        demands=[TaskDemand(RR.CpuOsSched, rate=2.0, units=28.0)],
                    )
                ],
            ),
            # The genuine IO contender, overlapping only briefly.
            QuerySpec(
                query_id="Qio",
                user="io",
                submit=6.0,
                stages=[
                    StageSpec(
                        tasks=2,
                        pin_hosts=hosts2,
                        demands=[TaskDemand(RR.IoRead, rate=8.0e7, units=1.6e8)],
                    )
                ],
            ),
        ],
    )

    for n in (1, 2, 4):
        lib[f"full-overlap-exact-{n}"] = full_overlap_config(n, seed=seed)

    return lib


def full_overlap_config(n_sources: int, seed: int = 7) -> SimConfig:
    """One host, one request, n+1 identical capacity-demanding tasks.

    Every participant demands the full capacity, so the request is
    saturated with equal shares for the whole run and all tasks start and
    finish together: the exact setting in which summed pairwise blame must
    reproduce the measured slowdown.
    """
    queries = []
    for i in range(n_sources + 1):
        qid = "Qt" if i == 0 else f"Qs{i}"
        queries.append(
            QuerySpec(
                query_id=qid,
                user=f"u{i}",
                submit=0.0,
                stages=[
                    StageSpec(
                        tasks=1,
                        pin_hosts=["H1"],
                        demands=[TaskDemand(RR.IoRead, rate=1e8, units=2e8)],
                    )
                ],
            )
        )
    return SimConfig(
        seed=seed,
        n_hosts=1,
        slots_per_host=max(8, n_sources + 1),
        capacity={RR.IoRead: 1e8},
        heartbeat=2.0,
        target="Qt",
        queries=queries,
    )


def random_workload(
    seed: int,
    n_queries: int = 25,
    stages_per_query: int = 4,
    tasks_per_stage: int = 100,
    n_hosts: int = 16,
    slots_per_host: int = 16,
) -> SimConfig:
    """A large randomized multi-tenant mix for scale and soak testing."""
    rng = np.random.default_rng(seed)
    # Mixed tenants at moderate utilization: requests run hot episodically
    # (when co-placement peaks), not continuously.
    mixes = [
        [TaskDemand(RR.IoRead, 1.2e7, 2.4e7), TaskDemand(RR.CpuOsSched, 0.6, 1.2)],
        [TaskDemand(RR.CpuOsSched, 1.2, 2.4), TaskDemand(RR.NetworkFetch, 8.0e6, 1.6e7)],
        [TaskDemand(RR.NetworkFetch, 1.6e7, 3.2e7), TaskDemand(RR.IoWrite, 8.0e6, 1.6e7)],
        [TaskDemand(RR.ExecutionMemory, 5.0e7, 1.0e8), TaskDemand(RR.CpuOsSched, 0.6, 1.2)],
    ]
    queries = []
    for qi in range(n_queries):
        stages = []
        for si in range(stages_per_query):
            mix = mixes[int(rng.integers(len(mixes)))]
            stages.append(
                StageSpec(
                    tasks=tasks_per_stage,
                    parents=[si - 1] if si > 0 else [],
                    rate_jitter=0.2,
                    units_jitter=0.3,
                    demands=[TaskDemand(d.request, d.rate, d.units) for d in mix],
                )
            )
        queries.append(
            QuerySpec(
                query_id=f"Q{qi + 1}",
                user=f"u{qi % 6 + 1}",
                submit=float(qi) * 0.5,
                stages=stages,
            )
        )
    return SimConfig(
        seed=seed,
        n_hosts=n_hosts,
        slots_per_host=slots_per_host,
        capacity=dict(_BASE_CAPACITY),
        heartbeat=2.0,
        target="Q1",
        queries=queries,
        max_time=1200.0,
    )


def frequency_study_config(seed: int = 42) -> SimConfig:
    """Busy two-host mix for the collection-cadence sensitivity study.

    Many short jittered background tasks from eight tenants contend with a
    long-running two-task target, giving the coarse-grained re-sampled
    traces a smooth accuracy falloff. The default seed is the pinned
    reference trace for the cadence-ordering acceptance check.
    """
    caps = dict(_BASE_CAPACITY)
    target = QuerySpec(
        query_id="Qt",
        user="analyst",
        submit=2.0,
        stages=[
            StageSpec(
                tasks=2,
                pin_hosts=["H1", "H2"],
                demands=[
                    TaskDemand(RR.CpuOsSched, 2.5, 140.0),
                    TaskDemand(RR.IoRead, 2.0e7, 1.12e9),
                ],
            )
        ],
    )
    mixes = [
        [TaskDemand(RR.CpuOsSched, 2.0, 4.0), TaskDemand(RR.IoRead, 1.0e7, 2.0e7)],
        [TaskDemand(RR.CpuOsSched, 1.2, 2.4), TaskDemand(RR.IoRead, 2.5e7, 5.0e7)],
        [TaskDemand(RR.IoRead, 4.0e7, 8.0e7), TaskDemand(RR.CpuOsSched, 0.8, 1.6)],
        [TaskDemand(RR.CpuOsSched, 3.0, 6.0)],
        [TaskDemand(RR.IoRead, 2.0e7, 4.0e7), TaskDemand(RR.CpuOsSched, 1.5, 3.0)],
        [TaskDemand(RR.CpuOsSched, 1.0, 2.0), TaskDemand(RR.IoRead, 3.0e7, 6.0e7)],
        [TaskDemand(RR.CpuOsSched, 2.4, 4.8)],
        [TaskDemand(RR.IoRead, 3.5e7, 7.0e7), TaskDemand(RR.CpuOsSched, 1.1, 2.2)],
    ]
    bg = []
    for i in range(8):
        stages = []
        for s in range(5):
            stages.append(
                StageSpec(
                    tasks=5,
                    parents=[s - 1] if s else [],
                    rate_jitter=0.5,
                    units_jitter=0.6,
                    demands=[
                        TaskDemand(d.request, d.rate, d.units)
                        for d in mixes[(i + s) % len(mixes)]
                    ],
                )
            )
        bg.append(
            QuerySpec(
                query_id=f"Qbg{i + 1}",
                user=f"u{i + 1}",
                submit=round(0.9 * i * 10) / 10,
                stages=stages,
            )
        )
    return SimConfig(
        seed=seed,
        n_hosts=2,
        slots_per_host=8,
        capacity=caps,
        heartbeat=2.0,
        target="Qt",
        queries=[target] + bg,
        max_time=900.0,
    )
