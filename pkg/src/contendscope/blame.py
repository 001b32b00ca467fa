"""Slowdown and blame attribution between target tasks and their sources.

Blame from a source to a target task for one request is the per-slice sum
over their overlap of (blocked target penalty / max source penalty) * dtau,
normalized by the target's total runtime. The interval length cancels,
leaving wt_tt * ra_src / ra_tt per slice. A slice where either side exerts
no demand contributes exactly 0.

Sources are concurrent tasks, a synthetic per-host GC blocker (its demand
is its active seconds), named known causes with configured usage windows,
and a synthetic Unknown source whose demand is the system-counter residual
left after subtracting all task acquisitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .intervals import HostSlicing, IntervalSlice, overlap, ratp
from .model import (
    N_REQUESTS,
    REQUEST_INDEX,
    ResourceRequest,
    TaskRecord,
    WorkloadTrace,
)


class ConfigurationError(Exception):
    """Missing capacity with the penalty-floor estimator disabled."""


# -- source entities ----------------------------------------------------


@dataclass(frozen=True)
class TaskSource:
    task_id: str
    stage_id: str
    query_id: str


@dataclass(frozen=True)
class GcSource:
    host_id: str


@dataclass(frozen=True)
class KnownCauseSource:
    name: str
    request: ResourceRequest


@dataclass(frozen=True)
class UnknownSource:
    """Singleton catch-all; treated as overlapping every task everywhere."""


SourceEntity = TaskSource | GcSource | KnownCauseSource | UnknownSource


@dataclass(frozen=True)
class BlameTerm:
    source: SourceEntity
    target_task: str
    request: ResourceRequest
    host: str
    beta: float
    overlap_seconds: float


@dataclass(frozen=True)
class SlowdownValue:
    task_id: str
    request: ResourceRequest
    value: float


class WorkloadSlicing:
    """Lazy per-host slicing cache for one trace."""

    def __init__(self, trace: WorkloadTrace):
        self.trace = trace
        self._hosts: dict[str, HostSlicing] = {}

    def host(self, host_id: str) -> HostSlicing:
        hs = self._hosts.get(host_id)
        if hs is None:
            hs = HostSlicing(self.trace, host_id)
            self._hosts[host_id] = hs
        return hs

    def for_task(self, task_id: str) -> HostSlicing:
        return self.host(self.trace.tasks[task_id].host_id)


# -- ideal penalty floor --------------------------------------------------


def ideal_ratp(
    hs: HostSlicing, request: ResourceRequest, estimate: bool = True
) -> float | None:
    """Best achievable seconds-per-unit for a request on this host.

    Uses 1/capacity when the host profile carries one; otherwise the 5th
    percentile of defined penalties across all slices on the host. Returns
    None when nothing on the host ever demanded the request. Raises
    :class:`ConfigurationError` if capacity is missing and ``estimate`` is
    off.
    """
    host = hs.trace.hosts[hs.host_id]
    cap = host.capacity.get(request)
    if cap is not None and cap > 0:
        return 1.0 / cap
    if not estimate:
        raise ConfigurationError(
            f"host {hs.host_id} has no capacity for {request.value} "
            "and estimation is disabled"
        )
    j = REQUEST_INDEX[request]
    vals: list[np.ndarray] = []
    for ts in hs.by_task.values():
        live = ts.ra[:, j] > 0.0
        if live.any():
            vals.append((ts.wt[live, j] + ts.ct[live, j]) / ts.ra[live, j])
    if not vals:
        return None
    return float(np.percentile(np.concatenate(vals), 5.0))


def ideal_vector(hs: HostSlicing, estimate: bool = True) -> np.ndarray:
    """(R,) penalty floors for a host, NaN where undefined."""
    out = np.full(N_REQUESTS, np.nan)
    for req, j in REQUEST_INDEX.items():
        floor = ideal_ratp(hs, req, estimate=estimate)
        if floor is not None and floor > 0:
            out[j] = floor
    return out


def slowdown(
    sl: IntervalSlice, request: ResourceRequest, ideal: float
) -> SlowdownValue:
    """Relative excess of a slice's penalty over the host floor, >= 0."""
    if ideal is None or ideal <= 0:
        raise ConfigurationError("ideal penalty must be positive")
    r = ratp(sl, request)
    value = 0.0 if r is None else max(0.0, (r - ideal) / ideal)
    return SlowdownValue(task_id=sl.task_id, request=request, value=value)


def task_slowdown(
    hs: HostSlicing, task_id: str, request: ResourceRequest, ideal: float
) -> float:
    """Runtime-weighted mean slice slowdown of one task for one request."""
    if ideal is None or ideal <= 0:
        raise ConfigurationError("ideal penalty must be positive")
    ts = hs.by_task[task_id]
    vec = np.full(N_REQUESTS, np.nan)
    vec[REQUEST_INDEX[request]] = ideal
    sums = kernels.slowdown_sums(ts.wt, ts.ct, ts.ra, ts.dtau, vec)
    duration = hs.tasks[task_id].duration
    return float(sums[REQUEST_INDEX[request]]) / duration


def task_slowdown_vector(
    hs: HostSlicing, task_id: str, ideal: np.ndarray
) -> np.ndarray:
    ts = hs.by_task[task_id]
    sums = kernels.slowdown_sums(ts.wt, ts.ct, ts.ra, ts.dtau, ideal)
    return sums / hs.tasks[task_id].duration


# -- source demand resolution ---------------------------------------------


def _source_ra_cells(
    hs: HostSlicing, source: SourceEntity, k0: int, k1: int
) -> np.ndarray | None:
    """Per-slice acquired units of a source over grid cells [k0, k1), (m, R).

    Returns None when the source has no presence there (e.g. task source
    without overlap), which the callers treat as zero blame.
    """
    m = k1 - k0
    if isinstance(source, TaskSource):
        st = hs.by_task.get(source.task_id)
        if st is None:
            return None
        return st.ra[k0 - st.i0 : k1 - st.i0]
    if isinstance(source, GcSource):
        if source.host_id != hs.host_id:
            return None
        gc = hs.gc_cells()[k0:k1]
        return np.repeat(gc[:, None], N_REQUESTS, axis=1)
    if isinstance(source, KnownCauseSource):
        cells = hs.known_cause_cells(source.name)[k0:k1]
        out = np.zeros((m, N_REQUESTS))
        out[:, REQUEST_INDEX[source.request]] = cells
        return out
    if isinstance(source, UnknownSource):
        return hs.unaccounted_cells()[k0:k1]
    raise TypeError(f"unsupported source {source!r}")


def _target_range(
    hs: HostSlicing, tt: TaskRecord, source: SourceEntity
) -> tuple[int, int, float] | None:
    """Grid cell range of the (target, source) overlap plus its length."""
    if isinstance(source, TaskSource):
        st = hs.tasks.get(source.task_id)
        if st is None or st.task_id == tt.task_id:
            return None
        ov = overlap(tt, st)
        if ov is None:
            return None
        k0 = hs.grid_index(ov[0])
        k1 = hs.grid_index(ov[1])
        return k0, k1, ov[1] - ov[0]
    # Synthetic sources span the target's entire lifetime.
    ts = hs.by_task[tt.task_id]
    return ts.i0, ts.i1, tt.duration


def blame_vector(
    hs: HostSlicing, target_task_id: str, source: SourceEntity
) -> np.ndarray:
    """(R,) blocked-form blame from one source toward one target task."""
    tt = hs.tasks[target_task_id]
    rng = _target_range(hs, tt, source)
    out = np.zeros(N_REQUESTS)
    if rng is None:
        return out
    k0, k1, _ = rng
    if k1 <= k0:
        return out
    ra_src = _source_ra_cells(hs, source, k0, k1)
    if ra_src is None:
        return out
    ts = hs.by_task[target_task_id]
    a, b = k0 - ts.i0, k1 - ts.i0
    sums = kernels.blame_blocked_sums(ts.wt[a:b], ts.ra[a:b], ra_src)
    return sums / tt.duration


def blame_pair(
    hs: HostSlicing,
    target_task_id: str,
    source: SourceEntity,
    request: ResourceRequest,
) -> BlameTerm:
    """Blocked-form blame for one (target task, source, request)."""
    tt = hs.tasks[target_task_id]
    rng = _target_range(hs, tt, source)
    ov_seconds = 0.0 if rng is None else rng[2]
    beta = float(blame_vector(hs, target_task_id, source)[REQUEST_INDEX[request]])
    return BlameTerm(
        source=source,
        target_task=target_task_id,
        request=request,
        host=hs.host_id,
        beta=beta,
        overlap_seconds=ov_seconds,
    )


def blame_full_form(
    hs: HostSlicing,
    target_task_id: str,
    source_task_id: str,
    request: ResourceRequest,
) -> float:
    """Unblocked blame between two tasks: full penalty over full penalty.

    Kept for the blocked-form upper-bound property and for research
    comparisons; can be +inf if the source acquired in zero time.
    """
    tt = hs.tasks[target_task_id]
    st = hs.tasks.get(source_task_id)
    if st is None:
        return 0.0
    ov = overlap(tt, st)
    if ov is None:
        return 0.0
    k0 = hs.grid_index(ov[0])
    k1 = hs.grid_index(ov[1])
    if k1 <= k0:
        return 0.0
    ts_t = hs.by_task[target_task_id]
    ts_s = hs.by_task[source_task_id]
    a, b = k0 - ts_t.i0, k1 - ts_t.i0
    c, d = k0 - ts_s.i0, k1 - ts_s.i0
    sums = kernels.blame_full_sums(
        ts_t.wt[a:b],
        ts_t.ct[a:b],
        ts_t.ra[a:b],
        ts_s.wt[c:d],
        ts_s.ct[c:d],
        ts_s.ra[c:d],
        ts_t.dtau[a:b],
    )
    return float(sums[REQUEST_INDEX[request]]) / tt.duration


def unaccounted_resource(
    trace: WorkloadTrace,
    host_id: str,
    request: ResourceRequest,
    t0: float,
    t1: float,
) -> float:
    """Units used system-wide in [t0, t1] beyond what tasks acquired.

    Returns 0 when no syscounter series exists for the (host, request);
    negative residuals clamp to 0.
    """
    host = trace.hosts.get(host_id)
    if host is None or t1 <= t0:
        return 0.0
    series = host.syscounters.get(request)
    if not series:
        return 0.0
    ts = np.asarray([p[0] for p in series])
    vs = np.asarray([p[1] for p in series])
    used = float(np.interp(t1, ts, vs) - np.interp(t0, ts, vs))
    acquired = 0.0
    for task in trace.tasks.values():
        if task.host_id != host_id:
            continue
        prev = task.start_time
        for sample in task.samples:
            d = sample.metrics.get(request)
            if d is not None and d.ra > 0:
                lo, hi = max(prev, t0), min(sample.t, t1)
                if hi > lo:
                    acquired += d.ra * (hi - lo) / (sample.t - prev)
            prev = sample.t
    return max(0.0, used - acquired)


# -- aggregation ------------------------------------------------------------


def concurrent_sources(hs: HostSlicing, target_task_id: str) -> list[TaskSource]:
    """Tasks on the host overlapping the target, as blame sources."""
    tt = hs.tasks[target_task_id]
    out = []
    for st in hs.tasks.values():
        if st.task_id == target_task_id:
            continue
        if overlap(tt, st) is not None:
            out.append(TaskSource(st.task_id, st.stage_id, st.query_id))
    out.sort(key=lambda s: s.task_id)
    return out


def synthetic_sources(hs: HostSlicing) -> list[SourceEntity]:
    """GC (when the host logged activity), known causes, and Unknown."""
    out: list[SourceEntity] = []
    host = hs.trace.hosts[hs.host_id]
    if host.gc_windows:
        out.append(GcSource(hs.host_id))
    for name in sorted(hs.trace.known_causes):
        kc = hs.trace.known_causes[name]
        if kc.host_id == hs.host_id and kc.windows:
            out.append(KnownCauseSource(kc.name, kc.request))
    out.append(UnknownSource())
    return out


def decompose_slowdown(
    hs: HostSlicing,
    target_task_id: str,
    request: ResourceRequest,
    estimate: bool = True,
    form: str = "blocked",
) -> dict[str, float]:
    """Split a task's measured slowdown into the three blame buckets.

    Returns concurrent / known / unknown sums plus the measured slowdown
    and the unexplained residual (never rescaled). ``form`` picks the
    concurrent-task blame route: the operational blocked form (default,
    a conservative lower attribution) or the full form, which is the one
    that reconstructs the measured slowdown exactly under saturated
    proportional sharing.
    """
    if form not in ("blocked", "full"):
        raise ValueError(f"unknown blame form {form!r}")
    j = REQUEST_INDEX[request]
    concurrent = 0.0
    for src in concurrent_sources(hs, target_task_id):
        if form == "full":
            concurrent += blame_full_form(hs, target_task_id, src.task_id, request)
        else:
            concurrent += float(blame_vector(hs, target_task_id, src)[j])
    known = 0.0
    unknown = 0.0
    for src in synthetic_sources(hs):
        value = float(blame_vector(hs, target_task_id, src)[j])
        if isinstance(src, UnknownSource):
            unknown += value
        else:
            known += value
    floor = ideal_ratp(hs, request, estimate=estimate)
    if floor is None or floor <= 0:
        measured = 0.0
    else:
        measured = task_slowdown(hs, target_task_id, request, floor)
    return {
        "concurrent": concurrent,
        "known": known,
        "unknown": unknown,
        "measured": measured,
        "residual": measured - (concurrent + known + unknown),
    }


def stage_blame(
    ws: WorkloadSlicing,
    target_stage_id: str,
    source: SourceEntity | str,
    request: ResourceRequest,
    host_id: str,
) -> float:
    """Aggregate blame toward a target stage's tasks on one host.

    ``source`` is either a single entity or a source stage id, in which
    case every task of that stage on the host contributes.
    """
    trace = ws.trace
    hs = ws.host(host_id)
    j = REQUEST_INDEX[request]
    total = 0.0
    for tid in trace.stages[target_stage_id].task_ids:
        if trace.tasks[tid].host_id != host_id:
            continue
        if isinstance(source, str):
            for sid in trace.stages[source].task_ids:
                st = trace.tasks[sid]
                if st.host_id != host_id or sid == tid:
                    continue
                src = TaskSource(sid, st.stage_id, st.query_id)
                total += float(blame_vector(hs, tid, src)[j])
        else:
            total += float(blame_vector(hs, tid, source)[j])
    return total


__all__ = [
    "BlameTerm",
    "ConfigurationError",
    "GcSource",
    "KnownCauseSource",
    "SlowdownValue",
    "SourceEntity",
    "TaskSource",
    "UnknownSource",
    "WorkloadSlicing",
    "blame_full_form",
    "blame_pair",
    "blame_vector",
    "concurrent_sources",
    "decompose_slowdown",
    "ideal_ratp",
    "ideal_vector",
    "slowdown",
    "stage_blame",
    "synthetic_sources",
    "task_slowdown",
    "task_slowdown_vector",
    "unaccounted_resource",
]
