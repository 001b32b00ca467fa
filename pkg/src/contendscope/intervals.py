"""Interval segmentation, metric apportioning and acquire-time penalties.

Each task's lifetime is cut into slices at the start/end events of every
task on the same host plus heartbeat ticks, so that within one slice the
set of concurrent tasks is constant. All tasks on a host share one global
boundary grid; a task's slices are the grid cells covered by its lifetime.
This guarantees that any two overlapping tasks have identical slice
boundaries inside their overlap, which the blame computation relies on.

Sample deltas are spread across slices piecewise-uniformly (proportional
to time overlap with the sample window), conserving totals exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import (
    N_REQUESTS,
    REQUEST_INDEX,
    REQUESTS,
    ResourceRequest,
    TaskRecord,
    WorkloadTrace,
)

#: Boundaries closer than this are merged into one.
BOUNDARY_EPS = 1e-9


def overlap(tt: TaskRecord, st: TaskRecord) -> tuple[float, float] | None:
    """Lifetime intersection of two tasks on the same host, None if empty.

    Zero-length contact (one ends exactly when the other starts) is not
    concurrency and returns None, as do cross-host pairs.
    """
    if tt.host_id != st.host_id:
        return None
    lo = max(tt.start_time, st.start_time)
    hi = min(tt.end_time, st.end_time)
    if hi - lo <= BOUNDARY_EPS:
        return None
    return (lo, hi)


@dataclass
class IntervalSlice:
    """One segment of a task's execution with apportioned metric deltas."""

    task_id: str
    host_id: str
    t_begin: float
    t_end: float
    wt: dict[ResourceRequest, float] = field(default_factory=dict)
    ct: dict[ResourceRequest, float] = field(default_factory=dict)
    ra: dict[ResourceRequest, float] = field(default_factory=dict)
    concurrent_task_ids: tuple[str, ...] = ()

    @property
    def dtau(self) -> float:
        return self.t_end - self.t_begin


def ratp(sl: IntervalSlice, request: ResourceRequest) -> float | None:
    """Seconds spent (waiting + consuming) per unit acquired; None if the
    slice exerted no demand (zero resource acquired)."""
    ra = sl.ra.get(request, 0.0)
    if ra <= 0.0:
        return None
    return (sl.wt.get(request, 0.0) + sl.ct.get(request, 0.0)) / ra


def ratp_blocked(sl: IntervalSlice, request: ResourceRequest) -> float | None:
    """Waiting seconds per unit acquired; None when no demand."""
    ra = sl.ra.get(request, 0.0)
    if ra <= 0.0:
        return None
    return sl.wt.get(request, 0.0) / ra


def ratp_max(sl: IntervalSlice, request: ResourceRequest) -> float | None:
    """Upper-bound penalty of a source: slice length per unit acquired."""
    ra = sl.ra.get(request, 0.0)
    if ra <= 0.0:
        return None
    return sl.dtau / ra


@dataclass
class TaskSlices:
    """Array-backed slices of one task on the host grid.

    ``i0``/``i1`` index the host grid; the task's slice bounds are
    ``grid[i0:i1 + 1]`` and its per-slice metrics are (m, R) matrices.
    """

    task_id: str
    i0: int
    i1: int
    wt: np.ndarray
    ct: np.ndarray
    ra: np.ndarray
    dtau: np.ndarray


class HostSlicing:
    """All tasks of one host segmented on a shared boundary grid."""

    def __init__(self, trace: WorkloadTrace, host_id: str):
        self.trace = trace
        self.host_id = host_id
        self.tasks: dict[str, TaskRecord] = {
            t.task_id: t for t in trace.tasks_on_host(host_id)
        }
        self.grid = self._build_grid()
        self.by_task: dict[str, TaskSlices] = {}
        for tid in sorted(self.tasks):
            self.by_task[tid] = self._apportion_task(self.tasks[tid])
        self._task_ra_cells: np.ndarray | None = None
        self._unaccounted_cells: np.ndarray | None = None
        self._gc_cells: np.ndarray | None = None

    # -- grid -----------------------------------------------------------

    def _build_grid(self) -> np.ndarray:
        vals: list[float] = []
        for t in self.tasks.values():
            vals.append(t.start_time)
            vals.append(t.end_time)
        if not vals:
            return np.zeros(0)
        lo, hi = min(vals), max(vals)
        hb = self.trace.heartbeat_interval
        if hb > 0:
            k0 = int(np.ceil(lo / hb))
            k1 = int(np.floor(hi / hb))
            vals.extend(
                k * hb for k in range(k0, k1 + 1) if lo < k * hb < hi
            )
        vals.sort()
        merged = [vals[0]]
        for v in vals[1:]:
            if v - merged[-1] > BOUNDARY_EPS:
                merged.append(v)
        return np.asarray(merged)

    def grid_index(self, t: float) -> int:
        """Index of the grid boundary equal to ``t`` (within merge epsilon)."""
        i = int(np.searchsorted(self.grid, t))
        for j in (i - 1, i):
            if 0 <= j < len(self.grid) and abs(self.grid[j] - t) <= BOUNDARY_EPS:
                return j
        raise KeyError(f"{t} is not a slice boundary on host {self.host_id}")

    # -- per-task apportioning -------------------------------------------

    def _apportion_task(self, task: TaskRecord) -> TaskSlices:
        i0 = self.grid_index(task.start_time)
        i1 = self.grid_index(task.end_time)
        bounds = self.grid[i0 : i1 + 1]
        m = i1 - i0
        if task.samples:
            win = np.empty(len(task.samples) + 1)
            win[0] = task.start_time
            win[1:] = [s.t for s in task.samples]
            wt = np.zeros((len(task.samples), N_REQUESTS))
            ct = np.zeros_like(wt)
            ra = np.zeros_like(wt)
            for k, sample in enumerate(task.samples):
                for req, d in sample.metrics.items():
                    j = REQUEST_INDEX[req]
                    wt[k, j] = d.wt
                    ct[k, j] = d.ct
                    ra[k, j] = d.ra
            wt_s = kernels.apportion(win, wt, bounds)
            ct_s = kernels.apportion(win, ct, bounds)
            ra_s = kernels.apportion(win, ra, bounds)
        else:
            wt_s = np.zeros((m, N_REQUESTS))
            ct_s = np.zeros((m, N_REQUESTS))
            ra_s = np.zeros((m, N_REQUESTS))
        return TaskSlices(
            task_id=task.task_id,
            i0=i0,
            i1=i1,
            wt=wt_s,
            ct=ct_s,
            ra=ra_s,
            dtau=np.diff(bounds),
        )

    # -- host-level per-cell series ---------------------------------------

    def task_ra_cells(self) -> np.ndarray:
        """Total task-acquired units per grid cell and request, (g, R)."""
        if self._task_ra_cells is None:
            g = max(len(self.grid) - 1, 0)
            acc = np.zeros((g, N_REQUESTS))
            for ts in self.by_task.values():
                acc[ts.i0 : ts.i1] += ts.ra
            self._task_ra_cells = acc
        return self._task_ra_cells

    def unaccounted_cells(self) -> np.ndarray:
        """System-used units not attributable to any task, per cell, (g, R).

        Requests with no syscounter series report 0 everywhere. Negative
        residuals (measurement skew) clamp to 0.
        """
        if self._unaccounted_cells is None:
            g = max(len(self.grid) - 1, 0)
            out = np.zeros((g, N_REQUESTS))
            host = self.trace.hosts[self.host_id]
            if host.syscounters and g:
                task_ra = self.task_ra_cells()
                for req, series in host.syscounters.items():
                    if not series:
                        continue
                    ts = np.asarray([p[0] for p in series])
                    vs = np.asarray([p[1] for p in series])
                    used_at = np.interp(self.grid, ts, vs)
                    j = REQUEST_INDEX[req]
                    out[:, j] = np.clip(np.diff(used_at) - task_ra[:, j], 0.0, None)
            self._unaccounted_cells = out
        return self._unaccounted_cells

    def gc_cells(self) -> np.ndarray:
        """Seconds of GC activity per grid cell, (g,)."""
        if self._gc_cells is None:
            g = max(len(self.grid) - 1, 0)
            out = np.zeros(g)
            host = self.trace.hosts[self.host_id]
            for a, b in host.gc_windows:
                lo = np.maximum(self.grid[:-1], a)
                hi = np.minimum(self.grid[1:], b)
                out += np.clip(hi - lo, 0.0, None)
            self._gc_cells = out
        return self._gc_cells

    def known_cause_cells(self, name: str) -> np.ndarray:
        """Configured usage units of a known cause per grid cell, (g,)."""
        g = max(len(self.grid) - 1, 0)
        out = np.zeros(g)
        kc = self.trace.known_causes.get(name)
        if kc is None or kc.host_id != self.host_id:
            return out
        for a, b, units in kc.windows:
            if b <= a:
                continue
            lo = np.maximum(self.grid[:-1], a)
            hi = np.minimum(self.grid[1:], b)
            out += np.clip(hi - lo, 0.0, None) / (b - a) * units
        return out

    # -- materialization ---------------------------------------------------

    def slices_for(self, task_id: str) -> list[IntervalSlice]:
        ts = self.by_task[task_id]
        others = [t for t in self.tasks.values() if t.task_id != task_id]
        out: list[IntervalSlice] = []
        for i in range(ts.i1 - ts.i0):
            a = float(self.grid[ts.i0 + i])
            b = float(self.grid[ts.i0 + i + 1])
            conc = tuple(
                sorted(
                    o.task_id
                    for o in others
                    if o.start_time <= a + BOUNDARY_EPS
                    and o.end_time >= b - BOUNDARY_EPS
                )
            )
            out.append(
                IntervalSlice(
                    task_id=task_id,
                    host_id=self.host_id,
                    t_begin=a,
                    t_end=b,
                    wt={r: float(ts.wt[i, j]) for j, r in enumerate(REQUESTS)},
                    ct={r: float(ts.ct[i, j]) for j, r in enumerate(REQUESTS)},
                    ra={r: float(ts.ra[i, j]) for j, r in enumerate(REQUESTS)},
                    concurrent_task_ids=conc,
                )
            )
        return out


def build_host_slicing(trace: WorkloadTrace, host_id: str) -> HostSlicing:
    return HostSlicing(trace, host_id)


def build_slices(
    trace: WorkloadTrace, host_id: str
) -> dict[str, list[IntervalSlice]]:
    """Per-task ordered slice lists for every task on the host."""
    hs = HostSlicing(trace, host_id)
    return {tid: hs.slices_for(tid) for tid in sorted(hs.by_task)}


def apportion_window(
    win_bounds: np.ndarray, deltas: np.ndarray, slice_bounds: np.ndarray
) -> np.ndarray:
    """Proportional split of sample-window deltas across slice bounds."""
    return kernels.apportion(
        np.asarray(win_bounds, dtype=float),
        np.asarray(deltas, dtype=float),
        np.asarray(slice_bounds, dtype=float),
    )
