"""Hand-built trace fixtures shared across the test modules."""

from __future__ import annotations

from contendscope.model import (
    HostProfile,
    KnownCause,
    MetricDelta,
    MetricSample,
    QueryRecord,
    ResourceRequest,
    StageRecord,
    TaskRecord,
    WorkloadTrace,
    _recompute_work_done,
)

RR = ResourceRequest


def make_trace(
    tasks,
    heartbeat=100.0,
    capacity=None,
    syscounters=None,
    gc_windows=None,
    known_causes=None,
    users=None,
    query_spans=None,
):
    """Build a linked trace from terse task tuples.

    ``tasks``: iterable of (task_id, stage_id, query_id, host_id, start,
    end, samples) where samples is a list of (t, {request: (wt, ct, ra)}).
    """
    trace = WorkloadTrace(heartbeat_interval=heartbeat)
    users = users or {}
    for spec in tasks:
        tid, sid, qid, hid, start, end, samples = spec
        if qid not in trace.queries:
            span = (query_spans or {}).get(qid)
            trace.queries[qid] = QueryRecord(
                query_id=qid,
                user=users.get(qid, "u"),
                submit_time=span[0] if span else start,
                finish_time=span[1] if span else end,
            )
        else:
            q = trace.queries[qid]
            if query_spans is None or qid not in query_spans:
                q.submit_time = min(q.submit_time, start)
                q.finish_time = max(q.finish_time, end)
        if sid not in trace.stages:
            trace.stages[sid] = StageRecord(stage_id=sid, query_id=qid)
        if hid not in trace.hosts:
            trace.hosts[hid] = HostProfile(host_id=hid)
        task = TaskRecord(
            task_id=tid,
            stage_id=sid,
            query_id=qid,
            host_id=hid,
            start_time=float(start),
            end_time=float(end),
            samples=[
                MetricSample(
                    t=float(t),
                    metrics={
                        req: MetricDelta(*vals) for req, vals in metrics.items()
                    },
                )
                for t, metrics in samples
            ],
        )
        trace.tasks[tid] = task
        trace.stages[sid].task_ids.append(tid)
    for hid, caps in (capacity or {}).items():
        trace.hosts.setdefault(hid, HostProfile(host_id=hid))
        trace.hosts[hid].capacity.update(caps)
    for hid, series in (syscounters or {}).items():
        trace.hosts.setdefault(hid, HostProfile(host_id=hid))
        for req, points in series.items():
            trace.hosts[hid].syscounters[req] = sorted(points)
    for hid, windows in (gc_windows or {}).items():
        trace.hosts.setdefault(hid, HostProfile(host_id=hid))
        trace.hosts[hid].gc_windows = list(windows)
    for kc in known_causes or []:
        trace.known_causes[kc.name] = kc
    _recompute_work_done(trace)
    return trace


def single_window_task(
    tid="T1",
    sid="S1",
    qid="Q1",
    host="H1",
    start=0.0,
    end=10.0,
    request=RR.IoRead,
    wt=0.0,
    ct=0.0,
    ra=0.0,
):
    """One task whose whole lifetime is a single sample window."""
    return (
        tid,
        sid,
        qid,
        host,
        start,
        end,
        [(end, {request: (wt, ct, ra)})],
    )


def uniform_task(tid, sid, qid, host, start, end, metrics, n_samples=1):
    """Task with metrics spread uniformly over n sample windows."""
    width = (end - start) / n_samples
    samples = []
    for i in range(n_samples):
        t = start + (i + 1) * width if i < n_samples - 1 else end
        samples.append(
            (t, {req: (wt / n_samples, ct / n_samples, ra / n_samples)
                 for req, (wt, ct, ra) in metrics.items()})
        )
    return (tid, sid, qid, host, start, end, samples)


def random_pair_trace(rng, force=None):
    """Random overlapping task pair with metrics honoring wt+ct <= dt.

    ``force`` in {"no-overlap", "zero-wt", "zero-src-ra"} pins one of the
    zero-blame preconditions.
    """
    import numpy as np

    t0 = rng.uniform(0, 5)
    dur_t = rng.uniform(2, 8)
    if force == "no-overlap":
        s0 = t0 + dur_t + rng.uniform(0.1, 3)
        dur_s = rng.uniform(1, 5)
    else:
        s0 = t0 + rng.uniform(-3, dur_t * 0.9)
        dur_s = rng.uniform(1, 8)

    def samples(start, end, zero_wt=False, zero_ra=False):
        out = []
        prev = start
        n = rng.integers(1, 4)
        times = np.sort(rng.uniform(start, end, n - 1)).tolist() + [end]
        for t in times:
            if t - prev <= 1e-6:
                t = prev + 1e-3
            dt = t - prev
            wt = 0.0 if zero_wt else rng.uniform(0, dt * 0.6)
            ct = rng.uniform(0, dt - wt)
            ra = 0.0 if zero_ra else rng.uniform(0.1, 50.0)
            out.append((t, {RR.IoRead: (wt, ct, ra)}))
            prev = t
        return out

    tt = ("TT", "S1", "Q1", "H1", t0, t0 + dur_t,
          samples(t0, t0 + dur_t, zero_wt=force == "zero-wt"))
    stt = ("ST", "S2", "Q2", "H1", s0, s0 + dur_s,
           samples(s0, s0 + dur_s, zero_ra=force == "zero-src-ra"))
    return make_trace([tt, stt], heartbeat=rng.uniform(0.5, 50.0))
