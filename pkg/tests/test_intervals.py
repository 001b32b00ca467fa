import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contendscope.intervals import (
    IntervalSlice,
    apportion_window,
    build_slices,
    overlap,
    ratp,
    ratp_blocked,
    ratp_max,
)
from contendscope.model import ResourceRequest, TaskRecord

from helpers import make_trace, single_window_task, uniform_task

RR = ResourceRequest


def _bounds(slices):
    return [(s.t_begin, s.t_end) for s in slices]


def test_build_slices_concurrent_boundaries():
    # task A [0,10], B [4,6] on one host, heartbeat too large to matter
    trace = make_trace(
        [
            single_window_task("A", "S1", "Q1", "H1", 0.0, 10.0, ra=10.0),
            single_window_task("B", "S2", "Q2", "H1", 4.0, 6.0, ra=2.0),
        ],
        heartbeat=100.0,
    )
    slices = build_slices(trace, "H1")
    assert _bounds(slices["A"]) == [(0.0, 4.0), (4.0, 6.0), (6.0, 10.0)]
    assert _bounds(slices["B"]) == [(4.0, 6.0)]
    assert slices["A"][1].concurrent_task_ids == ("B",)
    assert slices["A"][0].concurrent_task_ids == ()


def test_build_slices_heartbeat_tiling():
    trace = make_trace([single_window_task(start=0.0, end=10.0)], heartbeat=4.0)
    slices = build_slices(trace, "H1")["T1"]
    assert _bounds(slices) == [(0.0, 4.0), (4.0, 8.0), (8.0, 10.0)]


def test_build_slices_coincident_deduplicated():
    trace = make_trace(
        [
            single_window_task("A", "S1", "Q1", "H1", 0.0, 10.0),
            single_window_task("B", "S2", "Q2", "H1", 0.0, 10.0),
        ],
        heartbeat=100.0,
    )
    slices = build_slices(trace, "H1")
    assert _bounds(slices["A"]) == [(0.0, 10.0)]
    assert _bounds(slices["B"]) == [(0.0, 10.0)]


def test_apportion_proportional_split():
    # window [0,10] with RA=10 split by boundary at 4 -> 4 and 6
    got = apportion_window([0.0, 10.0], [[10.0]], [0.0, 4.0, 10.0])
    assert got[:, 0] == pytest.approx([4.0, 6.0])


def test_apportion_identity():
    got = apportion_window([2.0, 5.0], [[7.0]], [0.0, 10.0])
    assert got[:, 0] == pytest.approx([7.0])


def test_apportion_hand_case():
    # window [0,10], WT=5, boundaries at 2 and 7 -> 1.0, 2.5, 1.5
    got = apportion_window([0.0, 10.0], [[5.0]], [0.0, 2.0, 7.0, 10.0])
    assert got[:, 0] == pytest.approx([1.0, 2.5, 1.5])


def _slice(wt=0.0, ct=0.0, ra=0.0, dtau=10.0):
    return IntervalSlice(
        task_id="T",
        host_id="H",
        t_begin=0.0,
        t_end=dtau,
        wt={RR.IoRead: wt},
        ct={RR.IoRead: ct},
        ra={RR.IoRead: ra},
    )


def test_ratp_values():
    assert ratp(_slice(wt=0, ct=0, ra=5), RR.IoRead) == 0.0
    assert ratp(_slice(wt=4, ct=2, ra=3), RR.IoRead) == pytest.approx(2.0)
    assert ratp(_slice(wt=4, ct=0, ra=0), RR.IoRead) is None


def test_ratp_blocked_values():
    assert ratp_blocked(_slice(wt=4, ct=2, ra=4), RR.IoRead) == pytest.approx(1.0)
    assert ratp_blocked(_slice(wt=0, ct=9, ra=2), RR.IoRead) == 0.0
    assert ratp_blocked(_slice(wt=4, ct=0, ra=0), RR.IoRead) is None


def test_ratp_max_values():
    assert ratp_max(_slice(ra=2, dtau=10.0), RR.IoRead) == pytest.approx(5.0)
    assert ratp_max(_slice(ra=0, dtau=10.0), RR.IoRead) is None
    assert ratp_max(_slice(ra=10, dtau=10.0), RR.IoRead) == pytest.approx(1.0)


def _task(tid, host, start, end):
    return TaskRecord(
        task_id=tid, stage_id="S", query_id="Q", host_id=host,
        start_time=start, end_time=end,
    )


def test_overlap_cases():
    assert overlap(_task("a", "H1", 0, 10), _task("b", "H1", 4, 6)) == (4, 6)
    assert overlap(_task("a", "H1", 0, 5), _task("b", "H1", 5, 9)) is None
    assert overlap(_task("a", "H1", 0, 10), _task("b", "H1", 0, 10)) == (0, 10)
    assert overlap(_task("a", "H1", 0, 10), _task("b", "H2", 0, 10)) is None


def test_conservation_over_slices():
    # totals per request survive slicing within 1e-9 relative
    trace = make_trace(
        [
            uniform_task("A", "S1", "Q1", "H1", 0.0, 10.0,
                         {RR.IoRead: (2.0, 5.0, 123456.0),
                          RR.CpuOsSched: (1.0, 7.0, 9.0)}, n_samples=4),
            single_window_task("B", "S2", "Q2", "H1", 3.0, 8.5, ra=77.0),
        ],
        heartbeat=2.0,
    )
    slices = build_slices(trace, "H1")
    for tid in ("A", "B"):
        task = trace.tasks[tid]
        for req in (RR.IoRead, RR.CpuOsSched):
            tot = task.total(req)
            got_wt = sum(s.wt[req] for s in slices[tid])
            got_ct = sum(s.ct[req] for s in slices[tid])
            got_ra = sum(s.ra[req] for s in slices[tid])
            assert got_wt == pytest.approx(tot.wt, rel=1e-9, abs=1e-12)
            assert got_ct == pytest.approx(tot.ct, rel=1e-9, abs=1e-12)
            assert got_ra == pytest.approx(tot.ra, rel=1e-9, abs=1e-12)


def test_tiling_strictly_increasing():
    trace = make_trace(
        [
            single_window_task("A", "S1", "Q1", "H1", 0.0, 10.0),
            single_window_task("B", "S2", "Q2", "H1", 2.0, 7.0),
            single_window_task("C", "S3", "Q3", "H1", 2.0, 9.0),
        ],
        heartbeat=3.0,
    )
    for slices in build_slices(trace, "H1").values():
        task = trace.tasks[slices[0].task_id]
        assert slices[0].t_begin == task.start_time
        assert slices[-1].t_end == task.end_time
        for a, b in zip(slices, slices[1:]):
            assert a.t_end == b.t_begin
            assert a.t_begin < a.t_end


def test_refinement_stability_constant_rate():
    # extra heartbeat boundaries leave the penalty integral unchanged
    # when samples are piecewise-constant-rate
    def integral(heartbeat):
        trace = make_trace(
            [single_window_task("A", "S1", "Q1", "H1", 0.0, 12.0,
                                wt=3.0, ct=6.0, ra=24.0)],
            heartbeat=heartbeat,
        )
        slices = build_slices(trace, "H1")["A"]
        return sum(
            (r * s.dtau) for s in slices
            if (r := ratp(s, RR.IoRead)) is not None
        )

    coarse = integral(100.0)
    fine = integral(1.0)
    finer = integral(0.25)
    assert fine == pytest.approx(coarse, rel=1e-12)
    assert finer == pytest.approx(coarse, rel=1e-12)


def test_ratp_dominates_blocked_pointwise():
    trace = make_trace(
        [uniform_task("A", "S1", "Q1", "H1", 0.0, 10.0,
                      {RR.IoRead: (2.0, 3.0, 10.0)}, n_samples=5)],
        heartbeat=1.5,
    )
    for s in build_slices(trace, "H1")["A"]:
        full = ratp(s, RR.IoRead)
        blocked = ratp_blocked(s, RR.IoRead)
        assert (full is None) == (blocked is None)
        if full is not None:
            assert full >= blocked


@settings(max_examples=60, deadline=None)
@given(
    cuts=st.lists(st.floats(0.01, 9.99), min_size=0, max_size=6),
    n_windows=st.integers(1, 5),
    seed=st.integers(0, 2**31 - 1),
)
def test_apportion_conserves_totals(cuts, n_windows, seed):
    rng = np.random.default_rng(seed)
    win = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 9.95, n_windows - 1)), [10.0]])
    win = np.unique(win)
    deltas = rng.uniform(0.0, 5.0, (len(win) - 1, 3))
    bounds = np.unique(np.concatenate([[0.0], sorted(cuts), [10.0]]))
    out = apportion_window(win, deltas, bounds)
    assert np.allclose(out.sum(axis=0), deltas.sum(axis=0), rtol=1e-9, atol=1e-12)
    assert (out >= -1e-12).all()
