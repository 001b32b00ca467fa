import collections
import itertools

import pytest

from contendscope import analysis
from contendscope.analysis import (
    baseline_blocked_time,
    baseline_deep_overlap,
    baseline_naive_overlap,
    clip_trace,
    enumerate_explanations,
    hot_resources,
    resample_trace,
    slow_nodes,
    topk_explanations,
    windowed_analysis,
    aggressive_sources,
)
from contendscope.graph import BuildConfig, analyze, graph_to_dict
from contendscope.model import ResourceRequest, validate
from contendscope.sim import scenario_library, simulate

from helpers import make_trace, single_window_task

RR = ResourceRequest


@pytest.fixture(scope="module")
def hog():
    cfg = scenario_library(seed=11)["cpu-internal-hog"]
    trace, truth = simulate(cfg)
    g = analyze(trace, ["Qt"])
    return trace, truth, g


def test_topk_k_larger_than_path_count(hog):
    _, _, g = hog
    all_paths = enumerate_explanations(g, "Qt")
    got = topk_explanations(g, "Qt", k=10_000)
    assert len(got) == len(all_paths)
    weights = [p.weight for p in got]
    assert weights == sorted(weights, reverse=True)


def test_topk_dominant_hog_ranks_first(hog):
    _, truth, g = hog
    top = topk_explanations(g, "Qt", k=1)[0]
    assert top.sq == "Qhog"
    assert top.res == "Cpu"


def test_topk_fix_restricts_paths(hog):
    _, _, g = hog
    got = topk_explanations(g, "Qt", k=1000, fix={"res": "Io"})
    assert got == [] or all(p.res == "Io" for p in got)
    got2 = topk_explanations(g, "Qt", k=1000, fix={"host": "H1"})
    assert all(p.host == "H1" for p in got2)
    with pytest.raises(ValueError):
        topk_explanations(g, "Qt", k=0)
    with pytest.raises(ValueError):
        topk_explanations(g, "Qt", k=5, fix={"nope": "x"})
    with pytest.raises(ValueError):
        topk_explanations(g, "ZZZ", k=5)


def test_path_weights_recompute_from_export(hog):
    _, _, g = hog
    doc = graph_to_dict(g)
    edge_if = {(e["from"], e["to"]): e["if"] for e in doc["edges"]}
    by_id = {n["id"]: n for n in doc["nodes"]}
    for p in enumerate_explanations(g, "Qt"):
        pl = by_id[p.path_id]["payload"]
        l5 = f"L5|{pl['source']}"
        l6 = f"L6|{by_id[l5]['payload']['source_query']}"
        l3 = f"L3|{pl['query']}|{pl['stage']}|{pl['request']}|{pl['host']}"
        l2 = f"L2|{pl['query']}|{pl['stage']}|{p.res}"
        l1 = f"L1|{pl['query']}|{pl['stage']}"
        l0 = f"L0|{pl['query']}"
        w = (
            edge_if[(l6, l5)]
            * edge_if[(l5, p.path_id)]
            * edge_if[(p.path_id, l3)]
            * edge_if[(l3, l2)]
            * edge_if[(l2, l1)]
            * edge_if[(l1, l0)]
        )
        assert p.weight == pytest.approx(w, rel=1e-12)


def test_path_sum_matches_source_responsibility(hog):
    _, _, g = hog
    by_sq = collections.defaultdict(float)
    for p in enumerate_explanations(g, "Qt"):
        by_sq[p.sq] += p.weight
    for node in g.level_nodes(6):
        sq = node.payload["source"]
        assert by_sq[sq] == pytest.approx(node.dor["Qt"], abs=1e-9)


def test_aggressive_sources(hog):
    _, truth, g = hog
    ranked = aggressive_sources(g, k=3)
    assert ranked.entries[0][0] == "Qhog"
    # single target: ordering equals the per-target L6 ordering
    per_target = sorted(
        ((n.payload["source"], n.dor["Qt"]) for n in g.level_nodes(6)),
        key=lambda kv: (-kv[1], kv[0]),
    )
    assert [e for e, _ in ranked.entries] == [e for e, _ in per_target[:3]]


def test_aggressive_multi_target_additivity():
    # a source overlapping three targets outranks an equal-per-target
    # source that overlaps only one
    tasks = []
    for i, qid in enumerate(("Q1", "Q2", "Q3")):
        tasks.append(
            (f"A{i}", f"TS{i}", qid, "H1", i * 10.0, i * 10.0 + 10.0,
             [((i * 10.0) + 10.0, {RR.IoRead: (4.0, 2.0, 10.0)})])
        )
    tasks.append(
        ("W", "WS", "QW", "H1", 0.0, 30.0,
         [(30.0, {RR.IoRead: (0.0, 15.0, 60.0)})])
    )
    tasks.append(
        ("N", "NS", "QN", "H1", 0.0, 10.0,
         [(10.0, {RR.IoRead: (0.0, 5.0, 20.0)})])
    )
    trace = make_trace(tasks, heartbeat=100.0)
    g = analyze(trace, ["Q1", "Q2", "Q3"])
    ranked = aggressive_sources(g, k=2)
    assert ranked.entries[0][0] == "QW"


def test_slow_nodes_two_hosts():
    # one host carries all the blocked time and must rank strictly higher
    trace = make_trace(
        [
            ("A1", "TS", "QT", "H1", 0.0, 10.0,
             [(10.0, {RR.IoRead: (5.0, 1.0, 10.0)})]),
            ("A2", "TS", "QT", "H2", 0.0, 10.0,
             [(10.0, {RR.IoRead: (0.0, 6.0, 10.0)})]),
            ("B1", "SS", "QS", "H1", 0.0, 10.0,
             [(10.0, {RR.IoRead: (0.0, 5.0, 30.0)})]),
        ],
        heartbeat=100.0,
    )
    g = analyze(trace, ["QT"])
    ranked = slow_nodes(g)
    scores = dict(ranked.entries)
    assert ranked.entries[0][0] == "H1"
    assert scores["H1"] > scores["H2"]

    # single-host build: that host alone
    g1 = analyze(trace, ["QT"], BuildConfig(hosts={"H1"}))
    only = slow_nodes(g1)
    assert [e for e, _ in only.entries] == ["H1"]


def test_hot_resources_io_fixture(hog):
    cfg = scenario_library(seed=11)["io-external-load"]
    trace, _ = simulate(cfg)
    g = analyze(trace, ["Qt"])
    ranked = hot_resources(g)
    assert ranked.entries[0][0] == "IoRead"
    # filtered class absent
    g2 = analyze(trace, ["Qt"], BuildConfig(resources={"Io"}))
    ranked2 = hot_resources(g2)
    assert {e for e, _ in ranked2.entries} <= {"IoRead", "IoWrite"}


def test_naive_overlap_cases():
    trace = make_trace(
        [
            single_window_task("A", "TS", "QT", "H1", 5.0, 15.0, ra=1.0),
            single_window_task("B", "S1", "Q1", "H1", 0.0, 4.0, ra=1.0),
            single_window_task("C", "S2", "Q2", "H1", 7.0, 11.0, ra=1.0),
            single_window_task("D", "S3", "Q3", "H2", 3.0, 40.0, ra=1.0),
        ],
        heartbeat=100.0,
    )
    ranked = baseline_naive_overlap(trace, "QT")
    scores = dict(ranked.entries)
    assert scores["Q1"] == 0.0  # disjoint
    assert scores["Q2"] == pytest.approx(4.0)  # fully nested -> inner duration
    assert scores["Q3"] == pytest.approx(10.0)  # covers target fully
    assert ranked.entries[0][0] == "Q3"


def test_deep_overlap_cases():
    # no same-host pairs -> zero
    trace = make_trace(
        [
            single_window_task("A", "TS", "QT", "H1", 0.0, 10.0, ra=1.0),
            single_window_task("B", "S1", "Q1", "H2", 0.0, 10.0, ra=1.0),
        ],
        heartbeat=100.0,
    )
    assert dict(baseline_deep_overlap(trace, "QT").entries)["Q1"] == 0.0

    # degenerate: one task per query on one host -> equals naive
    trace2 = make_trace(
        [
            single_window_task("A", "TS", "QT", "H1", 0.0, 10.0, ra=1.0),
            single_window_task("B", "S1", "Q1", "H1", 4.0, 9.0, ra=1.0),
            single_window_task("C", "S2", "Q2", "H1", 8.0, 20.0, ra=1.0),
        ],
        heartbeat=100.0,
    )
    deep = dict(baseline_deep_overlap(trace2, "QT").entries)
    naive = dict(baseline_naive_overlap(trace2, "QT").entries)
    assert deep == pytest.approx(naive)


def test_deep_overlap_matches_bruteforce(hog):
    trace, _, _ = hog
    deep = dict(baseline_deep_overlap(trace, "Qt").entries)
    # quadratic oracle over all task pairs
    expect = collections.defaultdict(float)
    tgt = [t for t in trace.tasks.values() if t.query_id == "Qt"]
    src = [t for t in trace.tasks.values() if t.query_id != "Qt"]
    for a, b in itertools.product(tgt, src):
        if a.host_id != b.host_id:
            continue
        ov = min(a.end_time, b.end_time) - max(a.start_time, b.start_time)
        if ov > 0:
            expect[b.query_id] += ov
    for qid, v in expect.items():
        assert deep[qid] == pytest.approx(v, rel=1e-12)


def test_blocked_time_baseline():
    trace = make_trace(
        [
            ("A", "TS", "QT", "H1", 0.0, 10.0,
             [(10.0, {RR.IoRead: (4.0, 1.0, 10.0)})]),
            ("B", "TS2", "QT", "H1", 10.0, 20.0,
             [(20.0, {RR.NetworkFetch: (2.5, 1.0, 10.0)})]),
        ],
        heartbeat=100.0,
    )
    out = baseline_blocked_time(trace, "QT")
    assert out["stages"]["TS"]["IoRead"] == pytest.approx(4.0)
    assert out["stages"]["TS2"]["NetworkFetch"] == pytest.approx(2.5)
    assert out["total"]["IoRead"] == pytest.approx(4.0)
    assert out["total"]["NetworkFetch"] == pytest.approx(2.5)
    # zero-wait trace -> all zeros
    trace0 = make_trace([single_window_task(ct=5.0, ra=10.0)])
    out0 = baseline_blocked_time(trace0, "Q1")
    assert all(v == 0.0 for v in out0["total"].values())


def test_windowed_analysis(hog):
    trace, truth, g = hog
    inj = truth.injections[0]
    t0 = min(t.start_time for t in trace.tasks.values() if t.query_id == "Qt")
    t1 = max(t.end_time for t in trace.tasks.values() if t.query_id == "Qt")

    # window before the target started: empty shares
    shares = windowed_analysis(trace, "Qt", [(0.0, t0 - 0.5)])
    assert shares == [{}]

    # whole-span window equals the non-windowed responsibility
    whole = windowed_analysis(trace, "Qt", [(t0, t1)])[0]
    for node in g.level_nodes(6):
        assert whole[node.payload["source"]] == pytest.approx(
            node.dor["Qt"], abs=1e-9
        )

    # hog contributes only in the window where it is active
    wins = [(t0, inj["start"] + 1e-9), (inj["start"], inj["end"]), (inj["end"], t1)]
    w_shares = windowed_analysis(trace, "Qt", wins)
    assert w_shares[1].get("Qhog", 0.0) > 0.5
    assert w_shares[2].get("Qhog", 0.0) < 0.05

    with pytest.raises(ValueError):
        windowed_analysis(trace, "Qt", [(5.0, 5.0)])
    with pytest.raises(ValueError):
        windowed_analysis(trace, "ZZZ", [(0.0, 1.0)])


def test_clip_trace_preserves_invariants(hog):
    trace, _, _ = hog
    clipped = clip_trace(trace, 5.0, 9.0)
    assert validate(clipped) == []
    for t in clipped.tasks.values():
        assert t.start_time >= 5.0 - 1e-9
        assert t.end_time <= 9.0 + 1e-9


def test_resample_conserves_totals(hog):
    trace, _, _ = hog
    re = resample_trace(trace, 3.0)
    assert validate(re) == []
    for tid, task in trace.tasks.items():
        for req in (RR.IoRead, RR.CpuOsSched):
            a, b = task.total(req), re.tasks[tid].total(req)
            assert b.wt == pytest.approx(a.wt, rel=1e-9, abs=1e-12)
            assert b.ct == pytest.approx(a.ct, rel=1e-9, abs=1e-12)
            assert b.ra == pytest.approx(a.ra, rel=1e-9, abs=1e-12)
    # sample cadence is now the grid plus task end only
    for task in re.tasks.values():
        for s in task.samples[:-1]:
            assert s.t / 3.0 == pytest.approx(round(s.t / 3.0), abs=1e-9)
