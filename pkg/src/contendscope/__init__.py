"""Contention blame attribution for multi-tenant dataflow workloads."""

from .model import (
    ResourceClass,
    ResourceRequest,
    WorkloadTrace,
    ingest_trace,
    validate,
    write_trace,
)
from .intervals import IntervalSlice, build_slices, overlap, ratp, ratp_blocked, ratp_max
from .blame import (
    BlameTerm,
    GcSource,
    KnownCauseSource,
    TaskSource,
    UnknownSource,
    WorkloadSlicing,
    blame_full_form,
    blame_pair,
    decompose_slowdown,
    slowdown,
    stage_blame,
    unaccounted_resource,
)
from .graph import (
    BuildConfig,
    ProtoGraph,
    analyze,
    build_graph,
    compute_dor,
    compute_impact_factors,
    export_graph,
    load_graph,
)
from .analysis import (
    Explanation,
    RankedList,
    aggressive_sources,
    baseline_blocked_time,
    baseline_deep_overlap,
    baseline_naive_overlap,
    hot_resources,
    slow_nodes,
    topk_explanations,
    windowed_analysis,
)
from .sim import (
    GroundTruth,
    InjectionSpec,
    SimConfig,
    scenario_library,
    score_attribution,
    simulate,
    simulate_to_files,
)

__version__ = "0.1.0"
