from .entropy import TrialEntropy, h_malicious, measure_trial, shannon
from .linkability import (
    LinkabilityGraph,
    LookupTranscript,
    LookupView,
    QueryRecord,
    build_linkability,
    observe_transcripts,
    query_links,
    view_lookup,
    walk_linkable,
)
from .oracle import exact_initiator_posterior, exact_target_posterior, link_probability
from .presim import PresimTables, presim_fingerprint, presimulate
from .range_estimation import EstimationRange, FilterResult, filter_subsets, range_estimate
from .static_ring import LookupTrace, StaticRing
from .timing import TimingResult, timing_attack
from .trials import EntropyResult, build_ring, dummy_sweep, run_trials
from .world import World, WorldSampler

__all__ = [
    "EntropyResult",
    "EstimationRange",
    "FilterResult",
    "LinkabilityGraph",
    "LookupTrace",
    "LookupTranscript",
    "LookupView",
    "PresimTables",
    "QueryRecord",
    "StaticRing",
    "TimingResult",
    "TrialEntropy",
    "World",
    "WorldSampler",
    "build_linkability",
    "build_ring",
    "dummy_sweep",
    "exact_initiator_posterior",
    "exact_target_posterior",
    "filter_subsets",
    "h_malicious",
    "link_probability",
    "measure_trial",
    "observe_transcripts",
    "presim_fingerprint",
    "presimulate",
    "query_links",
    "range_estimate",
    "run_trials",
    "shannon",
    "timing_attack",
    "view_lookup",
    "walk_linkable",
]
