from neunets.finegrained.layer import BaseLayer, GrownLayer, WeightBuckets
from neunets.finegrained.medoids import Clustering, k_medoids, normalize_rows
from neunets.finegrained.phases import (
    FineGrainedConfig,
    FineGrainedResult,
    PhaseError,
    PhaseReport,
    PhaseState,
    PruneMetric,
    continuity_layer,
    export_graph,
    phase0_select,
    phase1_grow,
    phase2_prune,
    phase3_merge,
    phase4_reinit_retrain,
    synthesize_filters,
)
