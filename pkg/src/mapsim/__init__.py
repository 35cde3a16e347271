"""Geometric similarity analysis for vectorized map datasets.

The package measures how close vectorized map samples are to each other —
element by element with ordering-invariant Fréchet and Chamfer distances,
and sample by sample through optimal bipartite matching — and builds on
that primitive: evaluation subsets that separate localization from
geometric memorization, prediction metrics (Chamfer mAP, Fréchet match
distributions), dataset diversity/redundancy diagnostics over a minimum
spanning tree, alignment-invariant topological similarity, and a CLI that
ties the pieces together with reproducible file formats.
"""

from .dataset_diag import (
    Cluster,
    Mst,
    SimilarityMatrix,
    SimMeta,
    SparsifyResult,
    SplitAssignment,
    cover,
    cross_similarity,
    geomdiv,
    geometric_split,
    geomsim,
    mst,
    similarity_graph,
    sparsify,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateElement,
    DegenerateRange,
    DuplicateId,
    EmptyDistribution,
    EmptyGeometry,
    EmptySet,
    EmptyTrainingSet,
    FormatError,
    InfeasibleError,
    InvalidCost,
    KindMismatch,
    MapSimError,
    NoFeasibleSplit,
    NoGroundTruth,
    UnmatchableDistributions,
    ZeroBaseline,
)
from .eval_sets import (
    EvalSubsets,
    PerSampleStats,
    SimilarityBins,
    bin_far_set,
    kl_divergence,
    match_distributions,
    nearest_train_stats,
    split_close_far,
)
from .cli_io import (
    ReportConfig,
    SynthConfig,
    build_report,
    load_dataset,
    load_predictions,
    load_similarity,
    save_dataset,
    save_predictions,
    save_similarity,
    synth_generate,
    write_report_files,
)
from .geometry import (
    POLYGON,
    POLYLINE,
    MapElement,
    RigidTransform,
    canonical_polygon,
    chamfer_distance,
    discrete_frechet,
    element_frechet,
    prepare_element,
    procrustes_rigid,
    resample_uniform,
)
from .matching import (
    AssignmentResult,
    PreparedGroup,
    PreparedSample,
    Sample,
    cost_matrix,
    geo_distance,
    min_cost_assignment,
    prepare_sample,
    sample_similarity,
    similarity_from_prepared,
)
from ._simmatrix import cross_matrix, pairwise_matrix, resolve_workers
from .metrics import (
    MatchDistribution,
    PredictionSet,
    ap_chamfer,
    frechet_match_distribution,
    geometric_overfitting,
    localization_overfitting,
    m_iqr,
    map_score,
    pearson_r,
    pool_distributions,
    set_performance,
)
from .topo_sim import (
    CandidateTransform,
    OverlapRegion,
    candidate_transforms,
    clip_to_region,
    overlap_region,
    s_topo,
    sim_topo,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentResult",
    "CandidateTransform",
    "Cluster",
    "ConfigError",
    "DataError",
    "DegenerateElement",
    "DegenerateRange",
    "DuplicateId",
    "EmptyDistribution",
    "EmptyGeometry",
    "EmptySet",
    "EmptyTrainingSet",
    "EvalSubsets",
    "FormatError",
    "InfeasibleError",
    "InvalidCost",
    "KindMismatch",
    "MapElement",
    "MapSimError",
    "MatchDistribution",
    "Mst",
    "NoFeasibleSplit",
    "NoGroundTruth",
    "OverlapRegion",
    "POLYGON",
    "POLYLINE",
    "PerSampleStats",
    "PredictionSet",
    "PreparedGroup",
    "PreparedSample",
    "ReportConfig",
    "RigidTransform",
    "Sample",
    "SimMeta",
    "SimilarityBins",
    "SimilarityMatrix",
    "SparsifyResult",
    "SplitAssignment",
    "SynthConfig",
    "UnmatchableDistributions",
    "ZeroBaseline",
    "ap_chamfer",
    "bin_far_set",
    "build_report",
    "candidate_transforms",
    "canonical_polygon",
    "chamfer_distance",
    "clip_to_region",
    "cost_matrix",
    "cover",
    "cross_matrix",
    "cross_similarity",
    "discrete_frechet",
    "element_frechet",
    "frechet_match_distribution",
    "geo_distance",
    "geomdiv",
    "geometric_overfitting",
    "geometric_split",
    "geomsim",
    "kl_divergence",
    "load_dataset",
    "load_predictions",
    "load_similarity",
    "localization_overfitting",
    "m_iqr",
    "map_score",
    "match_distributions",
    "min_cost_assignment",
    "mst",
    "nearest_train_stats",
    "overlap_region",
    "pairwise_matrix",
    "pearson_r",
    "pool_distributions",
    "prepare_element",
    "prepare_sample",
    "procrustes_rigid",
    "resample_uniform",
    "resolve_workers",
    "s_topo",
    "sample_similarity",
    "save_dataset",
    "save_predictions",
    "save_similarity",
    "set_performance",
    "sim_topo",
    "similarity_from_prepared",
    "similarity_graph",
    "sparsify",
    "split_close_far",
    "synth_generate",
    "write_report_files",
]
