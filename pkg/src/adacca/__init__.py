"""Streaming canonical correlation analysis on matrix manifolds.

Tracks the dominant correlated subspaces of two synchronized vector
streams with exponential forgetting, and flags abrupt changes in their
correlation structure from reconstruction residuals.
"""

from .adaptive import (
    CompressedQuantities,
    CovarianceState,
    LineSearchConfig,
    StepConfig,
    StepDiagnostics,
    SubspacePair,
    compress,
    cost_phase,
    efficient_polar_update,
    init_from_window,
    init_random,
    metric_phase,
    smw_update,
    step,
    stiefel_gradient,
    update_covariances,
    update_mean,
)
from .batch import (
    BatchSolution,
    BrockettWeights,
    IllConditionedError,
    brockett_cost,
    default_weights,
    solve_batch,
)
from .config import ConfigError, ExperimentConfig, PRESETS, resolve_config
from .datagen import StreamSpec, ViewSplit, generate, ingest_csv
from .detect import (
    DetectionConfig,
    DetectionEvent,
    calibrate_threshold,
    criterion,
    decide,
    evaluate,
)
from .manifold import (
    GStiefelPoint,
    MetricMatrix,
    NotSPDError,
    RankDeficientError,
    TangentVector,
    feasibility_error,
    gram_schmidt_g,
    oblique_qr_retract,
    polar_retract,
    spd_inv_sqrt,
    tangency_error,
)
from .metrics import TrackingReport, cost_ratio, orthonormality_error, projector_distance

__version__ = "0.1.0"
