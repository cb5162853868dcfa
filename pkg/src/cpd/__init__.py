"""Fused-lasso change-point detection with verified error bounds.

Exact scalar and group fused-lasso solvers, per-index high-probability
error-bound calculators, screening detectors, and a Monte Carlo harness
that validates the coverage guarantees empirically.
"""

from .bounds import (
    BoundProfile,
    DetectionParams,
    GroupDetectionParams,
    build_bound_profile,
    detection_parameters,
    detection_parameters_group,
    elementwise_error_bound,
    elementwise_error_bound_group,
    group_lambda_window,
    mean_squared_error_bound,
    noise_envelope_group,
    noise_envelope_scalar,
    sum_squared_error_bound_group,
)
from .detect import (
    DetectionResult,
    cluster_detections,
    detect_pipeline,
    hausdorff_distance,
    naive_jump_set,
    screen_group,
    screen_scalar,
)
from .errors import CpdError, EmptySetError, SolverError, ValidationError
from .harness import (
    ExperimentConfig,
    Summary,
    TrialRecord,
    parse_config,
    read_records,
    run_experiment,
    write_records,
)
from .signal import (
    NoiseSpec,
    Observation,
    PiecewiseSignal,
    SignalStats,
    make_signal,
    max_partial_sum_stat,
    sample_observation,
    signal_from_series,
    signal_stats,
)
from .solver1d import (
    AnchoredProblem,
    FusedSolution,
    fused_objective,
    kkt_residual,
    oracle_fused_lasso,
    solve_anchored,
    solve_fused_lasso,
)
from .solvernd import (
    GroupSolution,
    group_kkt_residual,
    group_objective,
    solve_group_fused_lasso,
)

__version__ = "0.1.0"

__all__ = [
    "AnchoredProblem",
    "BoundProfile",
    "CpdError",
    "DetectionParams",
    "DetectionResult",
    "EmptySetError",
    "ExperimentConfig",
    "FusedSolution",
    "GroupDetectionParams",
    "GroupSolution",
    "NoiseSpec",
    "Observation",
    "PiecewiseSignal",
    "SignalStats",
    "SolverError",
    "Summary",
    "TrialRecord",
    "ValidationError",
    "build_bound_profile",
    "cluster_detections",
    "detect_pipeline",
    "detection_parameters",
    "detection_parameters_group",
    "elementwise_error_bound",
    "elementwise_error_bound_group",
    "fused_objective",
    "group_kkt_residual",
    "group_lambda_window",
    "group_objective",
    "hausdorff_distance",
    "kkt_residual",
    "make_signal",
    "max_partial_sum_stat",
    "mean_squared_error_bound",
    "naive_jump_set",
    "noise_envelope_group",
    "noise_envelope_scalar",
    "oracle_fused_lasso",
    "parse_config",
    "read_records",
    "run_experiment",
    "sample_observation",
    "screen_group",
    "screen_scalar",
    "signal_from_series",
    "signal_stats",
    "solve_anchored",
    "solve_fused_lasso",
    "solve_group_fused_lasso",
    "sum_squared_error_bound_group",
    "write_records",
]
