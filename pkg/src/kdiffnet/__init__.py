"""Differential Gaussian graphical model estimation from two sample sets,
with optional edge-weight and node-group knowledge.

The estimators recover the sparse change between the precision matrices of
two conditions from a thresholded difference-of-inverses backward map:
closed forms when a single knowledge kind is present, and a parallel
proximal consensus solver when edge and group knowledge combine.
"""

__version__ = "0.1.0"

from .linalg import (
    BackwardMap,
    InvertibilityError,
    ThresholdSelectionError,
    invert_checked,
    proxy_backward_mapping,
    sample_covariance,
    select_v,
    soft_threshold_matrix,
)
from .knowledge import (
    EdgeGroupSet,
    NodeGroupSet,
    expand_node_groups,
    kev_dual_norm,
    kev_norm,
)
from .prox import (
    StackedVariable,
    affine_prox_lift,
    prox_group_l2,
    prox_weighted_l1,
    proj_group_dual_ball,
    proj_weighted_linf_ball,
)
from .solvers import (
    DifferentialNetwork,
    SolverConfig,
    solve_diffee,
    solve_kdiffnet_e,
    solve_kdiffnet_eg,
    solve_kdiffnet_g,
    solve_kdiffnet_multi,
)
from .simulate import (
    SimulatedDataset,
    SimulationError,
    SimulationSpec,
    gen_dataset,
    gen_er_distance,
    gen_weight_from_distance,
    load_dataset,
    save_dataset,
    true_support,
)
from .evaluate import (
    EdgeScore,
    RateResult,
    SweepResult,
    lambda_grid,
    prepare_backward,
    rate_experiment,
    roc_auc,
    score_edges,
    sweep,
    time_harness,
)

__all__ = [
    "BackwardMap",
    "DifferentialNetwork",
    "EdgeGroupSet",
    "EdgeScore",
    "InvertibilityError",
    "NodeGroupSet",
    "RateResult",
    "SimulatedDataset",
    "SimulationError",
    "SimulationSpec",
    "SolverConfig",
    "StackedVariable",
    "SweepResult",
    "ThresholdSelectionError",
    "affine_prox_lift",
    "expand_node_groups",
    "gen_dataset",
    "gen_er_distance",
    "gen_weight_from_distance",
    "invert_checked",
    "kev_dual_norm",
    "kev_norm",
    "lambda_grid",
    "load_dataset",
    "prepare_backward",
    "prox_group_l2",
    "prox_weighted_l1",
    "proj_group_dual_ball",
    "proj_weighted_linf_ball",
    "proxy_backward_mapping",
    "rate_experiment",
    "roc_auc",
    "sample_covariance",
    "save_dataset",
    "score_edges",
    "select_v",
    "soft_threshold_matrix",
    "solve_diffee",
    "solve_kdiffnet_e",
    "solve_kdiffnet_eg",
    "solve_kdiffnet_g",
    "solve_kdiffnet_multi",
    "sweep",
    "time_harness",
    "true_support",
]
