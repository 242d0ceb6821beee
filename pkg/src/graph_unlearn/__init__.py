"""Certified unlearning workbench for graph models.

The library approximates retrained parameters after removing nodes, edges,
or attribute entries from a trained graph model, computes closed-form
distance bounds on the approximation, calibrates Gaussian release noise,
and ships a retraining oracle plus evaluation harness to verify all of it.
"""

from .certify import (
    AssumptionConstants,
    CertificateReport,
    bound_approx,
    bound_optimals,
    calibrate_sigma,
    certify,
    gaussian_noise,
    measure_empirical_constants,
)
from .config import ConfigError, RunConfig, load_config
from .datasets import DatasetError, convert, dataset_stats, load_dataset, save_dataset
from .evaluate import (
    EvalReport,
    EvaluationError,
    attr_unlearn_loss,
    f1_micro,
    mi_proxy_auc,
    mi_proxy_auc_edges,
    rank_auc,
    sample_holdout,
    sample_negative_edges,
    timed,
)
from .graph import (
    AttributedGraph,
    GraphError,
    InvalidAttributeError,
    InvalidNodeError,
    attribute_owners,
    delete,
    edge_endpoints,
    k_hop_ball,
    k_hop_neighbors,
    k_hop_union,
    node_set,
)
from .influence import (
    InfluenceResult,
    SolverError,
    grad_add_minus_sub,
    solve_cg,
    solve_direct,
    solve_stochastic,
    unlearn,
)
from .models import (
    GCN2,
    SGC,
    Objective,
    TrainedModel,
    TrainingDivergedError,
    load_model,
    propagate,
    save_model,
    train,
)
from .oracle import (
    InterpolatedObjective,
    interpolated_objective,
    parameter_distances,
    retrain,
)
from .requests import (
    AffectedSets,
    RequestBatch,
    RequestError,
    UnlearnRequest,
    affected_entities,
    compute_affected_sets,
    load_request,
    save_request,
    split_for_serializability,
    unaffected_train_nodes,
    validate,
)
from .synth import SyntheticSpec, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "AssumptionConstants", "CertificateReport", "bound_approx",
    "bound_optimals", "calibrate_sigma", "certify", "gaussian_noise",
    "measure_empirical_constants", "ConfigError", "RunConfig", "load_config",
    "DatasetError", "convert", "dataset_stats", "load_dataset",
    "save_dataset", "EvalReport", "EvaluationError", "attr_unlearn_loss",
    "f1_micro", "mi_proxy_auc", "mi_proxy_auc_edges", "rank_auc",
    "sample_holdout", "sample_negative_edges", "timed", "AttributedGraph",
    "GraphError", "InvalidAttributeError", "InvalidNodeError",
    "attribute_owners", "delete", "edge_endpoints", "k_hop_ball",
    "k_hop_neighbors", "k_hop_union", "node_set", "InfluenceResult",
    "SolverError", "grad_add_minus_sub", "solve_cg", "solve_direct",
    "solve_stochastic", "unlearn", "GCN2", "SGC", "Objective",
    "TrainedModel", "TrainingDivergedError", "load_model", "propagate",
    "save_model", "train", "InterpolatedObjective", "interpolated_objective",
    "parameter_distances", "retrain", "AffectedSets", "RequestBatch",
    "RequestError", "UnlearnRequest", "affected_entities",
    "compute_affected_sets", "load_request", "save_request",
    "split_for_serializability", "unaffected_train_nodes", "validate",
    "SyntheticSpec", "gen_synthetic",
]
