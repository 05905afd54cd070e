"""Hyper-reduction of parameterized nonlinear terms: POD, DEIM and neural
empirical interpolation (NEIM)."""

__version__ = "0.1.0"

from .deim import DeimModel, deim_eval, deim_select
from .mlp import Mlp, MlpConfig, WeightedDataset, mlp_forward, mlp_init, mlp_loss_and_grad, mlp_train
from .neim import (
    NeimModel,
    StoppingCriteria,
    TrainingGrid,
    WeightScheme,
    build_training_grid,
    error_decomposition_report,
    finalize_theta,
    neim_eval,
    neim_train,
    orthogonalize_targets,
    select_parameter,
    solve_theta,
)
from .pod import PodBasis, SnapshotSet, compute_pod, lift, project

__all__ = [
    "DeimModel",
    "Mlp",
    "MlpConfig",
    "NeimModel",
    "PodBasis",
    "SnapshotSet",
    "StoppingCriteria",
    "TrainingGrid",
    "WeightScheme",
    "WeightedDataset",
    "build_training_grid",
    "compute_pod",
    "deim_eval",
    "deim_select",
    "error_decomposition_report",
    "finalize_theta",
    "lift",
    "mlp_forward",
    "mlp_init",
    "mlp_loss_and_grad",
    "mlp_train",
    "neim_eval",
    "neim_train",
    "orthogonalize_targets",
    "project",
    "select_parameter",
    "solve_theta",
]
