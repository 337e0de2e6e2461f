"""lp-regularised one-layer GCN: inexact proximal SGD, stability bounds and twin-run experiments."""

from ._backend import active as _active_backend
from .bounds import (BoundInputs, c_p_lambda, check_strong_convexity, generalization_bound, minimizer_radius,
                     stability_beta, stability_beta_detail)
from .data import DatasetManifest, load_dataset, make_synthetic, save_dataset
from .errors import ConvergenceError, InputError, LpGcnError, NumericalError
from .graph import (FilterKind, SparseMatrix, SpectralEstimate, build_adjacency, build_filter, compute_ge,
                    ego_row, read_edge_list, spectral_radius)
from .metrics import RunMetrics, generalization_gap, param_distance, sparsity_ratio
from .model import (ActivationKind, Dataset, LossKind, Mode, ModelParams, SmoothnessConstants, grad_sample,
                    predict, propagate, smoothness_constants)
from .prox import project_ball, prox_lp
from .runner import emit_plotdata, run_experiment
from .sgd import SgdState, TrainConfig, Trajectory, sgd_step, train
from .stability import TwinRun, perturb_dataset, sweep, twin_train

BACKEND = _active_backend.BACKEND
__version__ = "0.1.0"

__all__ = [
    "ActivationKind", "BACKEND", "BoundInputs", "ConvergenceError", "Dataset", "DatasetManifest", "FilterKind",
    "InputError", "LossKind", "LpGcnError", "Mode", "ModelParams", "NumericalError", "RunMetrics", "SgdState",
    "SmoothnessConstants", "SparseMatrix", "SpectralEstimate", "TrainConfig", "Trajectory", "TwinRun",
    "build_adjacency", "build_filter", "c_p_lambda", "check_strong_convexity", "compute_ge", "ego_row",
    "emit_plotdata", "generalization_bound", "generalization_gap", "grad_sample", "load_dataset",
    "make_synthetic", "minimizer_radius", "param_distance", "perturb_dataset", "predict", "project_ball",
    "propagate", "prox_lp", "read_edge_list", "run_experiment", "save_dataset", "sgd_step", "smoothness_constants",
    "sparsity_ratio", "spectral_radius", "stability_beta", "stability_beta_detail", "sweep", "train", "twin_train",
]
