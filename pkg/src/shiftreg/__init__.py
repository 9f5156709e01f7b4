"""Graph node classification under biased training splits.

APPNP and GCN models with an optional distribution-alignment penalty
(CMD and MMD between predictions on training rows and held-out rows),
a PPR-ranked biased split sampler to induce the shift, and multi-trial
experiment protocols with early stopping.
"""

from .autodiff import Tape, Tensor, backward, no_grad
from .datasets import (
    DatasetManifest,
    SplitMasks,
    generate_sbm,
    load_cache,
    load_citation_text,
    make_uniform_splits,
    per_class_sample,
    save_cache,
)
from .discrepancy import CmdConfig, MmdConfig, cmd, median_bandwidth, mmd
from .errors import ConvergenceError, InputError, TrainingDiverged
from .experiment import (
    AggregateReport,
    TrainConfig,
    TrialReport,
    evaluate_f1_micro,
    run_trials,
    sweep,
    total_loss,
    train,
    trial_streams,
)
from .graph import Graph
from .gradcheck import check_gradients, max_relative_error, numerical_grad
from .models import AppnpParams, GcnParams, appnp_forward, gcn_forward
from .optim import AdamState, adam_step, glorot_init, load_params, save_params
from .ppr import (
    BiasConfig,
    PprConfig,
    biased_train_select,
    ppr_exact,
    ppr_matrix,
    ppr_power,
)
from .sparse import SparseMatrix, build_csr, normalize_adjacency, spmm

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AggregateReport",
    "AppnpParams",
    "BiasConfig",
    "CmdConfig",
    "ConvergenceError",
    "DatasetManifest",
    "GcnParams",
    "Graph",
    "InputError",
    "MmdConfig",
    "PprConfig",
    "SparseMatrix",
    "SplitMasks",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainingDiverged",
    "TrialReport",
    "adam_step",
    "appnp_forward",
    "backward",
    "biased_train_select",
    "build_csr",
    "check_gradients",
    "cmd",
    "evaluate_f1_micro",
    "gcn_forward",
    "generate_sbm",
    "glorot_init",
    "load_cache",
    "load_citation_text",
    "load_params",
    "make_uniform_splits",
    "max_relative_error",
    "median_bandwidth",
    "mmd",
    "no_grad",
    "normalize_adjacency",
    "numerical_grad",
    "per_class_sample",
    "ppr_exact",
    "ppr_matrix",
    "ppr_power",
    "run_trials",
    "save_cache",
    "save_params",
    "sweep",
    "spmm",
    "total_loss",
    "train",
    "trial_streams",
]
