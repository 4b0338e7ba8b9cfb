"""srlab: a robust-training laboratory for learning with noisy labels.

Sparse-regularized training (temperature-sharpened outputs plus an
lp-norm penalty) on a minimal reverse-mode differentiation engine, label
corruption tooling, and a suite that numerically certifies the underlying
noise-tolerance results on finite instances.

The hot row-wise kernels run on a compiled Cython core when built, with a
numpy fallback selected automatically at import (see ``srlab.BACKEND``).
"""

from ._kernels import BACKEND
from .autodiff import (
    Graph,
    GraphError,
    backward,
    evaluate,
    finite_diff_gradient,
    forward,
    input_gradient,
    l2_normalize,
    softmax_tau,
    softmax_tau_jacobian,
)
from .data import (
    LabeledDataset,
    gaussian_blobs,
    load_csv,
    load_idx,
    long_tailed_counts,
    split,
    step_counts,
    subsample_per_class,
    write_idx,
)
from .losses import (
    LOSS_KINDS,
    LossSpec,
    SRConfig,
    grad_decompose_ce,
    lambda_at,
    lp_penalty,
    pointwise_loss,
    sr_objective,
    sr_objective_with_logit_grad,
)
from .noise import (
    TransitionMatrix,
    asymmetric_transition,
    corrupt,
    empirical_rate,
    load_flip_map,
    symmetric_transition,
)
from .theory import (
    FiniteInstance,
    PermutationFamily,
    RiskReport,
    check_symmetric_condition,
    clean_risk,
    estimate_delta,
    loss_sum_over_classes,
    noisy_risk,
    permutations_of,
    verify_risk_bound,
    verify_theorem1,
    verify_theorem2,
)
from .trainer import (
    MLPConfig,
    MLPModel,
    OptimizerConfig,
    RunRecord,
    TrainingDiverged,
    checkpoint_load,
    checkpoint_save,
    cosine_lr,
    init_mlp,
    predict_probs,
    sparse_rate,
    sparse_rate_protocol,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # autodiff
    "Graph", "GraphError", "forward", "evaluate", "backward",
    "input_gradient", "softmax_tau", "softmax_tau_jacobian", "l2_normalize",
    "finite_diff_gradient",
    # losses
    "LOSS_KINDS", "LossSpec", "SRConfig", "pointwise_loss", "lp_penalty",
    "lambda_at", "sr_objective", "sr_objective_with_logit_grad",
    "grad_decompose_ce",
    # noise
    "TransitionMatrix", "symmetric_transition", "asymmetric_transition",
    "corrupt", "empirical_rate", "load_flip_map",
    # data
    "LabeledDataset", "gaussian_blobs", "load_idx", "write_idx", "load_csv",
    "subsample_per_class", "long_tailed_counts", "step_counts", "split",
    # trainer
    "MLPConfig", "MLPModel", "OptimizerConfig", "RunRecord",
    "TrainingDiverged", "init_mlp", "cosine_lr", "predict_probs",
    "sparse_rate", "sparse_rate_protocol", "train", "checkpoint_save",
    "checkpoint_load",
    # theory
    "PermutationFamily", "FiniteInstance", "RiskReport", "permutations_of",
    "loss_sum_over_classes", "check_symmetric_condition", "clean_risk",
    "noisy_risk", "verify_theorem1", "verify_theorem2", "estimate_delta",
    "verify_risk_bound",
]
