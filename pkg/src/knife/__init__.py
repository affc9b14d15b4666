"""Kernel feature selection with sparse, learned feature weights."""

from .baselines import FeatureRanking, fit_baseline, rfe_rank, sis_rank
from .data import (
    Dataset,
    SimSpec,
    Task,
    load_csv,
    simulate,
    simulate_linear,
    simulate_orange,
    simulate_sinusoid,
    standardize,
)
from .estimators import KnifeClassifier, KnifeRegressor
from .evaluation import (
    kfold_cv,
    run_benchmark,
    run_noise_sweep,
    select_lambda2_validation,
)
from .kernels import (
    KernelFamily,
    KernelSpec,
    kernel_cross_matrix,
    kernel_gradient,
    kernel_matrix,
    kernel_value,
    linearize,
)
from .losses import LossFamily, LossSpec, loss_gradient, loss_value
from .model import (
    FitConfig,
    GridSpec,
    KnifeModel,
    PathResult,
    knife_fit,
    knife_path,
    objective,
    predict,
)
from .optim import SolverOptions, fit_coefficients, fit_weights

__version__ = "0.1.0"
