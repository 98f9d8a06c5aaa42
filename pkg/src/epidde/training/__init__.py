from .fitting import (
    METHODS,
    FitResult,
    TrainingConfig,
    fit,
    fit_constant_gradient,
    holdout_report,
    nelder_mead_fit,
    simulate,
    train_dde,
)
from .gradients import FitProblem, ParameterGradients, fit_gradients, forward_loss
from .loss import LossValue, trajectory_loss
from .optim import AdamState, SimplexResult, adam_step, lr_schedule, nelder_mead

__all__ = [
    "METHODS",
    "AdamState",
    "FitProblem",
    "FitResult",
    "LossValue",
    "ParameterGradients",
    "SimplexResult",
    "TrainingConfig",
    "adam_step",
    "fit",
    "fit_constant_gradient",
    "fit_gradients",
    "forward_loss",
    "holdout_report",
    "lr_schedule",
    "nelder_mead",
    "nelder_mead_fit",
    "simulate",
    "train_dde",
    "trajectory_loss",
]
