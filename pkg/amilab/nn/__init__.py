from .checkpoint import load_checkpoint, save_checkpoint
from .distributions import (
    ActionDistribution,
    Categorical,
    DiagGaussian,
    GaussianMixture,
    head_entropy,
    head_log_prob,
)
from .mlp import backward, forward, init_params
from .optim import AdamState, adam_step, gradient_clip
from .params import ParameterSet

__all__ = [
    "ActionDistribution",
    "AdamState",
    "Categorical",
    "DiagGaussian",
    "GaussianMixture",
    "ParameterSet",
    "adam_step",
    "backward",
    "forward",
    "gradient_clip",
    "head_entropy",
    "head_log_prob",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
]
