from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..exceptions import ConfigurationError, NumericError
from .params import ParameterSet


@dataclass
class AdamState:
    m: ParameterSet
    v: ParameterSet
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ParameterSet, lr: float, **kwargs) -> "AdamState":
        return cls(m=params.zeros_like(), v=params.zeros_like(), lr=lr, **kwargs)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.step, self.lr, self.beta1, self.beta2, self.eps)


def adam_step(params: ParameterSet, grads: ParameterSet, state: AdamState) -> Tuple[ParameterSet, AdamState]:
    """One bias-corrected Adam update. Returns new parameters and state; inputs are not mutated."""
    if not (params.same_layout(grads) and params.same_layout(state.m)):
        raise ConfigurationError("Parameter, gradient and optimizer layouts differ")
    step = state.step + 1
    new_params = params.copy()
    new_m = state.m.copy()
    new_v = state.v.copy()
    bc1 = 1.0 - state.beta1**step
    bc2 = 1.0 - state.beta2**step
    for name, g in grads.raw_blocks().items():
        m = state.beta1 * state.m.raw_blocks()[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v.raw_blocks()[name] + (1.0 - state.beta2) * g * g
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if not np.all(np.isfinite(update)):
            raise NumericError(
                "Non-finite Adam update",
                block=name,
                context={"grad_norm": float(np.linalg.norm(g)), "step": step},
            )
        new_params[name] = params.raw_blocks()[name] - update
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, step, state.lr, state.beta1, state.beta2, state.eps)


def gradient_clip(grads: ParameterSet, max_norm: float) -> ParameterSet:
    """Rescale so the global L2 norm is at most max_norm; direction is preserved."""
    if max_norm <= 0:
        raise ConfigurationError("max_norm must be positive")
    norm = grads.global_norm()
    if norm <= max_norm or norm == 0.0:
        return grads
    return grads.scaled(max_norm / norm)

