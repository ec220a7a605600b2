"""Actor and critic networks on top of the dense stack.

A `PolicyNetwork` has one trunk and `n_heads` action heads laid out side by side in the output
layer. Discrete heads emit logits; continuous heads emit means with a state-independent log-std
block of shape (n_heads, dim).
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError
from ..nn.distributions import (
    ActionDistribution,
    Categorical,
    DiagGaussian,
    categorical_entropy,
    categorical_log_prob,
    categorical_probs,
    gaussian_entropy,
    gaussian_log_prob,
)
from ..nn.mlp import backward, forward, init_params
from ..nn.optim import AdamState, adam_step, gradient_clip
from ..nn.params import ParameterSet
from ..schemas.env import ActionSpace
from ..schemas.network import MLPSpec
from ..schemas.train import TrainConfig

logger = logging.getLogger(__name__)


def encode_actions(actions: np.ndarray, space: ActionSpace) -> np.ndarray:
    """Encode (..., n, W) actions as (..., n * encoded_dim): one-hot ids or box-scaled vectors."""
    actions = np.asarray(actions, dtype=np.float64)
    if space.is_discrete:
        ids = actions[..., 0].astype(np.int64)
        encoded = np.eye(space.n)[ids]
    else:
        encoded = actions / max(abs(space.high), abs(space.low))
    return encoded.reshape(*actions.shape[:-2], -1)


def action_width(space: ActionSpace) -> int:
    return 1 if space.is_discrete else int(space.dim)


class TrainableModule:
    """Parameters plus their Adam state; updates replace the parameter set."""

    def __init__(self, params: ParameterSet, lr: float):
        self.params = params
        self.optimizer = AdamState.for_params(params, lr)

    def apply_gradients(self, grads: ParameterSet, max_grad_norm: Optional[float] = None) -> float:
        if self.params.frozen:
            raise ConfigurationError("Cannot update frozen parameters")
        norm = grads.global_norm()
        if max_grad_norm is not None:
            grads = gradient_clip(grads, max_grad_norm)
        self.params, self.optimizer = adam_step(self.params, grads, self.optimizer)
        return norm

    def snapshot(self) -> Tuple[ParameterSet, AdamState]:
        return self.params.copy(), self.optimizer.copy()

    def restore(self, snapshot: Tuple[ParameterSet, AdamState]) -> None:
        params, optimizer = snapshot
        self.params, self.optimizer = params.copy(), optimizer.copy()

    def freeze(self) -> None:
        self.params.freeze()


class PolicyNetwork(TrainableModule):
    def __init__(
        self,
        input_dim: int,
        action_space: ActionSpace,
        n_heads: int,
        train: TrainConfig,
        rng: np.random.Generator,
        prefix: str = "actor/",
        owner: Optional[str] = None,
        lr: Optional[float] = None,
    ):
        self.action_space = action_space
        self.n_heads = n_heads
        self.prefix = prefix
        self.head_width = action_space.head_width
        self.spec = MLPSpec(
            input_dim=input_dim,
            hidden_dims=train.hidden_dims,
            output_dim=n_heads * self.head_width,
            activation=train.activation,
        )
        params = init_params(self.spec, rng, prefix=prefix, output_gain=train.gain, owner=owner)
        if not action_space.is_discrete:
            params.add(self.log_std_name, np.full((n_heads, self.head_width), train.initial_log_std))
        super().__init__(params, train.resolved_actor_lr if lr is None else lr)

    @property
    def is_discrete(self) -> bool:
        return self.action_space.is_discrete

    @property
    def log_std_name(self) -> str:
        return f"{self.prefix}log_std"

    def _head_outputs(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = forward(self.spec, self.params, x, prefix=self.prefix)
        return out.reshape(x.shape[0], self.n_heads, self.head_width)

    def _log_std(self) -> np.ndarray:
        return self.params[self.log_std_name]

    def probs(self, x: np.ndarray) -> np.ndarray:
        """(B, H, A) head probabilities (discrete only)."""
        if not self.is_discrete:
            raise ConfigurationError("probs() is only defined for discrete heads")
        return categorical_probs(self._head_outputs(x))

    def gaussian_params(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        means = self._head_outputs(x)
        return means, np.broadcast_to(self._log_std(), means.shape)

    def distributions(self, x: np.ndarray) -> List[ActionDistribution]:
        """Per-head distributions for one input vector."""
        out = self._head_outputs(x)[0]
        if self.is_discrete:
            return [Categorical.from_logits(out[h]) for h in range(self.n_heads)]
        log_std = self._log_std()
        return [DiagGaussian(out[h], log_std[h]) for h in range(self.n_heads)]

    def sample(
        self, x: np.ndarray, rng: np.random.Generator, deterministic: bool = False
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Draw one action per head. Returns actions (B, H, W) and their log-probs (B, H)."""
        out = self._head_outputs(x)
        if self.is_discrete:
            probs = categorical_probs(out)
            if deterministic:
                ids = probs.argmax(axis=-1)
            else:
                u = rng.random(probs.shape[:-1])
                cdf = np.cumsum(probs, axis=-1)
                ids = np.minimum((u[..., None] >= cdf).sum(axis=-1), probs.shape[-1] - 1)
            actions = ids[..., None].astype(np.float64)
        else:
            log_std = np.broadcast_to(self._log_std(), out.shape)
            if deterministic:
                actions = out.copy()
            else:
                actions = out + np.exp(log_std) * rng.standard_normal(out.shape)
        return actions, self.log_prob(x, actions)

    def log_prob(self, x: np.ndarray, actions: np.ndarray) -> np.ndarray:
        out = self._head_outputs(x)
        actions = np.asarray(actions, dtype=np.float64).reshape(out.shape[0], self.n_heads, -1)
        if self.is_discrete:
            return categorical_log_prob(out, actions[..., 0])[0]
        return gaussian_log_prob(out, self._log_std(), actions)[0]

    def entropy(self, x: np.ndarray) -> np.ndarray:
        out = self._head_outputs(x)
        if self.is_discrete:
            return categorical_entropy(out)[0]
        return np.broadcast_to(gaussian_entropy(self._log_std())[0], out.shape[:2]).copy()

    def grad(
        self,
        x: np.ndarray,
        actions: np.ndarray,
        logp_coef: np.ndarray,
        entropy_coef: Optional[np.ndarray] = None,
    ) -> ParameterSet:
        """Gradient of sum(logp_coef * log pi(a)) + sum(entropy_coef * H) over the batch."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = self._head_outputs(x)
        batch = out.shape[0]
        actions = np.asarray(actions, dtype=np.float64).reshape(batch, self.n_heads, -1)
        logp_coef = np.asarray(logp_coef, dtype=np.float64).reshape(batch, self.n_heads)
        ent_coef = (
            np.zeros_like(logp_coef)
            if entropy_coef is None
            else np.asarray(entropy_coef, dtype=np.float64).reshape(batch, self.n_heads)
        )
        if self.is_discrete:
            _, d_logp = categorical_log_prob(out, actions[..., 0])
            _, d_ent = categorical_entropy(out)
            d_out = logp_coef[..., None] * d_logp + ent_coef[..., None] * d_ent
            return backward(self.spec, self.params, x, d_out.reshape(batch, -1), prefix=self.prefix)

        _, d_mean, d_log_std = gaussian_log_prob(out, self._log_std(), actions)
        d_out = logp_coef[..., None] * d_mean
        grads = backward(self.spec, self.params, x, d_out.reshape(batch, -1), prefix=self.prefix)
        g_log_std = (logp_coef[..., None] * d_log_std).sum(axis=0) + ent_coef.sum(axis=0)[:, None]
        grads.add(self.log_std_name, g_log_std)
        return grads


class ValueNetwork(TrainableModule):
    def __init__(
        self,
        input_dim: int,
        train: TrainConfig,
        rng: np.random.Generator,
        prefix: str = "critic/",
        owner: Optional[str] = None,
        lr: Optional[float] = None,
    ):
        self.prefix = prefix
        self.spec = MLPSpec(
            input_dim=input_dim, hidden_dims=train.hidden_dims, output_dim=1, activation=train.activation
        )
        params = init_params(self.spec, rng, prefix=prefix, output_gain=1.0, owner=owner)
        super().__init__(params, train.resolved_critic_lr if lr is None else lr)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        flat = x.reshape(-1, x.shape[-1])
        return forward(self.spec, self.params, flat, prefix=self.prefix)[:, 0].reshape(x.shape[:-1])

    def grad(self, x: np.ndarray, d_values: np.ndarray) -> ParameterSet:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return backward(
            self.spec, self.params, x, np.asarray(d_values, dtype=np.float64).reshape(-1, 1), prefix=self.prefix
        )
