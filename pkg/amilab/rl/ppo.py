"""Clipped-surrogate policy optimisation and critic regression."""
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np

from ..nn.losses import value_loss
from ..schemas.train import TrainConfig
from .policy import PolicyNetwork, ValueNetwork

logger = logging.getLogger(__name__)

RatioMode = Literal["per_head", "mean"]


@dataclass
class PPOBatch:
    """Flat samples: inputs (B, F), actions (B, H, W), old log-probs (B, H), advantages (B,)."""

    inputs: np.ndarray
    actions: np.ndarray
    old_logp: np.ndarray
    advantages: np.ndarray

    def __post_init__(self):
        b = self.inputs.shape[0]
        if self.actions.shape[0] != b or self.old_logp.shape[0] != b or self.advantages.shape[0] != b:
            raise ValueError("PPO batch arrays must share the leading dimension")

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    def take(self, idx: np.ndarray) -> "PPOBatch":
        return PPOBatch(self.inputs[idx], self.actions[idx], self.old_logp[idx], self.advantages[idx])


@dataclass
class PPOStats:
    policy_loss: float = 0.0
    entropy: float = 0.0
    clip_fraction: float = 0.0
    approx_kl: float = 0.0
    grad_norm: float = 0.0
    skipped: int = 0
    value_loss: float = 0.0


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    adv = np.asarray(advantages, dtype=np.float64)
    centered = adv - adv.mean()
    std = adv.std()
    if adv.size < 2 or std == 0.0:
        return centered
    return centered / (std + 1e-8)


def clipped_surrogate(ratio: np.ndarray, advantages: np.ndarray, clip: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample min(rho A, clip(rho) A) and its derivative with respect to rho."""
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    unclipped_obj = ratio * advantages
    clipped_obj = clipped * advantages
    objective = np.minimum(unclipped_obj, clipped_obj)
    grad = np.where(unclipped_obj <= clipped_obj, advantages, 0.0)
    return objective, grad


def _ratios(logp: np.ndarray, old_logp: np.ndarray, mode: RatioMode) -> Tuple[np.ndarray, np.ndarray]:
    """Sample ratios (B,) and per-head ratios (B, H). `mean` averages per-head ratios."""
    with np.errstate(over="ignore", invalid="ignore"):
        head_ratio = np.exp(logp - old_logp)
    if mode == "mean":
        return head_ratio.mean(axis=1), head_ratio
    return np.prod(head_ratio, axis=1), head_ratio


def surrogate_loss(
    policy: PolicyNetwork,
    batch: PPOBatch,
    clip: float,
    entropy_coef: float,
    ratio_mode: RatioMode = "per_head",
    normalize: bool = True,
) -> float:
    """Negative clipped objective minus the entropy bonus, over finite-ratio samples."""
    adv = normalize_advantages(batch.advantages) if normalize else batch.advantages
    ratio, _ = _ratios(policy.log_prob(batch.inputs, batch.actions), batch.old_logp, ratio_mode)
    ok = np.isfinite(ratio)
    if not ok.any():
        return 0.0
    objective, _ = clipped_surrogate(ratio[ok], adv[ok], clip)
    entropy = policy.entropy(batch.inputs[ok]).mean()
    return float(-(objective.mean() + entropy_coef * entropy))


def _policy_step(
    policy: PolicyNetwork,
    batch: PPOBatch,
    train: TrainConfig,
    ratio_mode: RatioMode,
    stats: PPOStats,
) -> None:
    adv = normalize_advantages(batch.advantages)
    logp = policy.log_prob(batch.inputs, batch.actions)
    ratio, head_ratio = _ratios(logp, batch.old_logp, ratio_mode)
    ok = np.isfinite(ratio) & np.all(np.isfinite(head_ratio), axis=1)
    skipped = int((~ok).sum())
    if skipped:
        stats.skipped += skipped
        logger.warning("Skipping %d samples with non-finite importance ratio", skipped)
    if not ok.any():
        return

    n = int(ok.sum())
    objective, d_ratio = clipped_surrogate(ratio[ok], adv[ok], train.ppo_clip)
    n_heads = logp.shape[1]
    if ratio_mode == "mean":
        d_logp = d_ratio[:, None] * head_ratio[ok] / n_heads
    else:
        d_logp = (d_ratio * ratio[ok])[:, None] * np.ones((1, n_heads))
    inputs, actions = batch.inputs[ok], batch.actions[ok]
    entropy = policy.entropy(inputs)
    # Ascend the objective: gradient of the loss is the negated objective gradient.
    grads = policy.grad(
        inputs,
        actions,
        logp_coef=-d_logp / n,
        entropy_coef=-np.full_like(entropy, train.entropy_coef / (n * n_heads)),
    )
    stats.grad_norm = policy.apply_gradients(grads, train.max_grad_norm)
    stats.policy_loss = float(-(objective.mean() + train.entropy_coef * entropy.mean()))
    stats.entropy = float(entropy.mean())
    stats.clip_fraction = float(np.mean(np.abs(ratio[ok] - 1.0) > train.ppo_clip))
    stats.approx_kl = float(np.mean(batch.old_logp[ok] - logp[ok]))


def minibatches(n: int, count: int, rng: np.random.Generator):
    order = rng.permutation(n)
    count = max(1, min(count, n))
    return np.array_split(order, count)


def ppo_update(
    policy: PolicyNetwork,
    batch: PPOBatch,
    train: TrainConfig,
    rng: np.random.Generator,
    ratio_mode: RatioMode = "per_head",
    epochs: Optional[int] = None,
) -> PPOStats:
    """Run `ppo_epochs` passes of minibatch clipped-surrogate ascent on `policy`."""
    stats = PPOStats()
    if len(batch) == 0:
        logger.warning("PPO update called with an empty batch")
        return stats
    for _ in range(epochs or train.ppo_epochs):
        for idx in minibatches(len(batch), train.minibatch_num, rng):
            _policy_step(policy, batch.take(idx), train, ratio_mode, stats)
    return stats


def value_update(
    critic: ValueNetwork,
    inputs: np.ndarray,
    returns: np.ndarray,
    train: TrainConfig,
    rng: np.random.Generator,
    epochs: Optional[int] = None,
) -> float:
    """Regress the critic onto returns; Huber when the config enables it. Returns the last loss."""
    loss = 0.0
    if inputs.shape[0] == 0:
        return loss
    for _ in range(epochs or train.ppo_epochs):
        for idx in minibatches(inputs.shape[0], train.minibatch_num, rng):
            pred = critic.predict(inputs[idx])
            loss, d_pred = value_loss(pred, returns[idx], train.huber)
            critic.apply_gradients(critic.grad(inputs[idx], d_pred), train.max_grad_norm)
    return float(loss)

