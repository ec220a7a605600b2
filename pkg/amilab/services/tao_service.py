"""Targeted adversarial oracle: a PPO agent proposing one worst-case target action per victim.

It is trained on the adversary's environment reward and never acts in the environment.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from ..nn.params import ParameterSet
from ..rl.gae import compute_gae
from ..rl.policy import PolicyNetwork, ValueNetwork, encode_actions
from ..rl.ppo import PPOBatch, PPOStats, ppo_update, value_update
from ..schemas.env import PosgSpec
from ..schemas.train import TrainConfig
from ..utils.csv_writer import write_rows

logger = logging.getLogger(__name__)

TAO_PREFIX = "tao/"


@dataclass
class TaoBatch:
    """TAO inputs over a T x K rollout: features (T, K, F), targets (T, K, N_v, W), log-probs (T, K, N_v)."""

    features: np.ndarray
    targets: np.ndarray
    logp: np.ndarray
    mask: np.ndarray


def sample_targets(
    policy: PolicyNetwork, inputs: np.ndarray, rng: np.random.Generator, deterministic: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """One target per victim head, drawn independently; returns targets (B, N_v, W) and log-probs (B, N_v)."""
    return policy.sample(inputs, rng, deterministic)


class TargetedAdversarialOracle:
    def __init__(self, spec: PosgSpec, train: TrainConfig, rng: np.random.Generator):
        self.spec = spec
        self.train = train
        self.space = spec.action_space
        enc = self.space.encoded_dim
        self.input_dim = spec.state_dim + spec.n_victims * enc + enc
        self.policy = PolicyNetwork(
            self.input_dim, self.space, spec.n_victims, train, rng,
            prefix=f"{TAO_PREFIX}actor/", lr=train.resolved_tao_lr,
        )
        self.critic = ValueNetwork(
            self.input_dim, train, rng, prefix=f"{TAO_PREFIX}critic/", lr=train.resolved_tao_critic_lr
        )

    def parameters(self) -> ParameterSet:
        return ParameterSet.merge(self.policy.params, self.critic.params)

    def features(self, states: np.ndarray, victim_actions: np.ndarray, adv_actions: np.ndarray) -> np.ndarray:
        """(..., S) states, (..., N_v, W) victim actions, (..., W) adversary actions -> (..., F)."""
        v = encode_actions(victim_actions, self.space)
        a = encode_actions(np.asarray(adv_actions, dtype=np.float64)[..., None, :], self.space)
        return np.concatenate([states, v, a], axis=-1)

    def propose(
        self, features: np.ndarray, mask: np.ndarray, rng: np.random.Generator, deterministic: bool = False
    ) -> TaoBatch:
        """Sample targets for every valid step of a (T, K, F) feature array."""
        horizon, cols = mask.shape
        n_victims, width = self.spec.n_victims, 1 if self.space.is_discrete else self.space.dim
        targets = np.zeros((horizon, cols, n_victims, width))
        logp = np.zeros((horizon, cols, n_victims))
        if mask.any():
            sampled, sampled_logp = sample_targets(self.policy, features[mask], rng, deterministic)
            targets[mask] = sampled
            logp[mask] = sampled_logp
        return TaoBatch(features, targets, logp, mask)

    def advantages(
        self, batch: TaoBatch, adv_rewards: np.ndarray, dones: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """GAE of the adversary reward under V_tau. Episode ends, truncation included, are terminal."""
        values = np.zeros(batch.mask.shape)
        if batch.mask.any():
            values[batch.mask] = self.critic.predict(batch.features[batch.mask])
        return compute_gae(adv_rewards * batch.mask, values, dones | ~batch.mask, self.train.gamma, self.train.gae_lambda)

    def update_critic(self, batch: TaoBatch, returns: np.ndarray, rng: np.random.Generator) -> float:
        return value_update(self.critic, batch.features[batch.mask], returns[batch.mask], self.train, rng)

    def update_policy(self, batch: TaoBatch, advantages: np.ndarray, rng: np.random.Generator) -> PPOStats:
        ppo_batch = PPOBatch(
            batch.features[batch.mask], batch.targets[batch.mask], batch.logp[batch.mask], advantages[batch.mask]
        )
        return ppo_update(self.policy, ppo_batch, self.train, rng, ratio_mode="mean")


def tao_update(
    tao: TargetedAdversarialOracle,
    batch: TaoBatch,
    adv_rewards: np.ndarray,
    dones: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[PPOStats, np.ndarray]:
    """Critic regression then averaged-ratio PPO on the TAO policy. Returns stats and the advantages used."""
    advantages, returns = tao.advantages(batch, adv_rewards, dones)
    stats = PPOStats()
    stats.value_loss = tao.update_critic(batch, returns, rng)
    policy_stats = tao.update_policy(batch, advantages, rng)
    policy_stats.value_loss = stats.value_loss
    return policy_stats, advantages


def export_target_transcript(
    path: str | Path,
    tao: TargetedAdversarialOracle,
    batch: TaoBatch,
    next_victim_actions: np.ndarray,
    next_mask: np.ndarray,
    columns: Optional[int] = None,
) -> Path:
    """Rows of (episode, t, victim, target..., dist..., realized...) for the first `columns` episodes."""
    horizon, cols = batch.mask.shape
    cols = cols if columns is None else min(cols, columns)
    width = batch.targets.shape[-1]
    discrete = tao.space.is_discrete
    dist_names = (
        [f"p_{a}" for a in range(tao.space.n)]
        if discrete
        else [f"mean_{d}" for d in range(tao.space.dim)] + [f"log_std_{d}" for d in range(tao.space.dim)]
    )
    header = (
        ["episode", "t", "victim"]
        + [f"target_{w}" for w in range(width)]
        + dist_names
        + [f"realized_{w}" for w in range(width)]
    )
    rows = []
    for k in range(cols):
        steps = np.flatnonzero(batch.mask[:, k])
        if steps.size == 0:
            continue
        x = batch.features[steps, k]
        if discrete:
            dist = tao.policy.probs(x)
        else:
            means, log_std = tao.policy.gaussian_params(x)
            dist = np.concatenate([means, log_std], axis=-1)
        for j, t in enumerate(steps):
            for i in range(tao.spec.n_victims):
                realized = (
                    next_victim_actions[t, k, i].tolist() if next_mask[t, k] else [float("nan")] * width
                )
                rows.append([k, int(t), i, *batch.targets[t, k, i].tolist(), *dist[j, i].tolist(), *realized])
    return write_rows(path, rows, header)
