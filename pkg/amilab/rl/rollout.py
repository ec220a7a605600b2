import logging
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np

from ..envs.base import PosgEnv
from ..schemas.env import ActionSpace
from ..utils.audit import principal
from .buffer import RolloutBuffer
from .policy import action_width

logger = logging.getLogger(__name__)


class SlotPolicy(Protocol):
    def act(
        self, obs: np.ndarray, slot: int, rng: np.random.Generator, deterministic: bool = False
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Actions (B, W) and log-probs (B,) for observations (B, O) of one agent slot."""


class RandomPolicy:
    """Uniform actions over the action space; used for the random-adversary control."""

    def __init__(self, action_space: ActionSpace):
        self.action_space = action_space

    def act(self, obs, slot, rng, deterministic=False):
        batch = np.atleast_2d(obs).shape[0]
        space = self.action_space
        if space.is_discrete:
            actions = rng.integers(0, space.n, size=(batch, 1)).astype(np.float64)
            return actions, np.full(batch, -np.log(space.n))
        actions = rng.uniform(space.low, space.high, size=(batch, space.dim))
        return actions, np.full(batch, -space.dim * np.log(space.high - space.low))


def collect_rollouts(
    envs: Sequence[PosgEnv],
    seeds: Sequence[int],
    victims: SlotPolicy,
    rng: np.random.Generator,
    adversary: Optional[SlotPolicy] = None,
    adversary_slot: Optional[int] = None,
    adversary_present: Optional[Sequence[bool]] = None,
    deterministic: bool = False,
    keep_records: bool = False,
) -> RolloutBuffer:
    """Run one episode per environment column and pack the transitions into a buffer.

    Columns are stepped in lock-step and always in index order, so the result depends only on the
    seeds, the policies and `rng`. Victim policies act on every slot except the adversary slot of
    columns where `adversary_present` is true.
    """
    if len(envs) != len(seeds):
        raise ValueError("One seed per environment column is required")
    spec = envs[0].spec
    k_cols, n_agents, horizon = len(envs), spec.n_agents, spec.max_episode_len
    width = action_width(spec.action_space)
    if adversary_present is None:
        adversary_present = [adversary is not None and adversary_slot is not None] * k_cols
    present = np.asarray(adversary_present, dtype=bool)
    if present.any() and (adversary is None or adversary_slot is None):
        raise ValueError("adversary_present requires an adversary and a slot")

    states = np.zeros((horizon, k_cols, spec.state_dim))
    next_states = np.zeros_like(states)
    observations = np.zeros((horizon, k_cols, n_agents, spec.obs_dim))
    actions = np.zeros((horizon, k_cols, n_agents, width))
    victim_logp = np.zeros((horizon, k_cols, n_agents))
    adv_logp = np.zeros((horizon, k_cols))
    team_rewards = np.zeros((horizon, k_cols))
    adv_rewards = np.zeros((horizon, k_cols))
    dones = np.zeros((horizon, k_cols), dtype=bool)
    truncated = np.zeros((horizon, k_cols), dtype=bool)
    mask = np.zeros((horizon, k_cols), dtype=bool)
    records = [[] for _ in range(k_cols)]

    current_obs = np.zeros((k_cols, n_agents, spec.obs_dim))
    for k, (env, seed) in enumerate(zip(envs, seeds)):
        _, current_obs[k] = env.reset(int(seed))
    alive = np.ones(k_cols, dtype=bool)

    for t in range(horizon):
        live = np.flatnonzero(alive)
        if live.size == 0:
            break
        obs = current_obs[live]
        joint = np.zeros((live.size, n_agents, width))
        logp = np.zeros((live.size, n_agents))
        with principal("environment"):
            for i in range(n_agents):
                rows = np.arange(live.size)
                if i == adversary_slot:
                    rows = rows[~present[live]]
                if rows.size:
                    joint[rows, i], logp[rows, i] = victims.act(obs[rows, i], i, rng, deterministic)
        adv_rows = np.flatnonzero(present[live])
        if adv_rows.size:
            joint[adv_rows, adversary_slot], a_logp = adversary.act(
                obs[adv_rows, adversary_slot], adversary_slot, rng, deterministic
            )
            adv_logp[t, live[adv_rows]] = a_logp

        for row, k in enumerate(live):
            record = envs[k].step(joint[row])
            states[t, k] = record.state
            next_states[t, k] = record.next_state
            observations[t, k] = record.observations
            actions[t, k] = joint[row]
            victim_logp[t, k] = logp[row]
            team_rewards[t, k] = record.team_reward
            adv_rewards[t, k] = record.adversary_reward
            dones[t, k] = record.done
            truncated[t, k] = record.info.get("truncated", False)
            mask[t, k] = True
            current_obs[k] = record.next_observations
            if keep_records:
                records[k].append(record)
            if record.done:
                alive[k] = False

    return RolloutBuffer(
        states=states,
        observations=observations,
        actions=actions,
        next_states=next_states,
        victim_logp=victim_logp,
        adv_logp=adv_logp,
        team_rewards=team_rewards,
        adv_rewards=adv_rewards,
        dones=dones,
        truncated=truncated,
        mask=mask,
        adversary_slot=adversary_slot,
        adversary_present=present,
        episode_seeds=[int(s) for s in seeds],
        records=records if keep_records else [],
    )
