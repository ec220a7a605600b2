import logging
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..envs.export import export_trajectories
from ..envs.factory import make_env
from ..rl.rollout import RandomPolicy, SlotPolicy, collect_rollouts
from ..schemas.env import EnvConfig
from ..schemas.manifest import EvaluationSummary
from ..utils.audit import principal
from ..utils.seeding import episode_seeds, rng_for
from ..utils.stats import summarize

logger = logging.getLogger(__name__)


def evaluate_attack(
    env_config: EnvConfig,
    victims: SlotPolicy,
    adversary: Optional[SlotPolicy],
    adversary_slot: int,
    episodes: int,
    seed: int,
    deterministic: bool = True,
    trajectory_path: Optional[Path] = None,
) -> EvaluationSummary:
    """Evaluate on `episodes` seeded episodes with greedy policies.

    Episode seeds come from the master seed alone, so evaluations of different methods under the
    same seed see the same initial states and can be paired. `adversary=None` leaves the victim
    policy in the adversary slot (no-attack control). With `trajectory_path` the evaluation
    episodes are also written as a per-agent CSV.
    """
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    envs = [make_env(env_config, adversary_slot=adversary_slot) for _ in range(episodes)]
    seeds = episode_seeds(seed, "eval", episodes)
    with principal("environment"):
        buffer = collect_rollouts(
            envs,
            seeds,
            victims,
            rng_for(seed, "eval"),
            adversary=adversary,
            adversary_slot=adversary_slot,
            adversary_present=[adversary is not None] * episodes,
            deterministic=deterministic,
            keep_records=trajectory_path is not None,
        )
    if trajectory_path is not None:
        export_trajectories(trajectory_path, enumerate(buffer.records))
    adv_returns = buffer.episode_returns("adv")
    team_returns = buffer.episode_returns("team")
    adv = summarize(adv_returns)
    return EvaluationSummary(
        episodes=episodes,
        adv_reward_mean=adv.mean,
        adv_reward_std=adv.std,
        adv_reward_ci95=adv.ci95,
        team_reward_mean=float(np.mean(team_returns)),
        episode_adv_rewards=[float(x) for x in adv_returns],
        episode_team_rewards=[float(x) for x in team_returns],
        flags=adv.flags,
    )


def evaluate_controls(
    env_config: EnvConfig,
    victims: SlotPolicy,
    adversary_slot: int,
    episodes: int,
    seed: int,
    action_space,
) -> Dict[str, EvaluationSummary]:
    """Random-adversary and no-attack controls on the same evaluation episodes."""
    return {
        "random_adversary": evaluate_attack(
            env_config, victims, RandomPolicy(action_space), adversary_slot, episodes, seed
        ),
        "no_attack": evaluate_attack(env_config, victims, None, adversary_slot, episodes, seed),
    }
