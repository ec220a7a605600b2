"""Cooperative victim policies: decentralized actors over local observations, one centralized critic."""
import copy
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..envs.factory import make_env
from ..exceptions import DivergenceError, IntegrityError, NumericError
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.params import ParameterSet
from ..rl.buffer import RolloutBuffer
from ..rl.gae import compute_gae
from ..rl.policy import PolicyNetwork, ValueNetwork
from ..rl.ppo import PPOBatch, ppo_update, value_update
from ..rl.rollout import SlotPolicy, collect_rollouts
from ..schemas.env import EnvConfig, PosgSpec
from ..schemas.experiment import VictimTrainingConfig
from ..schemas.train import TrainConfig
from ..utils.activity_logger import log_activity
from ..utils.csv_writer import write_rows
from ..utils.seeding import episode_seeds, rng_for
from ..utils.stats import summarize
from .activity_service import ActivityService

logger = logging.getLogger(__name__)

VICTIM_PREFIX = "victim/"
VICTIM_OWNER = "victim"
LEARNING_CURVE_COLUMNS = ["iteration", "env_steps", "reward_mean", "reward_ci95"]


class VictimPolicySet:
    """Victim actors plus the centralized critic V(s).

    With `share_parameters` one actor serves every slot and receives the slot id as a one-hot
    suffix of its observation.
    """

    def __init__(self, spec: PosgSpec, train: TrainConfig, rng: np.random.Generator, share_parameters: bool = True):
        self.spec = spec
        self.train = train
        self.share_parameters = share_parameters
        n = spec.n_agents
        input_dim = spec.obs_dim + (n if share_parameters else 0)
        prefixes = [f"{VICTIM_PREFIX}actor/"] if share_parameters else [f"{VICTIM_PREFIX}actor{i}/" for i in range(n)]
        self.actors = [
            PolicyNetwork(input_dim, spec.action_space, 1, train, rng, prefix=p, owner=VICTIM_OWNER) for p in prefixes
        ]
        self.critic = ValueNetwork(spec.state_dim, train, rng, prefix=f"{VICTIM_PREFIX}critic/", owner=VICTIM_OWNER)
        self._frozen_checksum: Optional[str] = None

    @property
    def n_agents(self) -> int:
        return self.spec.n_agents

    @property
    def frozen(self) -> bool:
        return self._frozen_checksum is not None

    def actor_for(self, slot: int) -> PolicyNetwork:
        return self.actors[0] if self.share_parameters else self.actors[slot]

    def actor_input(self, obs: np.ndarray, slot: int) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        if not self.share_parameters:
            return obs
        one_hot = np.zeros((obs.shape[0], self.n_agents))
        one_hot[:, slot] = 1.0
        return np.concatenate([obs, one_hot], axis=1)

    def act(self, obs, slot, rng, deterministic=False):
        actions, logp = self.actor_for(slot).sample(self.actor_input(obs, slot), rng, deterministic)
        return actions[:, 0], logp[:, 0]

    def parameters(self) -> ParameterSet:
        merged = ParameterSet.merge(*[a.params for a in self.actors], self.critic.params)
        merged.owner = VICTIM_OWNER
        return merged

    def checksum(self) -> str:
        return self.parameters().checksum()

    def freeze(self) -> "VictimPolicySet":
        for module in (*self.actors, self.critic):
            module.freeze()
        self._frozen_checksum = self.checksum()
        return self

    def verify_frozen(self) -> None:
        if self._frozen_checksum is not None and self.checksum() != self._frozen_checksum:
            raise IntegrityError("Frozen victim parameters changed", context={"expected": self._frozen_checksum})

    def copy(self) -> "VictimPolicySet":
        """Unfrozen deep copy with fresh optimizer state."""
        clone = VictimPolicySet.__new__(VictimPolicySet)
        clone.spec, clone.train, clone.share_parameters = self.spec, self.train, self.share_parameters
        clone.actors = [_clone_module(a) for a in self.actors]
        clone.critic = _clone_module(self.critic)
        clone._frozen_checksum = None
        return clone

    def save(self, path: str | Path) -> str:
        return save_checkpoint(path, self.parameters())

    @classmethod
    def load(
        cls, path: str | Path, spec: PosgSpec, train: TrainConfig, share_parameters: bool = True
    ) -> "VictimPolicySet":
        stored = load_checkpoint(path, owner=VICTIM_OWNER)
        victims = cls(spec, train, np.random.default_rng(0), share_parameters)
        for module in (*victims.actors, victims.critic):
            assign_blocks(module, stored)
        return victims


def _clone_module(module):
    clone = copy.copy(module)
    clone.params = module.params.copy()
    clone.optimizer = type(module.optimizer).for_params(clone.params, module.optimizer.lr)
    return clone


def assign_blocks(module, stored: ParameterSet) -> None:
    blocks = stored.raw_blocks()
    for name in module.params.names():
        if name not in blocks:
            raise IntegrityError(f"Checkpoint lacks block '{name}'")
        module.params[name] = blocks[name]
    module.optimizer = type(module.optimizer).for_params(module.params, module.optimizer.lr)


@dataclass
class VictimIterationResult:
    iteration: int
    env_steps: int
    reward_mean: float
    reward_ci95: float
    policy_loss: float
    value_loss: float
    skipped: int


class VictimTrainer:
    """PPO/GAE training loop for victims, optionally with an adversary present in some episodes."""

    def __init__(
        self,
        env_config: EnvConfig,
        config: VictimTrainingConfig,
        seed: int,
        victims: Optional[VictimPolicySet] = None,
        events: Optional[ActivityService] = None,
        phase: int = 0,
    ):
        self.env_config = env_config
        self.config = config
        self.train = config.train
        self.seed = seed
        self.phase = phase
        self.events = events
        self.envs = [make_env(env_config, adversary_slot=None) for _ in range(self.train.parallel_envs)]
        self.spec = self.envs[0].spec
        if victims is None:
            victims = VictimPolicySet(
                self.spec, self.train, rng_for(seed, "policy_init", phase), config.share_parameters
            )
        self.victims = victims
        self.env_steps = 0

    def collect(
        self,
        iteration: int,
        adversary: Optional[SlotPolicy] = None,
        adversary_slot: Optional[int] = None,
        present: Optional[Sequence[bool]] = None,
    ) -> RolloutBuffer:
        k = len(self.envs)
        present_arr = np.zeros(k, dtype=bool) if present is None else np.asarray(present, dtype=bool)
        for env, has_adversary in zip(self.envs, present_arr):
            env.adversary_slot = adversary_slot if has_adversary else None
        seeds = episode_seeds(self.seed, "env", k, self.phase, iteration)
        return collect_rollouts(
            self.envs,
            seeds,
            self.victims,
            rng_for(self.seed, "rollout", self.phase, iteration),
            adversary=adversary,
            adversary_slot=adversary_slot,
            adversary_present=present_arr,
        )

    def update(self, buffer: RolloutBuffer, iteration: int) -> Tuple[float, float, int]:
        train = self.train
        critic = self.victims.critic
        values = critic.predict(buffer.states)
        next_values = critic.predict(buffer.next_states)
        adv, returns = compute_gae(
            buffer.team_rewards,
            values,
            buffer.dones,
            train.gamma,
            train.gae_lambda,
            truncated=buffer.truncated,
            next_values=next_values,
        )
        buffer.advantages, buffer.returns, buffer.values = adv, returns, values
        buffer.check_finite()

        controlled = buffer.controlled_mask()
        rng = rng_for(self.seed, "minibatch", self.phase, iteration)
        groups: Dict[int, List[int]] = {}
        for slot in range(buffer.n_agents):
            groups.setdefault(0 if self.victims.share_parameters else slot, []).append(slot)
        policy_loss, skipped = 0.0, 0
        for actor_idx, slots in groups.items():
            inputs, actions, old_logp, advantages = [], [], [], []
            for slot in slots:
                sel = controlled[:, :, slot]
                inputs.append(self.victims.actor_input(buffer.observations[:, :, slot][sel], slot))
                actions.append(buffer.actions[:, :, slot][sel][:, None, :])
                old_logp.append(buffer.victim_logp[:, :, slot][sel][:, None])
                advantages.append(adv[sel])
            batch = PPOBatch(
                np.concatenate(inputs), np.concatenate(actions), np.concatenate(old_logp), np.concatenate(advantages)
            )
            stats = ppo_update(self.victims.actors[actor_idx], batch, train, rng)
            policy_loss += stats.policy_loss
            skipped += stats.skipped
        loss_v = value_update(critic, buffer.flat(buffer.states), buffer.flat(returns), train, rng)
        return policy_loss, loss_v, skipped

    def iteration(
        self,
        iteration: int,
        adversary: Optional[SlotPolicy] = None,
        adversary_slot: Optional[int] = None,
        present: Optional[Sequence[bool]] = None,
    ) -> VictimIterationResult:
        buffer = self.collect(iteration, adversary, adversary_slot, present)
        try:
            policy_loss, loss_v, skipped = self.update(buffer, iteration)
        except NumericError as e:
            raise DivergenceError(
                f"Victim training diverged at iteration {iteration}: {e.detail}",
                context={"iteration": iteration, "block": e.block, **e.context},
            ) from e
        self.env_steps += buffer.n_valid
        returns = buffer.episode_returns("team")
        summary = summarize(returns)
        log_activity(
            self.events,
            "victim_update",
            f"Victim PPO iteration {iteration}",
            {"iteration": iteration, "reward_mean": summary.mean, "policy_loss": policy_loss, "value_loss": loss_v},
        )
        return VictimIterationResult(
            iteration, self.env_steps, summary.mean, summary.ci95, policy_loss, loss_v, skipped
        )


def write_learning_curve(path: str | Path, results: Sequence[VictimIterationResult]) -> Path:
    rows = [[r.iteration, r.env_steps, r.reward_mean, r.reward_ci95] for r in results]
    return write_rows(path, rows, LEARNING_CURVE_COLUMNS)


def train_victims(
    env_config: EnvConfig,
    config: VictimTrainingConfig,
    seed: int,
    out_dir: Optional[str | Path] = None,
    events: Optional[ActivityService] = None,
) -> Tuple[VictimPolicySet, List[VictimIterationResult]]:
    """Train victims with MAPPO, write the curve and checkpoint when `out_dir` is given, and freeze them."""
    trainer = VictimTrainer(env_config, config, seed, events=events)
    results = []
    for it in range(config.iterations):
        result = trainer.iteration(it)
        results.append(result)
        if it % 10 == 0 or it == config.iterations - 1:
            logger.info("victims it=%d steps=%d team_reward=%.4f", it, result.env_steps, result.reward_mean)
    victims = trainer.victims
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_learning_curve(out_dir / "learning_curve.csv", results)
        victims.save(out_dir / "victims.ami")
    victims.freeze()
    log_activity(events, "victims_frozen", "Victim parameters frozen", {"checksum": victims.checksum()})
    return victims, results
