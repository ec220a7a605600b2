"""Adversarial-minority-influence training and its baselines.

One iteration runs, in this order: rollout, opponent-model fit, TAO critic and policy update,
reward shaping, adversary critic and policy update. Every learned component is snapshotted
before the iteration and restored if any step diverges.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..envs.factory import make_env
from ..exceptions import DivergenceError, IntegrityError, NumericError
from ..influence.distance import discrete_distances, mixture_distances, within_bounds
from ..influence.information import entropy, kl_to_uniform
from ..influence.reward import InfluencePieces, InfluenceRecord, ami_influence_reward, variant_reward
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.distributions import LOG_2PI, Categorical, GaussianMixture
from ..nn.params import ParameterSet
from ..rl.buffer import RolloutBuffer
from ..rl.gae import compute_gae
from ..rl.policy import PolicyNetwork, ValueNetwork
from ..rl.ppo import PPOBatch, ppo_update, value_update
from ..rl.rollout import collect_rollouts
from ..schemas.attack import AttackConfig, AttackMethod
from ..schemas.env import EnvConfig, PosgSpec
from ..schemas.manifest import EvaluationSummary
from ..schemas.train import TrainConfig
from ..utils.activity_logger import log_activity
from ..utils.audit import audit, principal
from ..utils.csv_writer import write_rows
from ..utils.hashing import file_hash
from ..utils.running_stats import RunningMeanStd
from ..utils.seeding import episode_seeds, rng_for
from ..utils.stats import summarize
from .activity_service import ActivityService
from .evaluation_service import evaluate_attack, evaluate_controls
from .opponent_model import OpponentModel
from .tao_service import TaoBatch, TargetedAdversarialOracle, export_target_transcript, tao_update
from .victim_service import VictimPolicySet, assign_blocks

logger = logging.getLogger(__name__)

ADV_PREFIX = "adv/"
ATTACKER = "attacker"
METRICS_COLUMNS = [
    "iter",
    "env_steps",
    "adv_reward_mean",
    "adv_reward_ci95",
    "influence_mean",
    "nll_opp_model",
    "team_reward_mean",
]
TIMING_COLUMNS = ["iter", "wallclock_s"]
ALGORITHM_ORDER = (
    "rollout",
    "opp_fit",
    "tao_critic",
    "tao_update",
    "reward_mix",
    "adversary_critic",
    "adversary_update",
)
# Stand-in for log(0) when the cross-entropy metric meets a zero-probability target.
LOG_FLOOR = -50.0


class AdversaryAgent:
    """Actor over the adversary's local observation, critic over the global state."""

    def __init__(self, spec: PosgSpec, train: TrainConfig, rng: np.random.Generator):
        self.spec = spec
        self.train = train
        self.actor = PolicyNetwork(
            spec.obs_dim, spec.action_space, 1, train, rng, prefix=f"{ADV_PREFIX}actor/", owner=ATTACKER
        )
        self.critic = ValueNetwork(spec.state_dim, train, rng, prefix=f"{ADV_PREFIX}critic/", owner=ATTACKER)

    def act(self, obs, slot, rng, deterministic=False):
        actions, logp = self.actor.sample(np.atleast_2d(obs), rng, deterministic)
        return actions[:, 0], logp[:, 0]

    def probs(self, obs):
        return self.actor.probs(obs)

    def sample(self, obs, rng):
        return self.actor.sample(obs, rng)

    def parameters(self) -> ParameterSet:
        return ParameterSet.merge(self.actor.params, self.critic.params)

    def freeze(self) -> "AdversaryAgent":
        self.actor.freeze()
        self.critic.freeze()
        return self

    def checksum(self) -> str:
        return self.parameters().checksum()

    def save(self, path: str | Path) -> str:
        return save_checkpoint(path, self.parameters())

    @classmethod
    def load(cls, path: str | Path, spec: PosgSpec, train: TrainConfig) -> "AdversaryAgent":
        stored = load_checkpoint(path, owner=ATTACKER)
        agent = cls(spec, train, np.random.default_rng(0))
        for module in (agent.actor, agent.critic):
            assign_blocks(module, stored)
        return agent


@dataclass
class IterationMetrics:
    iteration: int
    env_steps: int
    adv_reward_mean: float
    adv_reward_ci95: float
    influence_mean: float
    nll_opp_model: float
    team_reward_mean: float
    wallclock_s: float = 0.0
    composition_error: float = 0.0
    distances_in_bounds: bool = True
    nonfinite_influence: int = 0
    ppo_skipped: int = 0

    def row(self) -> list:
        return [
            self.iteration,
            self.env_steps,
            self.adv_reward_mean,
            self.adv_reward_ci95,
            self.influence_mean,
            self.nll_opp_model,
            self.team_reward_mean,
        ]


@dataclass
class AttackResult:
    adversary: AdversaryAgent
    metrics: List[IterationMetrics]
    evaluation: Optional[EvaluationSummary] = None
    controls: Dict[str, EvaluationSummary] = field(default_factory=dict)
    checkpoints: Dict[str, str] = field(default_factory=dict)
    checkpoint_hashes: Dict[str, str] = field(default_factory=dict)
    metric_files: Dict[str, str] = field(default_factory=dict)
    aborted_iterations: List[int] = field(default_factory=list)
    audit_violations: int = 0


class AttackService:
    def __init__(
        self,
        env_config: EnvConfig,
        attack: AttackConfig,
        victims: VictimPolicySet,
        seed: int,
        events: Optional[ActivityService] = None,
        adversary_slot: Optional[int] = None,
        phase: int = 1,
    ):
        if not victims.frozen:
            raise IntegrityError("Victims must be frozen before an attack")
        self.env_config = env_config
        self.attack = attack
        self.train = attack.train
        self.victims = victims
        self.seed = seed
        self.events = events
        self.slot = attack.adversary_slot if adversary_slot is None else adversary_slot
        self.phase = phase
        self.envs = [make_env(env_config, adversary_slot=self.slot) for _ in range(self.train.parallel_envs)]
        self.spec = self.envs[0].spec
        self.space = self.spec.action_space
        self.method = attack.method
        self.metric = attack.metric
        self.ami_lambda = attack.effective_lambda
        self.adversary = AdversaryAgent(self.spec, self.train, rng_for(seed, "adversary", phase, self.slot))
        self.tao = TargetedAdversarialOracle(self.spec, self.train, rng_for(seed, "tao", phase, self.slot))
        self.opponent_model = OpponentModel(
            self.spec, self.train, rng_for(seed, "opponent_model", phase, self.slot), epochs=attack.opp_epochs
        )
        self.normalizer = RunningMeanStd()
        self.env_steps = 0
        self.last_buffer: Optional[RolloutBuffer] = None
        self.last_tao_batch: Optional[TaoBatch] = None
        self.step_log: Dict[str, Any] = {}

    # Snapshots

    def _modules(self):
        return [
            self.adversary.actor,
            self.adversary.critic,
            self.tao.policy,
            self.tao.critic,
            self.opponent_model.network,
        ]

    def snapshot(self) -> dict:
        return {
            "modules": [m.snapshot() for m in self._modules()],
            "normalizer": self.normalizer.state_dict(),
            "env_steps": self.env_steps,
        }

    def restore(self, snapshot: dict) -> None:
        for module, state in zip(self._modules(), snapshot["modules"]):
            module.restore(state)
        self.normalizer.load_state_dict(snapshot["normalizer"])
        self.env_steps = snapshot["env_steps"]

    # Influence

    def influence_pieces(self, buffer: RolloutBuffer, batch: TaoBatch, iteration: int) -> InfluencePieces:
        """Per-step influence ingredients from predicted next-action distributions only."""
        mask = buffer.mask
        shape = mask.shape
        states = buffer.states[mask]
        victim_actions = buffer.victim_actions()[mask]
        adv_actions = buffer.adversary_actions()[mask]
        adv_obs = buffer.observations[:, :, self.slot][mask]
        targets = batch.targets[mask]
        model = self.opponent_model

        if self.space.is_discrete:
            adv_probs = self.adversary.probs(adv_obs)[:, 0]
            expected = model.counterfactual_probs(states, victim_actions, adv_probs)
            actual = model.predict_probs(states, victim_actions, adv_actions)
            distances = discrete_distances(expected, targets[..., 0], self.metric)
            record = self.first_step_record(expected, targets)
            h_expected = entropy(expected)
            h_actual = entropy(actual)
            untargeted = -kl_to_uniform(expected).sum(axis=1)
        else:
            rng = rng_for(self.seed, "opponent_model", self.phase, self.slot, iteration, 1)
            n_samples = self.attack.counterfactual_samples
            samples = np.stack(
                [self.adversary.sample(adv_obs, rng)[0][:, 0] for _ in range(n_samples)], axis=1
            )
            means, log_std = model.counterfactual_mixture(states, victim_actions, samples)
            distances = mixture_distances(means, log_std, targets, self.metric)
            record = self.first_step_record(means, targets, log_std)
            var = np.exp(2.0 * log_std)[None, :, :] + (means**2).mean(axis=2) - means.mean(axis=2) ** 2
            h_expected = (0.5 * np.log(np.maximum(var, 1e-300)) + 0.5 * (1.0 + LOG_2PI)).sum(axis=-1)
            h_actual = np.broadcast_to((log_std + 0.5 * (1.0 + LOG_2PI)).sum(axis=-1), h_expected.shape)
            log_volume = self.space.dim * math.log(self.space.high - self.space.low)
            untargeted = (h_expected - log_volume).sum(axis=1)

        self._check_record(record, distances)
        self.step_log["distances"] = distances
        self.step_log["record"] = record
        pieces = InfluencePieces(
            distance_sum=_scatter(distances.sum(axis=1), mask),
            majority=_scatter(-h_actual.sum(axis=1), mask),
            untargeted=_scatter(untargeted, mask),
            mutual_information=_scatter((h_expected - h_actual).sum(axis=1), mask),
        )
        pieces.extras["shape"] = shape
        return pieces

    def first_step_record(
        self, expected: np.ndarray, targets: np.ndarray, log_std: Optional[np.ndarray] = None
    ) -> InfluenceRecord:
        """Influence of the first valid step recomputed per victim through the scalar distance path.

        `expected` is (B, N, A) probabilities for discrete spaces, or (B, N, M, D) mixture means with
        a shared `log_std` (N, D) for continuous ones.
        """
        n = self.spec.n_victims
        if self.space.is_discrete:
            dists = [Categorical(expected[0, i]) for i in range(n)]
            step_targets = [int(targets[0, i, 0]) for i in range(n)]
        else:
            weights = np.full(expected.shape[2], 1.0 / expected.shape[2])
            dists = [GaussianMixture(weights, expected[0, i], log_std[i]) for i in range(n)]
            step_targets = [targets[0, i] for i in range(n)]
        return ami_influence_reward(dists, step_targets, self.metric, n_victims=n)

    def _check_record(self, record: InfluenceRecord, distances: np.ndarray) -> None:
        batched = float(distances[0].sum())
        if not np.isfinite(batched):
            return
        if abs(record.total - batched) > 1e-9 * max(1.0, abs(batched)):
            raise IntegrityError(
                f"Batched influence {batched:.12g} disagrees with per-victim record {record.total:.12g}",
                context={"distances": record.distances},
            )

    def shaped_rewards(self, buffer: RolloutBuffer, pieces: InfluencePieces) -> tuple:
        """Return (r_AMI, influence used, non-finite count)."""
        mask = buffer.mask
        influence = np.zeros_like(buffer.adv_rewards)
        nonfinite = [0]

        def prepare(raw: np.ndarray) -> np.ndarray:
            bad = int((~np.isfinite(raw[mask])).sum())
            if bad:
                logger.warning("%d non-finite influence values replaced by %.1f", bad, LOG_FLOOR)
                raw = np.where(np.isfinite(raw), raw, LOG_FLOOR)
            nonfinite[0] = bad
            if self.attack.normalize_influence:
                self.normalizer.update(raw[mask])
                influence[mask] = self.normalizer.normalize(raw[mask])
            else:
                influence[mask] = raw[mask]
            return influence

        r_ami = variant_reward(self.method, buffer.adv_rewards, pieces, self.ami_lambda, transform=prepare)
        return r_ami * mask, influence, nonfinite[0]

    # Iteration

    def _log(self, event_type: str, iteration: int, description: str, **metadata) -> None:
        log_activity(self.events, event_type, description, {"iteration": iteration, **metadata})

    def ami_iteration(self, iteration: int) -> IterationMetrics:
        snapshot = self.snapshot()
        started = time.perf_counter()
        try:
            with principal(ATTACKER):
                metrics = self._iteration(iteration)
        except (NumericError, DivergenceError) as e:
            self.restore(snapshot)
            self._log("iteration_aborted", iteration, f"Iteration {iteration} rolled back: {e}")
            raise DivergenceError(
                f"Attack iteration {iteration} diverged and was rolled back: {e}",
                context={"iteration": iteration, **getattr(e, "context", {})},
            ) from e
        self.victims.verify_frozen()
        metrics.wallclock_s = time.perf_counter() - started
        return metrics

    def _iteration(self, iteration: int) -> IterationMetrics:
        train = self.train
        seeds = episode_seeds(self.seed, "env", len(self.envs), self.phase, self.slot, iteration)
        buffer = collect_rollouts(
            self.envs,
            seeds,
            self.victims,
            rng_for(self.seed, "rollout", self.phase, self.slot, iteration),
            adversary=self.adversary,
            adversary_slot=self.slot,
        )
        self.env_steps += buffer.n_valid
        self._log("rollout", iteration, "Collected trajectories", steps=buffer.n_valid)

        nll = self.opponent_model.fit(buffer, rng_for(self.seed, "opponent_model", self.phase, self.slot, iteration))
        self._log("opp_fit", iteration, "Fitted opponent model", nll=nll)

        mask = buffer.mask
        adv_rewards = buffer.adv_rewards
        features = self.tao.features(buffer.states, buffer.victim_actions(), buffer.adversary_actions())
        tao_rng = rng_for(self.seed, "tao", self.phase, self.slot, iteration)
        tao_batch = self.tao.propose(features, mask, tao_rng)
        tao_stats, _ = tao_update(self.tao, tao_batch, adv_rewards, buffer.dones, tao_rng)
        self._log(
            "tao_critic", iteration, "Updated TAO critic", reward_source="adv_rewards", value_loss=tao_stats.value_loss
        )
        self._log("tao_update", iteration, "Updated TAO policy", skipped=tao_stats.skipped)

        pieces = self.influence_pieces(buffer, tao_batch, iteration)
        r_ami, influence, bad = self.shaped_rewards(buffer, pieces)
        composition = float(np.max(np.abs(r_ami - adv_rewards - self.ami_lambda * influence)[mask], initial=0.0))
        if composition > 1e-9 * max(1.0, float(np.max(np.abs(adv_rewards), initial=0.0))):
            raise IntegrityError(f"Reward composition error {composition:.3g}")
        distances = self.step_log["distances"]
        in_bounds = within_bounds(distances[np.isfinite(distances)], self.metric, self.space.is_discrete)
        self._log("reward_mix", iteration, "Shaped adversary reward", nonfinite=bad, in_bounds=in_bounds)

        critic = self.adversary.critic
        values = critic.predict(buffer.states)
        next_values = critic.predict(buffer.next_states)
        advantages, returns = compute_gae(
            r_ami, values, buffer.dones, train.gamma, train.gae_lambda,
            truncated=buffer.truncated, next_values=next_values,
        )
        buffer.advantages, buffer.returns, buffer.values = advantages, returns, values
        buffer.check_finite()
        minibatch_rng = rng_for(self.seed, "minibatch", self.phase, self.slot, iteration)
        value_update(critic, buffer.flat(buffer.states), buffer.flat(returns), train, minibatch_rng)
        self._log("adversary_critic", iteration, "Updated adversary critic")

        batch = PPOBatch(
            buffer.flat(buffer.observations[:, :, self.slot]),
            buffer.flat(buffer.adversary_actions())[:, None, :],
            buffer.flat(buffer.adv_logp)[:, None],
            buffer.flat(advantages),
        )
        stats = ppo_update(self.adversary.actor, batch, train, minibatch_rng)
        self._log("adversary_update", iteration, "Updated adversary policy", skipped=stats.skipped)

        self.last_buffer, self.last_tao_batch = buffer, tao_batch
        adv_summary = summarize(buffer.episode_returns("adv"))
        return IterationMetrics(
            iteration=iteration,
            env_steps=self.env_steps,
            adv_reward_mean=adv_summary.mean,
            adv_reward_ci95=adv_summary.ci95,
            influence_mean=_finite_mean(pieces.distance_sum[mask]),
            nll_opp_model=nll,
            team_reward_mean=float(np.mean(buffer.episode_returns("team"))),
            composition_error=composition,
            distances_in_bounds=in_bounds,
            nonfinite_influence=bad,
            ppo_skipped=stats.skipped + tao_stats.skipped,
        )

    # Training loop

    def train_adversary(self, iterations: Optional[int] = None) -> AttackResult:
        """Run the attack iterations, skipping rolled-back ones and aborting after too many in a row."""
        iterations = iterations or self.attack.iterations
        violations_before = audit.violation_count
        result = AttackResult(adversary=self.adversary, metrics=[])
        consecutive = 0
        for it in range(iterations):
            try:
                metrics = self.ami_iteration(it)
            except DivergenceError as e:
                consecutive += 1
                result.aborted_iterations.append(it)
                logger.warning("%s (%d consecutive)", e, consecutive)
                if consecutive >= self.attack.max_consecutive_aborts:
                    raise DivergenceError(
                        f"Attack aborted after {consecutive} consecutive diverged iterations",
                        context={"iterations": result.aborted_iterations},
                    ) from e
                continue
            consecutive = 0
            result.metrics.append(metrics)
            if it % 10 == 0 or it == iterations - 1:
                logger.info(
                    "attack %s it=%d adv_reward=%.4f influence=%.4f nll=%.4f",
                    self.method.value, it, metrics.adv_reward_mean, metrics.influence_mean, metrics.nll_opp_model,
                )
        result.audit_violations = audit.violation_count - violations_before
        if result.audit_violations:
            raise IntegrityError(
                f"Attack code read victim parameters {result.audit_violations} times",
                context={"blocks": dict(audit.violations)},
            )
        if self.events is not None:
            self.events.assert_order(ALGORITHM_ORDER)
        return result

    def evaluate(self, episodes: Optional[int] = None, trajectory_path: Optional[Path] = None) -> EvaluationSummary:
        return evaluate_attack(
            self.env_config, self.victims, self.adversary, self.slot, episodes or self.train.eval_episodes, self.seed,
            trajectory_path=trajectory_path,
        )

    def controls(self, episodes: Optional[int] = None) -> Dict[str, EvaluationSummary]:
        return evaluate_controls(
            self.env_config, self.victims, self.slot, episodes or self.train.eval_episodes, self.seed, self.space
        )

    def save(self, out_dir: Path, prefix: str = "") -> Dict[str, str]:
        """Write adversary, TAO and opponent-model checkpoints; returns name -> path."""
        paths = {
            "adversary": out_dir / f"{prefix}adversary.ami",
            "tao": out_dir / f"{prefix}tao.ami",
            "opponent_model": out_dir / f"{prefix}opponent_model.ami",
        }
        self.adversary.save(paths["adversary"])
        save_checkpoint(paths["tao"], self.tao.parameters())
        save_checkpoint(paths["opponent_model"], self.opponent_model.params)
        return {k: str(v) for k, v in paths.items()}


def _finite_mean(values: np.ndarray) -> float:
    finite = values[np.isfinite(values)]
    return float(finite.mean()) if finite.size else float("nan")


def _scatter(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.zeros(mask.shape)
    out[mask] = values
    return out


def write_metrics(out_dir: Path, metrics: List[IterationMetrics], prefix: str = "") -> Dict[str, str]:
    metrics_path = write_rows(out_dir / f"{prefix}metrics.csv", [m.row() for m in metrics], METRICS_COLUMNS)
    timing_path = write_rows(
        out_dir / f"{prefix}timing.csv", [[m.iteration, m.wallclock_s] for m in metrics], TIMING_COLUMNS
    )
    return {"metrics": str(metrics_path), "timing": str(timing_path)}


def run_attack(
    env_config: EnvConfig,
    attack: AttackConfig,
    victims: VictimPolicySet,
    seed: int,
    out_dir: Optional[Path] = None,
    events: Optional[ActivityService] = None,
    adversary_slot: Optional[int] = None,
    prefix: str = "",
    with_controls: bool = True,
    phase: int = 1,
) -> AttackResult:
    """Train an adversary, evaluate it with the controls and persist metrics, checkpoints and targets."""
    service = AttackService(
        env_config, attack, victims, seed, events=events, adversary_slot=adversary_slot, phase=phase
    )
    result = service.train_adversary()
    service.adversary.freeze()
    trajectories = Path(out_dir) / f"{prefix}trajectories.csv" if out_dir is not None else None
    result.evaluation = service.evaluate(trajectory_path=trajectories)
    if with_controls:
        result.controls = service.controls()
    if out_dir is not None:
        out_dir = Path(out_dir)
        result.metric_files = write_metrics(out_dir, result.metrics, prefix)
        result.metric_files["trajectories"] = str(trajectories)
        result.checkpoints = service.save(out_dir, prefix)
        result.checkpoint_hashes = {name: file_hash(path) for name, path in result.checkpoints.items()}
        if service.last_tao_batch is not None:
            buffer = service.last_buffer
            result.metric_files["targets"] = str(
                export_target_transcript(
                    out_dir / f"{prefix}targets.csv",
                    service.tao,
                    service.last_tao_batch,
                    buffer.next_victim_actions(),
                    buffer.next_action_mask(),
                    columns=4,
                )
            )
    return result
