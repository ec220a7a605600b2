"""Dual adversarial training of victims and the re-attack / position-shift protocols."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..exceptions import IntegrityError
from ..schemas.attack import AttackConfig
from ..schemas.defense import DualTrainingConfig
from ..schemas.env import EnvConfig
from ..schemas.experiment import VictimTrainingConfig
from ..utils.activity_logger import log_activity
from ..utils.csv_writer import write_frame
from ..utils.seeding import rng_for
from .activity_service import ActivityService
from .attack_service import AdversaryAgent, run_attack
from .victim_service import VictimIterationResult, VictimPolicySet, VictimTrainer, write_learning_curve

logger = logging.getLogger(__name__)

# Seed phases. Round 0 of dual training shares phase 0 with plain victim training.
REFINE_ATTACK_PHASE = 200
REFINE_DUAL_PHASE = 100
RERUN_PHASE = 3

PROTOCOL_COLUMNS = ["protocol", "slot", "seed", "adv_reward_mean", "adv_reward_ci95", "team_reward_mean"]


@dataclass
class DualTrainingResult:
    victims: VictimPolicySet
    curve: List[VictimIterationResult] = field(default_factory=list)
    presence_rate: float = 0.0
    adversary_checksums: List[str] = field(default_factory=list)


def _dual_rounds(
    env_config: EnvConfig,
    victim_config: VictimTrainingConfig,
    dual: DualTrainingConfig,
    adversary: AdversaryAgent,
    slot: int,
    seed: int,
    trainer: VictimTrainer,
    round_idx: int,
    events: Optional[ActivityService],
    result: DualTrainingResult,
) -> None:
    checksum = adversary.checksum()
    k = len(trainer.envs)
    presence = []
    for it in range(dual.iterations):
        present = rng_for(seed, "dual_mix", round_idx, it).random(k) < dual.mix
        presence.append(present.mean())
        step = trainer.iteration(it, adversary=adversary, adversary_slot=slot, present=present)
        result.curve.append(step)
        if adversary.checksum() != checksum:
            raise IntegrityError("Frozen adversary parameters changed during dual training")
        if it % 10 == 0 or it == dual.iterations - 1:
            logger.info(
                "dual round=%d it=%d present=%d/%d team_reward=%.4f",
                round_idx, it, int(present.sum()), k, step.reward_mean,
            )
    result.presence_rate = float(np.mean(presence)) if presence else 0.0
    result.adversary_checksums.append(checksum)
    log_activity(
        events,
        "dual_round",
        f"Dual training round {round_idx} finished",
        {"round": round_idx, "presence_rate": result.presence_rate, "adversary_checksum": checksum},
    )


def dual_adversarial_train(
    env_config: EnvConfig,
    victim_config: VictimTrainingConfig,
    dual: DualTrainingConfig,
    adversary: AdversaryAgent,
    seed: int,
    victims: Optional[VictimPolicySet] = None,
    adversary_slot: int = 0,
    attack: Optional[AttackConfig] = None,
    out_dir: Optional[Path] = None,
    events: Optional[ActivityService] = None,
) -> DualTrainingResult:
    """Harden victims by PPO training where each episode hosts the frozen adversary with probability `mix`.

    Training starts from an unfrozen copy of `victims`, or from a fresh initialisation when
    `victims` is None. Rounds after the first train a fresh adversary with `attack` against the
    current victims and repeat dual training against it.
    """
    if not adversary.actor.params.frozen:
        raise IntegrityError("Dual training needs a frozen adversary")
    if dual.at_rounds > 1 and attack is None:
        raise ValueError("at_rounds > 1 needs an attack config to train refinement adversaries")
    config = victim_config.model_copy(update={"iterations": dual.iterations})
    start = victims.copy() if victims is not None else None
    trainer = VictimTrainer(env_config, config, seed, victims=start, events=events, phase=0)
    result = DualTrainingResult(victims=trainer.victims)
    _dual_rounds(env_config, config, dual, adversary, adversary_slot, seed, trainer, 0, events, result)

    for round_idx in range(1, dual.at_rounds):
        snapshot = trainer.victims.copy().freeze()
        refined = run_attack(
            env_config, attack, snapshot, seed,
            adversary_slot=adversary_slot, with_controls=False, phase=REFINE_ATTACK_PHASE + round_idx,
        )
        adversary = refined.adversary
        trainer = VictimTrainer(
            env_config, config, seed, victims=trainer.victims, events=events, phase=REFINE_DUAL_PHASE + round_idx
        )
        _dual_rounds(env_config, config, dual, adversary, adversary_slot, seed, trainer, round_idx, events, result)

    result.victims = trainer.victims
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_learning_curve(out_dir / "dual_learning_curve.csv", result.curve)
        result.victims.save(out_dir / "hardened_victims.ami")
    result.victims.freeze()
    log_activity(events, "victims_hardened", "Hardened victims frozen", {"checksum": result.victims.checksum()})
    return result


def protocol_slots(protocol: str, n_agents: int, original_slot: int) -> List[int]:
    """re_ami keeps the original slot; pos_ami covers every other slot exactly once."""
    if protocol == "re_ami":
        return [original_slot]
    if protocol == "pos_ami":
        return [s for s in range(n_agents) if s != original_slot]
    raise ValueError(f"Unknown protocol '{protocol}'. Valid protocols: pos_ami, re_ami")


def rerun_attack_protocols(
    env_config: EnvConfig,
    attack: AttackConfig,
    victims_by_seed: Dict[int, VictimPolicySet],
    protocols: Sequence[str] = ("re_ami", "pos_ami"),
    out_dir: Optional[Path] = None,
    events: Optional[ActivityService] = None,
) -> pd.DataFrame:
    """Train fresh adversaries against frozen (hardened) victims; one row per (protocol, slot, seed)."""
    rows = []
    for seed, victims in sorted(victims_by_seed.items()):
        if not victims.frozen:
            raise IntegrityError(f"Victims for seed {seed} must be frozen")
        for protocol in protocols:
            for slot in protocol_slots(protocol, env_config.n_agents, attack.adversary_slot):
                child_dir = Path(out_dir) / f"{protocol}_slot{slot}_seed{seed}" if out_dir is not None else None
                result = run_attack(
                    env_config, attack, victims, seed,
                    out_dir=child_dir, events=events, adversary_slot=slot,
                    with_controls=False, phase=RERUN_PHASE,
                )
                evaluation = result.evaluation
                rows.append(
                    {
                        "protocol": protocol,
                        "slot": slot,
                        "seed": seed,
                        "adv_reward_mean": evaluation.adv_reward_mean,
                        "adv_reward_ci95": evaluation.adv_reward_ci95,
                        "team_reward_mean": evaluation.team_reward_mean,
                    }
                )
                logger.info(
                    "%s slot=%d seed=%d adv_reward=%.4f", protocol, slot, seed, evaluation.adv_reward_mean
                )
    frame = pd.DataFrame(rows, columns=PROTOCOL_COLUMNS)
    if out_dir is not None:
        write_frame(Path(out_dir) / "protocols.csv", frame)
    return frame
