import argparse
import logging
from pathlib import Path
from typing import List

from ..config import Settings
from ..schemas.experiment import ExperimentConfig
from ..services.attack_service import run_attack
from ..utils.audit import audit
from .common import (
    add_attack_options,
    add_common_options,
    env_spec,
    load_config,
    load_victims,
    out_root,
    recorder,
    seeds_for,
    victims_path,
)

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("attack", help="Train an adversary against frozen victims")
    add_common_options(parser)
    add_attack_options(parser)
    parser.add_argument("--victims", help="Victim checkpoint; '{seed}' is substituted (default: OUT/victims/seedN)")
    parser.add_argument("--label", help="Run label (default: method name)")
    parser.set_defaults(handler=run)


def attack_run(
    args: argparse.Namespace,
    settings: Settings,
    config: ExperimentConfig,
    seed: int,
    run_dir: Path,
    label: str,
    victims_file: Path,
) -> Path:
    """One seeded attack run with its manifest; shared by `attack` and `ablate`."""
    victims = load_victims(victims_file, config)
    rec = recorder(args, settings, "attack", label, config, seed, run_dir, inputs={"--victims": str(victims_file)})
    audit.reset()
    try:
        result = run_attack(config.env, config.attack, victims, seed, out_dir=run_dir, events=rec.events)
    except Exception as e:
        rec.fail(e)
        raise
    rec.add_checkpoints(result.checkpoints)
    rec.add_metric_files(result.metric_files)
    rec.extra.update(
        {
            "aborted_iterations": result.aborted_iterations,
            "audit_violations": result.audit_violations,
            "victims_checksum": victims.checksum(),
            "distances_in_bounds": all(m.distances_in_bounds for m in result.metrics),
            "nonfinite_influence": sum(m.nonfinite_influence for m in result.metrics),
        }
    )
    rec.finish(env_spec=env_spec(config), evaluation=result.evaluation, controls=result.controls)
    logger.info(
        "%s seed=%d eval adv_reward=%.4f (random %.4f, no-attack %.4f)",
        label, seed, result.evaluation.adv_reward_mean,
        result.controls["random_adversary"].adv_reward_mean, result.controls["no_attack"].adv_reward_mean,
    )
    return run_dir


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    config = load_config(args)
    root = out_root(args, settings)
    label = args.label or config.attack.method.value
    return [
        attack_run(
            args, settings, config, seed, root / "attack" / label / f"seed{seed}", label,
            victims_path(args, root, seed),
        )
        for seed in seeds_for(args, config)
    ]
