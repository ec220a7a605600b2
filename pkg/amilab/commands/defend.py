import argparse
import logging
from pathlib import Path
from typing import List

from ..config import Settings
from ..exceptions import ConfigurationError
from ..services.attack_service import AdversaryAgent
from ..services.defense_service import dual_adversarial_train, rerun_attack_protocols
from ..services.evaluation_service import evaluate_attack
from .common import add_common_options, env_spec, load_config, load_victims, out_root, recorder, seeds_for

logger = logging.getLogger(__name__)

MODES = {"at": None, "re-ami": "re_ami", "pos-ami": "pos_ami"}


def register(subparsers) -> None:
    parser = subparsers.add_parser("defend", help="Dual adversarial training and re-attack protocols")
    add_common_options(parser)
    parser.add_argument("--mode", choices=sorted(MODES), default="at")
    parser.add_argument("--victims", help="Victim checkpoint; '{seed}' is substituted")
    parser.add_argument("--adversary", help="Frozen adversary checkpoint for --mode at; '{seed}' is substituted")
    parser.set_defaults(handler=run)


def _resolve(given, default: Path, seed: int) -> Path:
    if given:
        return Path(given.replace("{seed}", str(seed)))
    return default


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    config = load_config(args)
    root = out_root(args, settings)
    spec = env_spec(config)
    slot = config.attack.adversary_slot
    run_dirs = []
    for seed in seeds_for(args, config):
        run_dir = root / "defend" / args.mode / f"seed{seed}"
        if args.mode == "at":
            victims_file = _resolve(args.victims, root / "victims" / f"seed{seed}" / "victims.ami", seed)
            adversary_file = _resolve(
                args.adversary or config.defense.adversary_checkpoint,
                root / "attack" / "ami" / f"seed{seed}" / "adversary.ami",
                seed,
            )
            if not adversary_file.exists():
                raise ConfigurationError(f"Adversary checkpoint not found: {adversary_file}")
            victims = load_victims(victims_file, config)
            adversary = AdversaryAgent.load(adversary_file, spec, config.attack.train).freeze()
            rec = recorder(
                args, settings, "defend", "at", config, seed, run_dir,
                inputs={"--victims": str(victims_file), "--adversary": str(adversary_file)},
            )
            try:
                result = dual_adversarial_train(
                    config.env, config.victims, config.defense, adversary, seed,
                    victims=victims, adversary_slot=slot, attack=config.attack,
                    out_dir=run_dir, events=rec.events,
                )
            except Exception as e:
                rec.fail(e)
                raise
            episodes = config.attack.train.eval_episodes
            hardened = result.victims
            evaluation = evaluate_attack(config.env, hardened, adversary, slot, episodes, seed)
            controls = {
                "pre_at_attack": evaluate_attack(config.env, victims, adversary, slot, episodes, seed),
                "no_attack": evaluate_attack(config.env, hardened, None, slot, episodes, seed),
                "pre_at_no_attack": evaluate_attack(config.env, victims, None, slot, episodes, seed),
            }
            rec.add_checkpoints({"hardened_victims": str(run_dir / "hardened_victims.ami")})
            rec.add_metric_files({"dual_learning_curve": str(run_dir / "dual_learning_curve.csv")})
            rec.extra["presence_rate"] = result.presence_rate
            rec.extra["adversary_checksums"] = result.adversary_checksums
            rec.finish(env_spec=spec, evaluation=evaluation, controls=controls)
            logger.info(
                "AT seed=%d adversary reward %.4f -> %.4f",
                seed, controls["pre_at_attack"].adv_reward_mean, evaluation.adv_reward_mean,
            )
        else:
            victims_file = _resolve(
                args.victims, root / "defend" / "at" / f"seed{seed}" / "hardened_victims.ami", seed
            )
            victims = load_victims(victims_file, config)
            rec = recorder(
                args, settings, "defend", args.mode, config, seed, run_dir, inputs={"--victims": str(victims_file)}
            )
            try:
                frame = rerun_attack_protocols(
                    config.env, config.attack, {seed: victims}, protocols=(MODES[args.mode],),
                    out_dir=run_dir, events=rec.events,
                )
            except Exception as e:
                rec.fail(e)
                raise
            rec.add_metric_files({"protocols": str(run_dir / "protocols.csv")})
            rec.extra["rows"] = frame.to_dict(orient="records")
            rec.finish(env_spec=spec)
        run_dirs.append(run_dir)
    return run_dirs
