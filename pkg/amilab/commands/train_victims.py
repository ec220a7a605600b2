import argparse
import logging
from pathlib import Path
from typing import List

from ..config import Settings
from ..services.victim_service import train_victims
from .common import add_common_options, env_spec, load_config, out_root, recorder, seeds_for

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train-victims", help="Train cooperative victims with MAPPO and freeze them")
    add_common_options(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    config = load_config(args)
    root = out_root(args, settings)
    run_dirs = []
    for seed in seeds_for(args, config):
        run_dir = root / "victims" / f"seed{seed}"
        rec = recorder(args, settings, "train-victims", "victims", config, seed, run_dir)
        try:
            victims, results = train_victims(config.env, config.victims, seed, out_dir=run_dir, events=rec.events)
        except Exception as e:
            rec.fail(e)
            raise
        rec.add_checkpoints({"victims": str(run_dir / "victims.ami")})
        rec.add_metric_files({"learning_curve": str(run_dir / "learning_curve.csv")})
        rec.extra["final_team_reward"] = results[-1].reward_mean if results else None
        rec.finish(env_spec=env_spec(config))
        run_dirs.append(run_dir)
    return run_dirs
