import argparse
import logging
from pathlib import Path
from typing import List

from ..config import Settings
from ..exceptions import ConfigurationError
from ..schemas.defense import DetectionSignal
from ..services.attack_service import AdversaryAgent
from ..services.detection_service import train_detector
from .common import add_common_options, env_spec, load_config, load_victims, out_root, recorder, seeds_for, victims_path

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("detect", help="Train a per-timestep attack detector")
    add_common_options(parser)
    parser.add_argument("--signal", choices=[s.value for s in DetectionSignal], help="Observable signal")
    parser.add_argument("--shuffle-labels", action="store_true", help="Label-shuffle control")
    parser.add_argument("--victims", help="Victim checkpoint; '{seed}' is substituted")
    parser.add_argument("--baseline-adversary", help="adv_policy adversary used for training data")
    parser.add_argument("--ami-adversary", help="AMI adversary used for held-out data")
    parser.set_defaults(handler=run)


def _checkpoint(given, default: Path, seed: int) -> Path:
    path = Path(given.replace("{seed}", str(seed))) if given else default
    if not path.exists():
        raise ConfigurationError(f"Adversary checkpoint not found: {path}")
    return path


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    extra = {}
    if args.signal:
        extra["detection.signal"] = args.signal
    if args.shuffle_labels:
        extra["detection.shuffle_labels"] = True
    config = load_config(args, extra)
    root = out_root(args, settings)
    spec = env_spec(config)
    run_dirs = []
    for seed in seeds_for(args, config):
        detection = config.detection
        label = detection.signal.value + ("_shuffled" if detection.shuffle_labels else "")
        run_dir = root / "detect" / label / f"seed{seed}"
        victims_file = victims_path(args, root, seed)
        baseline_file = _checkpoint(
            args.baseline_adversary, root / "attack" / "adv_policy" / f"seed{seed}" / "adversary.ami", seed
        )
        ami_file = _checkpoint(args.ami_adversary, root / "attack" / "ami" / f"seed{seed}" / "adversary.ami", seed)
        victims = load_victims(victims_file, config)
        baseline = AdversaryAgent.load(baseline_file, spec, config.attack.train).freeze()
        ami = AdversaryAgent.load(ami_file, spec, config.attack.train).freeze()
        rec = recorder(
            args, settings, "detect", label, config, seed, run_dir,
            inputs={
                "--victims": str(victims_file),
                "--baseline-adversary": str(baseline_file),
                "--ami-adversary": str(ami_file),
            },
        )
        try:
            result = train_detector(
                config.env, victims, baseline, ami, config.attack.adversary_slot, detection, seed, out_dir=run_dir
            )
        except Exception as e:
            rec.fail(e)
            raise
        rec.add_metric_files({k: v for k, v in result.paths.items() if v.endswith(".csv")})
        rec.extra["datasets"] = {k: v for k, v in result.paths.items() if v.endswith(".npz")}
        rec.extra["final_loss"] = result.losses[-1] if result.losses else None
        rec.extra["heldout_auc_final"] = float(result.heldout_curve["auc"].iloc[-1])
        rec.finish(env_spec=spec)
        run_dirs.append(run_dir)
    return run_dirs
