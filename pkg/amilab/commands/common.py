"""Options and helpers shared by the subcommands."""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..config import Settings
from ..envs.factory import make_env
from ..exceptions import ConfigurationError
from ..schemas.attack import CLI_METHODS, DistanceMetric
from ..schemas.env import PosgSpec
from ..schemas.experiment import ExperimentConfig, load_experiment
from ..services.run_service import RunRecorder
from ..services.victim_service import VictimPolicySet

logger = logging.getLogger(__name__)


def add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment JSON file")
    parser.add_argument("--out", type=Path, help="Output root (default: AMI_OUT or ./runs)")
    parser.add_argument("--seed", type=int, help="Master seed (default: config seed)")
    parser.add_argument("--seeds", help="Comma-separated master seeds; overrides --seed")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config key, e.g. attack.iterations=10 (JSON values accepted)")
    parser.add_argument("--no-registry", action="store_true", help="Do not record runs in the SQLite registry")


def add_attack_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=sorted(CLI_METHODS), help="Attack method")
    parser.add_argument("--lambda", dest="ami_lambda", type=float, help="Influence weight")
    parser.add_argument("--metric", choices=[m.value for m in DistanceMetric], help="Distance metric")


def parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"Override '{item}' must look like KEY=VALUE")
        key, value = item.split("=", 1)
        overrides[key.strip()] = parse_value(value)
    if getattr(args, "method", None):
        overrides["attack.method"] = CLI_METHODS[args.method].value
    if getattr(args, "ami_lambda", None) is not None:
        overrides["attack.ami_lambda"] = args.ami_lambda
    if getattr(args, "metric", None):
        overrides["attack.metric"] = args.metric
    return overrides


def load_config(args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    return load_experiment(args.config, {**overrides_from(args), **(extra or {})})


def seeds_for(args: argparse.Namespace, config: ExperimentConfig, default_all: bool = False) -> List[int]:
    if args.seeds:
        return [int(s) for s in args.seeds.split(",") if s.strip()]
    if args.seed is not None:
        return [args.seed]
    if default_all:
        return list(range(config.seed, config.seed + config.n_seeds))
    return [config.seed]


def out_root(args: argparse.Namespace, settings: Settings) -> Path:
    return Path(args.out) if args.out is not None else settings.out


def env_spec(config: ExperimentConfig) -> PosgSpec:
    return make_env(config.env).spec


def victims_path(args: argparse.Namespace, root: Path, seed: int) -> Path:
    given = getattr(args, "victims", None)
    if given:
        return Path(given.format(seed=seed)) if "{seed}" in given else Path(given)
    return root / "victims" / f"seed{seed}" / "victims.ami"


def load_victims(path: Path, config: ExperimentConfig) -> VictimPolicySet:
    if not path.exists():
        raise ConfigurationError(f"Victim checkpoint not found: {path} (run train-victims first or pass --victims)")
    victims = VictimPolicySet.load(path, env_spec(config), config.victims.train, config.victims.share_parameters)
    return victims.freeze()


def recorder(
    args: argparse.Namespace,
    settings: Settings,
    kind: str,
    label: str,
    config: ExperimentConfig,
    seed: int,
    run_dir: Path,
    inputs: Optional[Dict[str, str]] = None,
) -> RunRecorder:
    """Open a run; the manifest keeps the argv and absolute input paths so `replay` can re-execute it."""
    rec = RunRecorder(
        kind,
        label,
        config,
        seed,
        run_dir,
        cli={"command": args.command, "argv": list(getattr(args, "argv", []))},
        db_url=settings.database_url,
        registry=not args.no_registry,
    )
    rec.extra["inputs"] = {flag: str(Path(p).resolve()) for flag, p in (inputs or {}).items()}
    return rec
