import argparse
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Tuple

from ..config import Settings
from ..exceptions import ConfigurationError
from ..schemas.attack import DistanceMetric
from ..utils.logging_setup import configure_logging
from .attack import attack_run
from .common import add_attack_options, add_common_options, load_config, out_root, seeds_for, victims_path

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("ablate", help="Sweep the influence weight or the distance metric")
    add_common_options(parser)
    add_attack_options(parser)
    parser.add_argument("--lambda-sweep", help="Comma-separated influence weights, e.g. 0,0.01,0.1,1,10")
    parser.add_argument("--metric-sweep", help="Comma-separated distance metrics")
    parser.add_argument("--victims", help="Victim checkpoint; '{seed}' is substituted")
    parser.add_argument("--jobs", type=int, default=1, help="Parallel child runs")
    parser.set_defaults(handler=run)


def sweep_points(args: argparse.Namespace) -> List[Tuple[str, dict]]:
    """(label, config overrides) for every child of the sweep."""
    if bool(args.lambda_sweep) == bool(args.metric_sweep):
        raise ConfigurationError("Pass exactly one of --lambda-sweep or --metric-sweep")
    if args.lambda_sweep:
        values = [float(v) for v in args.lambda_sweep.split(",") if v.strip()]
        return [(f"lambda_{v:g}", {"attack.ami_lambda": v}) for v in values]
    metrics = [DistanceMetric(v.strip()) for v in args.metric_sweep.split(",") if v.strip()]
    return [(f"metric_{m.value}", {"attack.metric": m.value}) for m in metrics]


def _child(args, settings, overrides, seed, run_dir, label, victims_file) -> str:
    config = load_config(args, overrides)
    return str(attack_run(args, settings, config, seed, run_dir, label, victims_file))


def _init_worker(settings: Settings) -> None:
    configure_logging(settings)


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    points = sweep_points(args)
    base = load_config(args)
    root = out_root(args, settings)
    sweep = "lambda" if args.lambda_sweep else "metric"
    jobs = []
    for label, overrides in points:
        for seed in seeds_for(args, base, default_all=True):
            run_dir = root / "ablate" / sweep / label / f"seed{seed}"
            jobs.append((args, settings, overrides, seed, run_dir, label, victims_path(args, root, seed)))
    logger.info("Ablation over %d children (%d points)", len(jobs), len(points))
    if args.jobs <= 1:
        return [Path(_child(*job)) for job in jobs]
    with ProcessPoolExecutor(max_workers=args.jobs, initializer=_init_worker, initargs=(settings,)) as pool:
        futures = [pool.submit(_child, *job) for job in jobs]
        return [Path(f.result()) for f in futures]
