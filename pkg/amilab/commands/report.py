import argparse
import logging
from pathlib import Path
from typing import List

from ..config import Settings
from ..services.report_service import emit_report
from ..services.run_service import MANIFEST_NAME
from .common import out_root

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="Aggregate runs into comparison tables and curves")
    parser.add_argument("runs", nargs="*", type=Path, help="Run directories or roots to search for manifests")
    parser.add_argument("--out", type=Path, help="Output root (default: AMI_OUT or ./runs)")
    parser.add_argument("--baseline", help="Label every method is paired against")
    parser.add_argument("--alternative", choices=["two-sided", "greater", "less"], default="two-sided")
    parser.set_defaults(handler=run)


def find_runs(paths: List[Path]) -> List[Path]:
    found = []
    for path in paths:
        if (path / MANIFEST_NAME).exists():
            found.append(path)
        else:
            found.extend(sorted(p.parent for p in path.rglob(MANIFEST_NAME)))
    return found


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    root = out_root(args, settings)
    runs = find_runs(args.runs or [root / "attack"])
    report_dir = root / "report"
    emit_report(runs, report_dir, baseline=args.baseline, alternative=args.alternative)
    logger.info("Report over %d runs written to %s", len(runs), report_dir)
    return [report_dir]
