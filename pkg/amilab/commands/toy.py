import argparse
from pathlib import Path
from typing import List

from ..config import Settings
from ..influence.toy import export_toy_csv
from .common import out_root


def register(subparsers) -> None:
    parser = subparsers.add_parser("toy", help="Export the two-action influence decomposition curves")
    parser.add_argument("--out", type=Path, help="Output root (default: AMI_OUT or ./runs)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    return [export_toy_csv(out_root(args, settings) / "toy" / "toy_example.csv")]
