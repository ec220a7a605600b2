"""Command-line entry point: `python -m amilab <command> ...`."""
import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from .commands import ablate, attack, defend, detect, replay, report, toy, train_victims
from .config import get_settings
from .exceptions import AmiLabError
from .utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)

COMMANDS = (train_victims, attack, defend, detect, ablate, report, replay, toy)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amilab", description="Adversarial minority influence laboratory")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    settings = get_settings()
    configure_logging(settings)
    try:
        outputs = args.handler(args, settings)
    except (AmiLabError, FileNotFoundError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 2
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
