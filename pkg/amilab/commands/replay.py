import argparse
import json
import logging
from pathlib import Path
from typing import List

from ..config import Settings
from ..exceptions import IntegrityError
from ..services.run_service import compare_metric_files, load_manifest, verify_manifest

logger = logging.getLogger(__name__)

# Options whose value is replaced by the manifest's config snapshot, seed or recorded inputs.
VALUED_OPTIONS = {
    "--out", "--config", "--seed", "--seeds", "--set", "--lambda-sweep", "--metric-sweep", "--jobs", "--label",
    "--victims", "--adversary", "--baseline-adversary", "--ami-adversary",
}


def register(subparsers) -> None:
    parser = subparsers.add_parser("replay", help="Re-execute a run from its manifest and compare metric files")
    parser.add_argument("manifest", type=Path, help="manifest.json or the run directory holding it")
    parser.add_argument("--out", type=Path, required=True, help="Output root for the replayed run")
    parser.add_argument("--no-registry", action="store_true")
    parser.set_defaults(handler=run)


def replay_argv(manifest, config_path: Path, out: Path) -> List[str]:
    recorded = list(manifest.cli.get("argv", []))
    command = manifest.cli.get("command", manifest.kind)
    kept, skip = [], False
    for token in recorded[1:]:
        if skip:
            skip = False
            continue
        name = token.split("=", 1)[0]
        if name in VALUED_OPTIONS:
            skip = "=" not in token
            continue
        kept.append(token)
    if command == "ablate":
        command = "attack"
    argv = [command, *kept, "--config", str(config_path), "--out", str(out), "--seed", str(manifest.seed)]
    if command == "attack":
        argv += ["--label", manifest.label]
    for flag, path in manifest.extra.get("inputs", {}).items():
        argv += [flag, path]
    return argv


def run(args: argparse.Namespace, settings: Settings) -> List[Path]:
    from ..main import build_parser  # main imports this module

    source = args.manifest.parent if args.manifest.name.endswith(".json") else args.manifest
    manifest = verify_manifest(source)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_path = out / f"replay_{manifest.run_id}.json"
    config_path.write_text(json.dumps(manifest.config, indent=2), encoding="utf-8")
    argv = replay_argv(manifest, config_path, out)
    if args.no_registry and "--no-registry" not in argv:
        argv.append("--no-registry")
    logger.info("Replaying %s: %s", manifest.run_id, " ".join(argv))
    child = build_parser().parse_args(argv)
    child.argv = argv
    run_dirs = child.handler(child, settings)
    for run_dir in run_dirs:
        if load_manifest(run_dir).seed != manifest.seed:
            continue
        mismatched = compare_metric_files(source, run_dir)
        if mismatched:
            raise IntegrityError(f"Replay differs in metric files: {', '.join(mismatched)}", context={"run": str(run_dir)})
        logger.info("Replay of %s reproduced every metric file", manifest.run_id)
    return run_dirs
