"""Run bookkeeping: registry rows, event logs and the manifest that makes a run replayable."""
import filecmp
import logging
import uuid
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from sqlalchemy.orm import Session

from ..database import session_factory
from ..exceptions import IntegrityError
from ..models.run import Run
from ..schemas.env import PosgSpec
from ..schemas.experiment import ExperimentConfig
from ..schemas.manifest import EvaluationSummary, RunManifest
from ..utils.hashing import file_hash
from ..utils.seeding import STREAMS
from .activity_service import ActivityService

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
# Wall-clock timings differ between executions of the same manifest.
UNREPRODUCIBLE_FILES = {"timing"}


class RunRecorder:
    """Opens a registry row for a run, collects its artifacts and writes the manifest on finish."""

    def __init__(
        self,
        kind: str,
        label: str,
        config: ExperimentConfig,
        seed: int,
        out_dir: Path,
        cli: Optional[Dict[str, Any]] = None,
        db_url: Optional[str] = None,
        registry: bool = True,
    ):
        self.kind = kind
        self.label = label
        self.config = config
        self.seed = seed
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.cli = dict(cli or {})
        self.run_id = f"{kind}-{label}-s{seed}-{uuid.uuid4().hex[:8]}"
        self.started_at = datetime.utcnow()
        self.checkpoints: Dict[str, str] = {}
        self.metric_files: Dict[str, str] = {}
        self.extra: Dict[str, Any] = {}
        self.db: Optional[Session] = session_factory(db_url)() if registry else None
        if self.db is not None:
            self.db.add(
                Run(run_id=self.run_id, kind=kind, label=label, seed=seed, out_dir=str(self.out_dir))
            )
            self.db.commit()
        self.events = ActivityService(self.run_id, self.db)

    def _relative(self, path: str | Path) -> str:
        path = Path(path)
        try:
            return path.resolve().relative_to(self.out_dir.resolve()).as_posix()
        except ValueError:
            return str(path)

    def add_checkpoints(self, paths: Dict[str, str]) -> None:
        self.checkpoints.update({k: self._relative(v) for k, v in paths.items()})

    def add_metric_files(self, paths: Dict[str, str]) -> None:
        self.metric_files.update({k: self._relative(v) for k, v in paths.items()})

    def finish(
        self,
        env_spec: Optional[PosgSpec] = None,
        evaluation: Optional[EvaluationSummary] = None,
        controls: Optional[Dict[str, EvaluationSummary]] = None,
    ) -> RunManifest:
        manifest = RunManifest(
            run_id=self.run_id,
            kind=self.kind,
            label=self.label,
            config=self.config.model_dump(mode="json"),
            seed=self.seed,
            seeds={"master": self.seed, **{f"stream:{k}": v for k, v in STREAMS.items()}},
            cli=self.cli,
            env_spec=env_spec.model_dump(mode="json") if env_spec is not None else {},
            checkpoints=self.checkpoints,
            checkpoint_hashes={k: file_hash(self.out_dir / v) for k, v in self.checkpoints.items()},
            metric_files=self.metric_files,
            evaluation=evaluation,
            controls=controls or {},
            extra=self.extra,
            started_at=self.started_at,
            ended_at=datetime.utcnow(),
        )
        path = write_manifest(self.out_dir, manifest)
        self._close("completed", path)
        logger.info("Run %s finished; manifest at %s", self.run_id, path)
        return manifest

    def fail(self, error: BaseException) -> None:
        self.events.log_activity("run_failed", str(error), {"error": type(error).__name__})
        self._close("failed", None)

    def _close(self, status: str, manifest_path: Optional[Path]) -> None:
        if self.db is None:
            return
        run = self.db.query(Run).filter(Run.run_id == self.run_id).first()
        if run:
            run.status = status
            run.ended_at = datetime.utcnow()
            run.manifest_path = str(manifest_path) if manifest_path else None
            self.db.commit()
        self.db.close()
        self.db = None


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return path


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))


def verify_manifest(run_dir: str | Path) -> RunManifest:
    """Every referenced artifact must exist and every checkpoint must match its recorded hash."""
    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    for name, rel in {**manifest.checkpoints, **manifest.metric_files}.items():
        if not (run_dir / rel).exists():
            raise IntegrityError(f"Artifact '{name}' missing: {run_dir / rel}")
    for name, rel in manifest.checkpoints.items():
        actual = file_hash(run_dir / rel)
        if actual != manifest.checkpoint_hashes.get(name):
            raise IntegrityError(
                f"Checkpoint '{name}' hash mismatch",
                context={"expected": manifest.checkpoint_hashes.get(name), "actual": actual},
            )
    return manifest


def compare_metric_files(run_a: str | Path, run_b: str | Path) -> List[str]:
    """Names of metric files that differ byte-wise between two runs of the same manifest."""
    a, b = load_manifest(run_a), load_manifest(run_b)
    mismatched = []
    for name, rel in a.metric_files.items():
        if name in UNREPRODUCIBLE_FILES:
            continue
        other = b.metric_files.get(name)
        if other is None or not filecmp.cmp(Path(run_a) / rel, Path(run_b) / other, shallow=False):
            mismatched.append(name)
    return mismatched


def list_runs(kind: Optional[str] = None, db_url: Optional[str] = None) -> List[Run]:
    db = session_factory(db_url)()
    try:
        query = db.query(Run)
        if kind:
            query = query.filter(Run.kind == kind)
        return query.order_by(Run.created_at.asc()).all()
    finally:
        db.close()
