import json
from datetime import datetime

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from amilab.exceptions import PairingError
from amilab.schemas.manifest import EvaluationSummary, RunManifest
from amilab.services.report_service import _load, compare_methods, curve_with_ci, emit_report
from amilab.services.run_service import write_manifest
from amilab.utils.csv_writer import write_frame


def make_run(root, label, seed, adv_reward, curve=(0.0, 1.0)):
    run_dir = root / label / f"seed{seed}"
    run_dir.mkdir(parents=True)
    write_frame(run_dir / "metrics.csv", pd.DataFrame({"iter": range(len(curve)), "adv_reward_mean": curve}))
    manifest = RunManifest(
        run_id=f"attack-{label}-s{seed}",
        kind="attack",
        label=label,
        config={},
        seed=seed,
        metric_files={"metrics": "metrics.csv"},
        evaluation=EvaluationSummary(
            episodes=2, adv_reward_mean=adv_reward, adv_reward_std=0.0, adv_reward_ci95=0.0, team_reward_mean=-1.0
        ),
        started_at=datetime(2024, 1, 1),
    )
    write_manifest(run_dir, manifest)
    return run_dir


class TestCurves:
    def test_interval_matches_student_t(self):
        frames = [
            pd.DataFrame({"iter": [0, 1], "adv_reward_mean": [1.0, 2.0]}),
            pd.DataFrame({"iter": [0, 1], "adv_reward_mean": [3.0, 6.0]}),
            pd.DataFrame({"iter": [0], "adv_reward_mean": [5.0]}),
        ]
        curve = curve_with_ci(frames)
        assert list(curve["n_seeds"]) == [3, 2]
        first = curve.iloc[0]
        assert first["mean"] == pytest.approx(3.0)
        assert first["ci95"] == pytest.approx(stats.t.ppf(0.975, 2) * 2.0 / np.sqrt(3))
        assert first["lower"] == pytest.approx(3.0 - first["ci95"])

    def test_single_seed_has_zero_width(self):
        curve = curve_with_ci([pd.DataFrame({"iter": [0, 1], "adv_reward_mean": [1.0, 2.0]})])
        assert list(curve["ci95"]) == [0.0, 0.0]


class TestComparisons:
    def test_seed_sets_must_match(self, tmp_path):
        dirs = [make_run(tmp_path, "ami", s, 1.0 + s) for s in (0, 1)]
        dirs += [make_run(tmp_path, "adv_policy", s, 0.5) for s in (0, 2)]
        with pytest.raises(PairingError):
            compare_methods(_load(dirs), baseline="adv_policy")

    def test_duplicate_seed_rejected(self, tmp_path):
        a = make_run(tmp_path / "a", "ami", 0, 1.0)
        b = make_run(tmp_path / "b", "ami", 0, 2.0)
        with pytest.raises(PairingError):
            _load([a, b])

    def test_missing_baseline(self, tmp_path):
        dirs = [make_run(tmp_path, "ami", 0, 1.0)]
        with pytest.raises(PairingError):
            compare_methods(_load(dirs), baseline="adv_policy")


class TestEmitReport:
    def test_writes_summary_tables_and_curves(self, tmp_path):
        runs = tmp_path / "runs"
        dirs = [make_run(runs, "ami", s, 2.0 + 0.1 * s * s) for s in range(3)]
        dirs += [make_run(runs, "adv_policy", s, 1.0 + 0.2 * s) for s in range(3)]
        out = tmp_path / "report"
        report = emit_report(dirs, out, baseline="adv_policy")

        summary = pd.read_csv(out / "summary.csv")
        assert sorted(summary["method"]) == ["adv_policy", "ami"]
        assert list(summary["n_seeds"]) == [3, 3]
        assert (out / "curve_ami.csv").exists()
        assert "| ami | adv_policy | 3 |" in (out / "report.md").read_text()
        assert json.loads((out / "report.json").read_text())["comparisons"][0]["label"] == "ami"
        assert report.methods["ami"].seeds == [0, 1, 2]
        assert report.comparisons[0].test.n == 3

    def test_no_evaluated_runs(self, tmp_path):
        with pytest.raises(PairingError):
            emit_report([], tmp_path / "report")
