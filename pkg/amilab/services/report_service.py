"""Cross-run aggregation: per-method summaries, paired comparisons and learning curves with CIs."""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from ..exceptions import PairingError
from ..schemas.manifest import RunManifest
from ..schemas.report import ComparisonEntry, ComparisonReport, MethodSummary
from ..utils.csv_writer import read_rows, write_frame
from ..utils.stats import paired_tests, summarize
from .run_service import load_manifest

logger = logging.getLogger(__name__)

CURVE_METRIC = "adv_reward_mean"


def curve_with_ci(frames: Sequence[pd.DataFrame], column: str = CURVE_METRIC, x: str = "iter") -> pd.DataFrame:
    """Mean and 95% t-interval across seeds at each x; iterations missing from a seed are dropped."""
    long = pd.concat([f[[x, column]].assign(run=i) for i, f in enumerate(frames)], ignore_index=True)
    grouped = long.groupby(x)[column]
    out = grouped.agg(["mean", "std", "count"]).reset_index()
    out["std"] = out["std"].fillna(0.0)
    dof = (out["count"] - 1).clip(lower=1)
    half = stats.t.ppf(0.975, dof) * out["std"] / np.sqrt(out["count"])
    out["ci95"] = np.where(out["count"] > 1, half, 0.0)
    out["lower"] = out["mean"] - out["ci95"]
    out["upper"] = out["mean"] + out["ci95"]
    return out.rename(columns={"count": "n_seeds"})


def _load(run_dirs: Sequence[Path]) -> Dict[str, Dict[int, tuple]]:
    by_label: Dict[str, Dict[int, tuple]] = {}
    for run_dir in run_dirs:
        manifest = load_manifest(run_dir)
        if manifest.evaluation is None:
            logger.warning("Run %s has no evaluation; skipped", run_dir)
            continue
        seeds = by_label.setdefault(manifest.label, {})
        if manifest.seed in seeds:
            raise PairingError(f"Duplicate seed {manifest.seed} for '{manifest.label}'")
        seeds[manifest.seed] = (Path(run_dir), manifest)
    return by_label


def summarize_methods(by_label: Dict[str, Dict[int, tuple]]) -> Dict[str, MethodSummary]:
    summaries = {}
    for label, runs in sorted(by_label.items()):
        seeds = sorted(runs)
        manifests: List[RunManifest] = [runs[s][1] for s in seeds]
        adv = summarize([m.evaluation.adv_reward_mean for m in manifests])
        team = summarize([m.evaluation.team_reward_mean for m in manifests])
        summaries[label] = MethodSummary(label=label, seeds=seeds, adv_reward=adv, team_reward=team)
    return summaries


def compare_methods(
    by_label: Dict[str, Dict[int, tuple]], baseline: str, alternative: str = "two-sided"
) -> List[ComparisonEntry]:
    """Paired tests of every method against `baseline` on per-seed evaluation rewards."""
    if baseline not in by_label:
        raise PairingError(f"Baseline '{baseline}' not among runs: {sorted(by_label)}")
    base_seeds = sorted(by_label[baseline])
    entries = []
    for label, runs in sorted(by_label.items()):
        if label == baseline:
            continue
        if sorted(runs) != base_seeds:
            raise PairingError(
                f"Seed sets differ between '{label}' {sorted(runs)} and '{baseline}' {base_seeds}"
            )
        a = [runs[s][1].evaluation.adv_reward_mean for s in base_seeds]
        b = [by_label[baseline][s][1].evaluation.adv_reward_mean for s in base_seeds]
        entries.append(ComparisonEntry(label=label, baseline=baseline, test=paired_tests(a, b, alternative)))
    return entries


def _fmt(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.4g}"


def markdown_table(report: ComparisonReport) -> str:
    lines = [
        "| method | seeds | adv reward mean | std | CI95 | team reward mean | flags |",
        "|---|---|---|---|---|---|---|",
    ]
    for label, m in report.methods.items():
        flags = ",".join(m.adv_reward.flags) or "-"
        team = m.team_reward.mean if m.team_reward else None
        lines.append(
            f"| {label} | {len(m.seeds)} | {_fmt(m.adv_reward.mean)} | {_fmt(m.adv_reward.std)} "
            f"| {_fmt(m.adv_reward.ci95)} | {_fmt(team)} | {flags} |"
        )
    if report.comparisons:
        lines += ["", "| method | baseline | n | t | df | p (t) | W | p (W) | flags |", "|---|---|---|---|---|---|---|---|---|"]
        for c in report.comparisons:
            t = c.test
            lines.append(
                f"| {c.label} | {c.baseline} | {t.n} | {_fmt(t.t)} | {t.df} | {_fmt(t.p_t)} "
                f"| {_fmt(t.w)} | {_fmt(t.p_w)} | {','.join(t.flags) or '-'} |"
            )
    return "\n".join(lines) + "\n"


def emit_report(
    run_dirs: Sequence[str | Path],
    out_dir: str | Path,
    baseline: Optional[str] = None,
    alternative: str = "two-sided",
) -> ComparisonReport:
    """Write summary.csv, report.md, report.json and one curve_<label>.csv per method."""
    out_dir = Path(out_dir)
    by_label = _load([Path(d) for d in run_dirs])
    if not by_label:
        raise PairingError("No evaluated runs to report on")
    methods = summarize_methods(by_label)
    comparisons = compare_methods(by_label, baseline, alternative) if baseline else []
    report = ComparisonReport(methods=methods, comparisons=comparisons)

    summary = pd.DataFrame(
        [
            {
                "method": label,
                "n_seeds": len(m.seeds),
                "adv_reward_mean": m.adv_reward.mean,
                "adv_reward_std": m.adv_reward.std,
                "adv_reward_ci95": m.adv_reward.ci95,
                "team_reward_mean": m.team_reward.mean if m.team_reward else float("nan"),
                "flags": ",".join(m.adv_reward.flags),
            }
            for label, m in methods.items()
        ]
    )
    write_frame(out_dir / "summary.csv", summary)

    for label, runs in by_label.items():
        frames = []
        for seed in sorted(runs):
            run_dir, manifest = runs[seed]
            rel = manifest.metric_files.get("metrics")
            if rel and (run_dir / rel).exists():
                frames.append(read_rows(run_dir / rel))
        if frames:
            write_frame(out_dir / f"curve_{label}.csv", curve_with_ci(frames))

    (out_dir / "report.md").write_text(markdown_table(report), encoding="utf-8")
    (out_dir / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    logger.info("Report over %d methods written to %s", len(methods), out_dir)
    return report
