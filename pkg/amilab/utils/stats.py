import logging
import math
from typing import Sequence

import numpy as np
from scipy import stats

from ..exceptions import PairingError
from ..schemas.report import PairedTestResult, SummaryStats

logger = logging.getLogger(__name__)

EXACT_WILCOXON_MAX_N = 25


def summarize(values: Sequence[float], confidence: float = 0.95) -> SummaryStats:
    """Mean, sample std and Student-t confidence half-width."""
    x = np.asarray(values, dtype=np.float64)
    n = int(x.size)
    if n == 0:
        raise ValueError("Cannot summarize an empty sample")
    mean = float(x.mean())
    if n < 2:
        return SummaryStats(n=n, mean=mean, std=0.0, ci95=0.0, flags=["single_sample"])
    std = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, df=n - 1) * std / math.sqrt(n))
    flags = ["zero_variance"] if std == 0.0 else []
    return SummaryStats(n=n, mean=mean, std=std, ci95=half, flags=flags)


def paired_tests(
    rewards_a: Sequence[float],
    rewards_b: Sequence[float],
    alternative: str = "two-sided",
) -> PairedTestResult:
    """Paired-samples t-test and Wilcoxon signed-rank test on a - b."""
    a = np.asarray(rewards_a, dtype=np.float64)
    b = np.asarray(rewards_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise PairingError(f"Paired samples must be 1-D with equal length, got {a.shape} and {b.shape}")
    n = int(a.size)
    if n < 2:
        raise PairingError("Paired tests need at least two pairs")

    d = a - b
    flags: list[str] = []
    df = n - 1

    if np.all(d == 0.0):
        flags.append("identical")
        return PairedTestResult(
            n=n, t=None, df=df, p_t=1.0, w=0.0, p_w=1.0, alternative=alternative, flags=flags
        )

    mean_d = float(d.mean())
    if float(d.std(ddof=1)) == 0.0:
        flags.append("zero_variance")
        t_stat = math.copysign(math.inf, mean_d)
        if alternative == "two-sided":
            p_t = 0.0
        elif alternative == "greater":
            p_t = 0.0 if mean_d > 0 else 1.0
        else:
            p_t = 0.0 if mean_d < 0 else 1.0
    else:
        res = stats.ttest_rel(a, b, alternative=alternative)
        t_stat, p_t = float(res.statistic), float(res.pvalue)

    abs_d = np.abs(d)
    exact = n <= EXACT_WILCOXON_MAX_N and np.all(d != 0.0) and np.unique(abs_d).size == n
    if not exact:
        flags.append("wilcoxon_normal_approximation")
    w_res = stats.wilcoxon(a, b, alternative=alternative, method="exact" if exact else "approx")
    return PairedTestResult(
        n=n,
        t=t_stat,
        df=df,
        p_t=p_t,
        w=float(w_res.statistic),
        p_w=float(w_res.pvalue),
        alternative=alternative,
        flags=flags,
    )
