from typing import Dict, List, Optional

from pydantic import BaseModel


class SummaryStats(BaseModel):
    n: int
    mean: float
    std: float
    ci95: float
    flags: List[str] = []


class PairedTestResult(BaseModel):
    n: int
    t: Optional[float] = None
    df: int
    p_t: float
    w: float
    p_w: float
    alternative: str = "two-sided"
    flags: List[str] = []


class MethodSummary(BaseModel):
    label: str
    seeds: List[int]
    adv_reward: SummaryStats
    team_reward: Optional[SummaryStats] = None


class ComparisonEntry(BaseModel):
    label: str
    baseline: str
    test: PairedTestResult


class ComparisonReport(BaseModel):
    methods: Dict[str, MethodSummary]
    comparisons: List[ComparisonEntry] = []
