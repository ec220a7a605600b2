from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict


class EvaluationSummary(BaseModel):
    episodes: int
    adv_reward_mean: float
    adv_reward_std: float
    adv_reward_ci95: float
    team_reward_mean: float
    episode_adv_rewards: List[float] = []
    episode_team_rewards: List[float] = []
    flags: List[str] = []


class RunManifest(BaseModel):
    """Everything needed to replay a run and verify its artifacts."""

    model_config = ConfigDict(extra="forbid")

    run_id: str
    kind: str
    label: str
    config: Dict[str, Any]
    seed: int
    seeds: Dict[str, int] = {}
    cli: Dict[str, Any] = {}
    env_spec: Dict[str, Any] = {}
    checkpoints: Dict[str, str] = {}
    checkpoint_hashes: Dict[str, str] = {}
    metric_files: Dict[str, str] = {}
    evaluation: Optional[EvaluationSummary] = None
    controls: Dict[str, EvaluationSummary] = {}
    extra: Dict[str, Any] = {}
    started_at: datetime
    ended_at: Optional[datetime] = None
