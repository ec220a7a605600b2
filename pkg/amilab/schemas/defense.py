from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, field_validator


class DetectionSignal(str, Enum):
    OBS = "obs"
    STATE = "state"
    ACTION = "action"


class DualTrainingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mix: float = 0.5
    iterations: int = 100
    at_rounds: int = 1
    adversary_checkpoint: Optional[str] = None

    @field_validator("mix")
    @classmethod
    def validate_mix(cls, v):
        # 0 is accepted as the degenerate "plain victim training" case.
        if not 0.0 <= v < 1.0:
            raise ValueError("mix must be in [0, 1)")
        return v

    @field_validator("iterations", "at_rounds")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("Value must be at least 1")
        return v


class DetectorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    signal: DetectionSignal = DetectionSignal.OBS
    hidden_dim: int = 64
    lr: float = 1e-3
    epochs: int = 40
    batch_size: int = 20
    benign_episodes: int = 100
    attacked_episodes: int = 100
    heldout_episodes: int = 50
    shuffle_labels: bool = False

    @field_validator("hidden_dim", "epochs", "batch_size", "benign_episodes", "attacked_episodes", "heldout_episodes")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("Value must be at least 1")
        return v
