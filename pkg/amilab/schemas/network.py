from enum import Enum
from typing import List

from pydantic import BaseModel, ConfigDict, field_validator


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"


class MLPSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_dim: int
    hidden_dims: List[int]
    output_dim: int
    activation: Activation = Activation.RELU

    @field_validator("input_dim", "output_dim")
    @classmethod
    def validate_dim(cls, v):
        if v < 1:
            raise ValueError("Dimensions must be at least 1")
        return v

    @field_validator("hidden_dims")
    @classmethod
    def validate_hidden(cls, v):
        if not v:
            raise ValueError("hidden_dims must be non-empty")
        if any(d < 1 for d in v):
            raise ValueError("Hidden dimensions must be at least 1")
        return v

    @property
    def layer_dims(self) -> List[int]:
        return [self.input_dim, *self.hidden_dims, self.output_dim]

    @property
    def n_layers(self) -> int:
        return len(self.hidden_dims) + 1
