from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class ActionSpaceKind(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class ActionSpace(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ActionSpaceKind
    n: Optional[int] = None
    dim: Optional[int] = None
    low: Optional[float] = None
    high: Optional[float] = None

    @model_validator(mode="after")
    def validate_kind(self) -> "ActionSpace":
        if self.kind == ActionSpaceKind.DISCRETE and (self.n is None or self.n < 1):
            raise ValueError("Discrete action spaces need n >= 1")
        if self.kind == ActionSpaceKind.CONTINUOUS:
            if self.dim is None or self.dim < 1 or self.low is None or self.high is None:
                raise ValueError("Continuous action spaces need dim, low and high")
            if self.low >= self.high:
                raise ValueError("Box low must be below high")
        return self

    @property
    def is_discrete(self) -> bool:
        return self.kind == ActionSpaceKind.DISCRETE

    @property
    def encoded_dim(self) -> int:
        """Width of the action encoding (one-hot or raw vector)."""
        return self.n if self.is_discrete else self.dim

    @property
    def head_width(self) -> int:
        return self.n if self.is_discrete else self.dim


class PosgSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_victims: int
    n_adversaries: Literal[1] = 1
    state_dim: int
    obs_dim: int
    action_space: ActionSpace
    max_episode_len: int
    gamma: float = 0.99

    @field_validator("max_episode_len")
    @classmethod
    def validate_horizon(cls, v):
        if v < 1:
            raise ValueError("max_episode_len must be at least 1")
        return v

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v):
        if not 0.0 < v <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        return v

    @property
    def n_agents(self) -> int:
        return self.n_victims + self.n_adversaries


class RendezvousConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_agents: int = 5
    arena_size: float = 2.0
    wheel_radius: float = 0.02
    axle_length: float = 0.05
    dt: float = 0.1
    max_wheel_speed: float = 6.0
    max_episode_len: int = 200
    control_penalty: float = 0.001

    @field_validator("n_agents")
    @classmethod
    def validate_agents(cls, v):
        if v < 2:
            raise ValueError("Rendezvous needs at least two robots")
        return v


class GatherGridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid_size: int = 7
    n_agents: int = 5
    max_episode_len: int = 50
    walls: List[Tuple[int, int]] = []

    @model_validator(mode="after")
    def validate_grid(self) -> "GatherGridConfig":
        if self.n_agents < 2:
            raise ValueError("GatherGrid needs at least two agents")
        free = self.grid_size * self.grid_size - len(set(self.walls))
        if free < 1:
            raise ValueError("GatherGrid has no free cells")
        for r, c in self.walls:
            if not (0 <= r < self.grid_size and 0 <= c < self.grid_size):
                raise ValueError(f"Wall cell {(r, c)} lies outside the grid")
        return self


class EnvConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Literal["rendezvous", "gathergrid"] = "gathergrid"
    gamma: float = 0.99
    rendezvous: RendezvousConfig = RendezvousConfig()
    gathergrid: GatherGridConfig = GatherGridConfig()

    @property
    def is_discrete(self) -> bool:
        return self.name == "gathergrid"

    @property
    def n_agents(self) -> int:
        return self.gathergrid.n_agents if self.name == "gathergrid" else self.rendezvous.n_agents

    @property
    def max_episode_len(self) -> int:
        if self.name == "gathergrid":
            return self.gathergrid.max_episode_len
        return self.rendezvous.max_episode_len
