import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, field_validator

from .network import Activation


class TrainConfig(BaseModel):
    """PPO/GAE hyperparameters. Defaults are the shared discrete-control table values.

    Learning rates written "=lr" in the tables are `None` here and resolve to `lr`.
    """

    model_config = ConfigDict(extra="forbid")

    lr: float = 1e-4
    actor_lr: Optional[float] = None
    critic_lr: Optional[float] = None
    parallel_envs: int = 32
    gamma: float = 0.99
    gae_lambda: float = 0.95
    ppo_clip: float = 0.2
    ppo_epochs: int = 4
    minibatch_num: int = 1
    entropy_coef: float = 0.01
    max_grad_norm: float = 10.0
    hidden_dim: int = 64
    hidden_layers: int = 1
    activation: Activation = Activation.RELU
    optimizer: Literal["adam"] = "adam"
    gain: float = 0.01
    std_y_coef: float = 0.5
    std_x_coef: float = 1.0
    huber_loss: bool = False
    huber_delta: float = 10.0
    eval_episodes: int = 20
    opp_lr: Optional[float] = None
    tao_lr: Optional[float] = None
    tao_critic_lr: Optional[float] = None

    @field_validator("ppo_clip")
    @classmethod
    def validate_clip(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("ppo_clip must be in (0, 1)")
        return v

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v):
        if not 0.0 < v <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        return v

    @field_validator("parallel_envs", "ppo_epochs", "minibatch_num", "hidden_dim", "hidden_layers", "eval_episodes")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("Value must be at least 1")
        return v

    @property
    def resolved_actor_lr(self) -> float:
        return self.lr if self.actor_lr is None else self.actor_lr

    @property
    def resolved_critic_lr(self) -> float:
        return self.lr if self.critic_lr is None else self.critic_lr

    @property
    def resolved_opp_lr(self) -> float:
        return self.lr if self.opp_lr is None else self.opp_lr

    @property
    def resolved_tao_lr(self) -> float:
        return self.lr if self.tao_lr is None else self.tao_lr

    @property
    def resolved_tao_critic_lr(self) -> float:
        return self.lr if self.tao_critic_lr is None else self.tao_critic_lr

    @property
    def hidden_dims(self) -> list[int]:
        return [self.hidden_dim] * self.hidden_layers

    @property
    def huber(self) -> Optional[float]:
        return self.huber_delta if self.huber_loss else None

    @property
    def initial_log_std(self) -> float:
        return self.std_x_coef * math.log(self.std_y_coef)


DISCRETE_PRESET = TrainConfig().model_dump()

# Continuous-control settings used for rendezvous.
CONTINUOUS_PRESET = {
    **DISCRETE_PRESET,
    "lr": 5e-5,
    "actor_lr": 5e-5,
    "critic_lr": 5e-3,
    "minibatch_num": 40,
    "ppo_epochs": 5,
    "huber_loss": True,
    "eval_episodes": 32,
}


def preset_for(discrete: bool) -> dict:
    return dict(DISCRETE_PRESET if discrete else CONTINUOUS_PRESET)
