from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, field_validator

from .train import TrainConfig


class AttackMethod(str, Enum):
    AMI = "ami"
    ADV_POLICY = "adv_policy"
    AMI_BILATERAL = "ami_bilateral"
    AMI_UNTARGETED = "ami_untargeted"
    MI_BASELINE = "mi_baseline"


# Names accepted on the command line.
CLI_METHODS = {
    "ami": AttackMethod.AMI,
    "adv-policy": AttackMethod.ADV_POLICY,
    "bilateral": AttackMethod.AMI_BILATERAL,
    "untargeted": AttackMethod.AMI_UNTARGETED,
    "mi": AttackMethod.MI_BASELINE,
}


class DistanceMetric(str, Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"
    CE = "ce"
    PROB = "prob"
    L1_MEAN = "l1_mean"


DISCRETE_METRICS = {DistanceMetric.L1, DistanceMetric.L2, DistanceMetric.LINF, DistanceMetric.CE, DistanceMetric.PROB}
CONTINUOUS_METRICS = {DistanceMetric.L1_MEAN, DistanceMetric.CE, DistanceMetric.PROB}

DEFAULT_METRIC = {True: DistanceMetric.L1, False: DistanceMetric.PROB}

# Lambda sweeps per setting; rendezvous uses a single value.
LAMBDA_SWEEPS = {
    "gathergrid": [0.03, 0.05, 0.1],
    "continuous": [0.01, 0.1, 0.3, 1.0],
    "rendezvous": [0.003],
}
DEFAULT_LAMBDA = {"gathergrid": 0.05, "rendezvous": 0.003}


def metric_supported(metric: DistanceMetric, discrete: bool) -> bool:
    return metric in (DISCRETE_METRICS if discrete else CONTINUOUS_METRICS)


class AttackConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: AttackMethod = AttackMethod.AMI
    ami_lambda: Optional[float] = None
    metric: Optional[DistanceMetric] = None
    normalize_influence: bool = True
    iterations: int = 50
    adversary_slot: int = 0
    counterfactual_samples: int = 8
    opp_epochs: int = 4
    max_consecutive_aborts: int = 3
    train: TrainConfig = TrainConfig()

    @field_validator("ami_lambda")
    @classmethod
    def validate_lambda(cls, v):
        if v is not None and v < 0:
            raise ValueError("ami_lambda must be non-negative")
        return v

    @field_validator("iterations", "counterfactual_samples", "opp_epochs", "max_consecutive_aborts")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("Value must be at least 1")
        return v

    @property
    def effective_lambda(self) -> float:
        """adv_policy is AMI with the influence weight pinned to zero."""
        if self.method == AttackMethod.ADV_POLICY:
            return 0.0
        return float(self.ami_lambda or 0.0)
