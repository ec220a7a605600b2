import json
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Type

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from ..exceptions import ConfigurationError
from .attack import DEFAULT_LAMBDA, DEFAULT_METRIC, AttackConfig, metric_supported
from .defense import DetectorConfig, DualTrainingConfig
from .env import EnvConfig
from .train import TrainConfig, preset_for

SCHEMA_VERSION = 1


class VictimTrainingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    iterations: int = 200
    share_parameters: bool = True
    train: TrainConfig = TrainConfig()


class ExperimentConfig(BaseModel):
    """Complete, versioned experiment description. Unknown keys are rejected at every level."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int = 0
    n_seeds: int = 5
    env: EnvConfig = EnvConfig()
    victims: VictimTrainingConfig = VictimTrainingConfig()
    attack: AttackConfig = AttackConfig()
    defense: DualTrainingConfig = DualTrainingConfig()
    detection: DetectorConfig = DetectorConfig()

    @model_validator(mode="before")
    @classmethod
    def apply_presets(cls, data: Any) -> Any:
        """Layer user-supplied train keys over the table preset of the chosen action space."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        env = data.get("env") or {}
        env_name = env.get("name", "gathergrid") if isinstance(env, dict) else env.name
        preset = preset_for(env_name == "gathergrid")
        for section in ("victims", "attack"):
            block = data.get(section)
            if isinstance(block, BaseModel):
                continue
            block = dict(block or {})
            user_train = block.get("train") or {}
            if isinstance(user_train, BaseModel):
                continue
            block["train"] = {**preset, **user_train}
            data[section] = block
        return data

    @model_validator(mode="after")
    def resolve_attack_defaults(self) -> "ExperimentConfig":
        discrete = self.env.is_discrete
        if self.attack.ami_lambda is None:
            self.attack.ami_lambda = DEFAULT_LAMBDA[self.env.name]
        if self.attack.metric is None:
            self.attack.metric = DEFAULT_METRIC[discrete]
        if not metric_supported(self.attack.metric, discrete):
            raise ValueError(
                f"Distance metric '{self.attack.metric.value}' is not defined for "
                f"{'discrete' if discrete else 'continuous'} action spaces"
            )
        if not 0 <= self.attack.adversary_slot < self.env.n_agents:
            raise ValueError(f"adversary_slot must be in [0, {self.env.n_agents})")
        return self


def _model_at(loc: tuple) -> Optional[Type[BaseModel]]:
    model: Type[BaseModel] = ExperimentConfig
    for key in loc[:-1]:
        field = model.model_fields.get(str(key))
        if field is None or not (isinstance(field.annotation, type) and issubclass(field.annotation, BaseModel)):
            return None
        model = field.annotation
    return model


def parse_experiment(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        messages = []
        for err in e.errors():
            loc = tuple(err["loc"])
            if err["type"] == "extra_forbidden":
                model = _model_at(loc)
                valid = ", ".join(sorted(model.model_fields)) if model else "?"
                messages.append(f"Unknown key '{'.'.join(map(str, loc))}'. Valid keys: {valid}")
            else:
                messages.append(f"{'.'.join(map(str, loc)) or '<root>'}: {err['msg']}")
        raise ConfigurationError("; ".join(messages)) from None


def load_experiment(path: Optional[str | Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"Config file not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
    for dotted, value in (overrides or {}).items():
        target = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value
    return parse_experiment(data)
