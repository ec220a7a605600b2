from .buffer import RolloutBuffer
from .gae import compute_gae
from .policy import PolicyNetwork, ValueNetwork, encode_actions
from .ppo import PPOBatch, clipped_surrogate, ppo_update, value_update
from .rollout import RandomPolicy, collect_rollouts

__all__ = [
    "PPOBatch",
    "PolicyNetwork",
    "RandomPolicy",
    "RolloutBuffer",
    "ValueNetwork",
    "clipped_surrogate",
    "collect_rollouts",
    "compute_gae",
    "encode_actions",
    "ppo_update",
    "value_update",
]
