from .base import PosgEnv, StepRecord
from .factory import make_env
from .gathergrid import GatherGridEnv, gathergrid_step
from .rendezvous import RendezvousEnv, SwarmState, rendezvous_observe, rendezvous_reward, rendezvous_step, swarm_state

__all__ = [
    "PosgEnv",
    "StepRecord",
    "make_env",
    "GatherGridEnv",
    "gathergrid_step",
    "RendezvousEnv",
    "SwarmState",
    "rendezvous_observe",
    "rendezvous_reward",
    "rendezvous_step",
    "swarm_state",
]
