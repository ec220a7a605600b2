from typing import Optional

from ..schemas.env import EnvConfig
from .base import PosgEnv
from .gathergrid import GatherGridEnv
from .rendezvous import RendezvousEnv


def make_env(config: EnvConfig, adversary_slot: Optional[int] = 0) -> PosgEnv:
    if config.name == "rendezvous":
        return RendezvousEnv(config.rendezvous, gamma=config.gamma, adversary_slot=adversary_slot)
    return GatherGridEnv(config.gathergrid, gamma=config.gamma, adversary_slot=adversary_slot)
