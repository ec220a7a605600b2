from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..schemas.env import PosgSpec


@dataclass
class StepRecord:
    """One POSG transition: s_t, o_t, a_t, the rewards it produced and whether the episode ended."""

    state: np.ndarray
    observations: np.ndarray
    joint_actions: np.ndarray
    adversary_slot: Optional[int]
    adversary_reward: float
    team_reward: float
    done: bool
    next_state: np.ndarray
    next_observations: np.ndarray
    clipped: bool = False
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def adversary_action(self) -> Optional[np.ndarray]:
        if self.adversary_slot is None:
            return None
        return self.joint_actions[self.adversary_slot]

    @property
    def victim_actions(self) -> np.ndarray:
        if self.adversary_slot is None:
            return self.joint_actions
        return np.delete(self.joint_actions, self.adversary_slot, axis=0)


class PosgEnv(ABC):
    """Partially observable stochastic game with one optional adversary slot.

    Each instance owns its state and RNG. `adversary_slot` selects whose reward is the adversary
    reward and which slots count as victims; `None` means every slot is a cooperative victim.
    """

    def __init__(self, spec: PosgSpec, adversary_slot: Optional[int] = 0):
        self.spec = spec
        self.adversary_slot = adversary_slot
        self.t = 0
        self._rng = np.random.default_rng(0)

    @property
    def n_agents(self) -> int:
        return self.spec.n_agents

    def victim_slots(self) -> List[int]:
        return [i for i in range(self.n_agents) if i != self.adversary_slot]

    def reset(self, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        self._rng = np.random.default_rng(seed)
        self.t = 0
        self._reset_state(self._rng)
        return self.global_state(), self.observations()

    def observations(self) -> np.ndarray:
        return np.stack([self.observe(i) for i in range(self.n_agents)])

    def step(self, joint_actions: np.ndarray) -> StepRecord:
        state, obs = self.global_state(), self.observations()
        actions = np.array(joint_actions, copy=True)
        team_reward, adversary_reward, terminal, clipped, info = self._transition(actions)
        self.t += 1
        done = terminal or self.t >= self.spec.max_episode_len
        info["truncated"] = done and not terminal
        return StepRecord(
            state=state,
            observations=obs,
            joint_actions=actions,
            adversary_slot=self.adversary_slot,
            adversary_reward=float(adversary_reward),
            team_reward=float(team_reward),
            done=bool(done),
            next_state=self.global_state(),
            next_observations=self.observations(),
            clipped=clipped,
            info=info,
        )

    @abstractmethod
    def _reset_state(self, rng: np.random.Generator) -> None:
        ...

    @abstractmethod
    def _transition(self, actions: np.ndarray) -> Tuple[float, float, bool, bool, Dict[str, Any]]:
        """Apply joint actions; return (team reward, adversary reward, terminal, clipped, info)."""

    @abstractmethod
    def global_state(self) -> np.ndarray:
        ...

    @abstractmethod
    def observe(self, agent: int) -> np.ndarray:
        ...
