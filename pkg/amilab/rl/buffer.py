from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..envs.base import StepRecord
from ..exceptions import NumericError


@dataclass
class RolloutBuffer:
    """T x K episodic rollout with a validity mask.

    Arrays are indexed [t, k, ...]. Columns that finish early are zero-padded and masked out.
    `controlled[t, k, i]` marks the slots whose action came from the policy being trained
    (victims during victim training); `adversary_present[k]` marks columns where the adversary acted.
    """

    states: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    victim_logp: np.ndarray
    adv_logp: np.ndarray
    team_rewards: np.ndarray
    adv_rewards: np.ndarray
    dones: np.ndarray
    truncated: np.ndarray
    mask: np.ndarray
    adversary_slot: Optional[int]
    adversary_present: np.ndarray
    episode_seeds: List[int]
    records: List[List[StepRecord]] = field(default_factory=list)
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return int(self.mask.shape[0])

    @property
    def n_columns(self) -> int:
        return int(self.mask.shape[1])

    @property
    def n_agents(self) -> int:
        return int(self.actions.shape[2])

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())

    def episode_lengths(self) -> np.ndarray:
        return self.mask.sum(axis=0)

    def episode_returns(self, which: str = "adv") -> np.ndarray:
        rewards = self.adv_rewards if which == "adv" else self.team_rewards
        return (rewards * self.mask).sum(axis=0)

    def victim_slots(self) -> List[int]:
        return [i for i in range(self.n_agents) if i != self.adversary_slot]

    def victim_actions(self) -> np.ndarray:
        """(T, K, N^v, W) actions of the victim slots."""
        return self.actions[:, :, self.victim_slots()]

    def adversary_actions(self) -> np.ndarray:
        if self.adversary_slot is None:
            raise ValueError("Buffer has no adversary slot")
        return self.actions[:, :, self.adversary_slot]

    def next_action_mask(self) -> np.ndarray:
        """(T, K) steps whose successor step exists in the same episode."""
        following = np.zeros_like(self.mask)
        following[:-1] = self.mask[1:]
        return self.mask & following & ~self.dones

    def next_victim_actions(self) -> np.ndarray:
        """(T, K, N^v, W) victim actions at t+1; rows without a successor are zero."""
        out = np.zeros_like(self.victim_actions())
        out[:-1] = self.victim_actions()[1:]
        out[~self.next_action_mask()] = 0.0
        return out

    def controlled_mask(self) -> np.ndarray:
        """(T, K, N) slots acted by the victim policy."""
        controlled = np.repeat(self.mask[:, :, None], self.n_agents, axis=2)
        if self.adversary_slot is not None:
            controlled[:, self.adversary_present, self.adversary_slot] = False
        return controlled

    def flat(self, array: np.ndarray) -> np.ndarray:
        """Valid rows of a (T, K, ...) array, in t-major order."""
        return array[self.mask]

    def check_finite(self) -> None:
        for name in ("advantages", "returns"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr[self.mask])):
                raise NumericError(f"Non-finite {name} in rollout buffer")
