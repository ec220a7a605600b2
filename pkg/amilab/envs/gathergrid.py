"""GatherGrid: agents on a small grid try to meet on one cell; the adversary profits from dispersal."""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ProtocolError
from ..schemas.env import ActionSpace, ActionSpaceKind, GatherGridConfig, PosgSpec
from .base import PosgEnv

# stay, N, S, E, W as (row, col) deltas.
MOVES = np.array([[0, 0], [-1, 0], [1, 0], [0, 1], [0, -1]], dtype=np.int64)
N_ACTIONS = len(MOVES)


@dataclass
class GridState:
    positions: np.ndarray
    t: int = 0
    colocated: bool = False


def _manhattan_to_centroid(positions: np.ndarray) -> float:
    centroid = positions.mean(axis=0)
    return float(np.sum(np.abs(positions - centroid)))


def validate_grid_actions(actions: np.ndarray, n_agents: int) -> np.ndarray:
    flat = np.asarray(actions).reshape(-1)
    if flat.shape[0] != n_agents:
        raise ProtocolError(f"Expected {n_agents} actions, got {flat.shape[0]}")
    if not np.all(np.isfinite(flat.astype(np.float64))) or np.any(flat != np.round(flat)):
        raise ProtocolError(f"Action ids must be integers in [0, {N_ACTIONS}), got {flat.tolist()}")
    ids = flat.astype(np.int64)
    if np.any(ids < 0) or np.any(ids >= N_ACTIONS):
        raise ProtocolError(f"Action ids must be integers in [0, {N_ACTIONS}), got {ids.tolist()}")
    return ids


def gathergrid_rewards(positions: np.ndarray, victims: Sequence[int]) -> Tuple[float, float]:
    """Return (team reward, adversary reward) for the given cell positions."""
    team = -_manhattan_to_centroid(positions.astype(np.float64))
    adversary = _manhattan_to_centroid(positions[list(victims)].astype(np.float64))
    return team, adversary


def gathergrid_step(
    state: GridState,
    actions: np.ndarray,
    config: GatherGridConfig,
    adversary_slot: Optional[int] = None,
) -> Tuple[GridState, float, float, bool]:
    """Move every agent one cell; moves into walls or off the grid leave the agent in place."""
    n = state.positions.shape[0]
    ids = validate_grid_actions(actions, n)
    walls = {tuple(w) for w in config.walls}
    positions = state.positions.copy()
    for i, a in enumerate(ids):
        target = positions[i] + MOVES[a]
        inside = 0 <= target[0] < config.grid_size and 0 <= target[1] < config.grid_size
        if inside and (int(target[0]), int(target[1])) not in walls:
            positions[i] = target
    victims = [i for i in range(n) if i != adversary_slot]
    team, adversary = gathergrid_rewards(positions, victims)
    colocated = bool(np.all(positions[victims] == positions[victims[0]]))
    t = state.t + 1
    done = colocated or t >= config.max_episode_len
    return GridState(positions=positions, t=t, colocated=colocated), team, adversary, done


class GatherGridEnv(PosgEnv):
    def __init__(self, config: GatherGridConfig, gamma: float = 0.99, adversary_slot=0):
        n = config.n_agents
        spec = PosgSpec(
            n_victims=n - 1,
            state_dim=2 * n + 1,
            obs_dim=2 * n,
            action_space=ActionSpace(kind=ActionSpaceKind.DISCRETE, n=N_ACTIONS),
            max_episode_len=config.max_episode_len,
            gamma=gamma,
        )
        super().__init__(spec, adversary_slot)
        self.config = config
        walls = {tuple(w) for w in config.walls}
        self.free_cells = np.array(
            [(r, c) for r in range(config.grid_size) for c in range(config.grid_size) if (r, c) not in walls],
            dtype=np.int64,
        )
        self.state = GridState(positions=np.zeros((n, 2), dtype=np.int64))

    def _reset_state(self, rng: np.random.Generator) -> None:
        idx = rng.integers(0, len(self.free_cells), size=self.config.n_agents)
        self.state = GridState(positions=self.free_cells[idx].copy())

    def _transition(self, actions: np.ndarray) -> Tuple[float, float, bool, bool, Dict[str, Any]]:
        self.state, team, adversary, _ = gathergrid_step(self.state, actions, self.config, self.adversary_slot)
        return team, adversary, self.state.colocated, False, {}

    def _scale(self) -> float:
        return float(max(self.config.grid_size - 1, 1))

    def global_state(self) -> np.ndarray:
        pos = self.state.positions.astype(np.float64) / self._scale()
        return np.concatenate([pos.reshape(-1), [self.state.t / self.config.max_episode_len]])

    def observe(self, agent: int) -> np.ndarray:
        pos = self.state.positions.astype(np.float64) / self._scale()
        others = np.delete(pos, agent, axis=0) - pos[agent]
        return np.concatenate([pos[agent], others.reshape(-1)])
