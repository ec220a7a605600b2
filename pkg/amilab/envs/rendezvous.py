"""Differential-drive swarm rendezvous.

Robots start uniformly in a square arena and are rewarded for shrinking the sum of pairwise
distances. Each robot observes its distances to the others plus sine/cosine of the included angles.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from ..schemas.env import ActionSpace, ActionSpaceKind, PosgSpec, RendezvousConfig
from .base import PosgEnv

logger = logging.getLogger(__name__)


def _wrap(angle: np.ndarray) -> np.ndarray:
    return np.arctan2(np.sin(angle), np.cos(angle))


@dataclass
class SwarmState:
    positions: np.ndarray
    headings: np.ndarray
    distances: np.ndarray
    angles: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]


def swarm_state(positions: np.ndarray, headings: np.ndarray) -> SwarmState:
    """Build a SwarmState, deriving M_d and M_a.

    M_a[i, j] is the angle of the bearing from robot i to robot j, measured from i's heading and
    wrapped to (-pi, pi]. The diagonal is zero.
    """
    positions = np.asarray(positions, dtype=np.float64)
    headings = _wrap(np.asarray(headings, dtype=np.float64))
    delta = positions[None, :, :] - positions[:, None, :]
    distances = np.linalg.norm(delta, axis=-1)
    bearings = np.arctan2(delta[..., 1], delta[..., 0])
    angles = _wrap(bearings - headings[:, None])
    np.fill_diagonal(angles, 0.0)
    return SwarmState(positions=positions, headings=headings, distances=distances, angles=angles)


def rendezvous_step(state: SwarmState, actions: np.ndarray, config: RendezvousConfig) -> Tuple[SwarmState, bool]:
    """Euler-integrate differential-drive kinematics for one step.

    Actions are (omega_left, omega_right) per robot. Out-of-box wheel speeds are clipped and the
    second return value flags that it happened. Positions are clipped to the arena; headings are kept.
    """
    actions = np.asarray(actions, dtype=np.float64).reshape(state.n_agents, 2)
    bound = config.max_wheel_speed
    clipped_actions = np.clip(actions, -bound, bound)
    clipped = bool(np.any(clipped_actions != actions))
    omega_l, omega_r = clipped_actions[:, 0], clipped_actions[:, 1]
    v = config.wheel_radius * (omega_l + omega_r) / 2.0
    omega = config.wheel_radius * (omega_r - omega_l) / config.axle_length
    heading = state.headings
    dx = v * np.cos(heading) * config.dt
    dy = v * np.sin(heading) * config.dt
    positions = np.clip(state.positions + np.stack([dx, dy], axis=1), 0.0, config.arena_size)
    headings = heading + omega * config.dt
    return swarm_state(positions, headings), clipped


def rendezvous_reward(
    state: SwarmState, actions: np.ndarray, control_penalty: float = 0.001
) -> Tuple[float, float, float]:
    """Return (r, r_d, r_c) with r_d = -sum_{i<j} d_ij, r_c = sum_i ||a_i||, r = r_d - penalty * r_c."""
    iu = np.triu_indices(state.n_agents, k=1)
    r_d = -float(np.sum(state.distances[iu]))
    r_c = float(np.sum(np.linalg.norm(np.asarray(actions, dtype=np.float64).reshape(state.n_agents, -1), axis=1)))
    return r_d - control_penalty * r_c, r_d, r_c


def rendezvous_observe(state: SwarmState, agent: int) -> np.ndarray:
    others = [j for j in range(state.n_agents) if j != agent]
    theta = state.angles[agent, others]
    phi = state.angles[others, agent]
    return np.concatenate(
        [state.distances[agent, others], np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)]
    )


def rendezvous_global_state(state: SwarmState) -> np.ndarray:
    n = state.n_agents
    iu = np.triu_indices(n, k=1)
    off = ~np.eye(n, dtype=bool)
    angles = state.angles[off]
    return np.concatenate([state.distances[iu], np.sin(angles), np.cos(angles)])


class RendezvousEnv(PosgEnv):
    def __init__(self, config: RendezvousConfig, gamma: float = 0.99, adversary_slot=0):
        n = config.n_agents
        spec = PosgSpec(
            n_victims=n - 1,
            state_dim=n * (n - 1) // 2 + 2 * n * (n - 1),
            obs_dim=5 * (n - 1),
            action_space=ActionSpace(
                kind=ActionSpaceKind.CONTINUOUS, dim=2, low=-config.max_wheel_speed, high=config.max_wheel_speed
            ),
            max_episode_len=config.max_episode_len,
            gamma=gamma,
        )
        super().__init__(spec, adversary_slot)
        self.config = config
        self.state = swarm_state(np.zeros((n, 2)), np.zeros(n))

    def _reset_state(self, rng: np.random.Generator) -> None:
        n = self.config.n_agents
        positions = rng.uniform(0.0, self.config.arena_size, size=(n, 2))
        headings = rng.uniform(-np.pi, np.pi, size=n)
        self.state = swarm_state(positions, headings)

    def _transition(self, actions: np.ndarray) -> Tuple[float, float, bool, bool, Dict[str, Any]]:
        self.state, clipped = rendezvous_step(self.state, actions, self.config)
        if clipped:
            logger.debug("Wheel speeds clipped to the action box at t=%d", self.t)
        bound = self.config.max_wheel_speed
        r, r_d, r_c = rendezvous_reward(self.state, np.clip(actions, -bound, bound), self.config.control_penalty)
        return r, -r_d, False, clipped, {"r_d": r_d, "r_c": r_c}

    def global_state(self) -> np.ndarray:
        return rendezvous_global_state(self.state)

    def observe(self, agent: int) -> np.ndarray:
        return rendezvous_observe(self.state, agent)

    def mean_pairwise_distance(self) -> float:
        iu = np.triu_indices(self.config.n_agents, k=1)
        return float(np.mean(self.state.distances[iu]))
