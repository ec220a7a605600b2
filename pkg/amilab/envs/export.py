from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from ..utils.csv_writer import write_rows
from .base import StepRecord


def trajectory_columns(obs_dim: int, action_width: int) -> List[str]:
    return (
        ["episode", "t", "agent"]
        + [f"obs_{k}" for k in range(obs_dim)]
        + [f"action_{k}" for k in range(action_width)]
        + ["r_adv", "r_team", "done"]
    )


def export_trajectories(path: Path, episodes: Iterable[Tuple[int, Sequence[StepRecord]]]) -> Path:
    """Write one row per (episode, step, agent)."""
    rows = []
    columns = None
    for episode, records in episodes:
        for t, record in enumerate(records):
            obs = np.asarray(record.observations)
            actions = np.asarray(record.joint_actions).reshape(obs.shape[0], -1)
            if columns is None:
                columns = trajectory_columns(obs.shape[1], actions.shape[1])
            for agent in range(obs.shape[0]):
                rows.append(
                    [episode, t, agent, *obs[agent].tolist(), *actions[agent].tolist(),
                     record.adversary_reward, record.team_reward, int(record.done)]
                )
    return write_rows(path, rows, columns or ["episode", "t", "agent", "r_adv", "r_team", "done"])
