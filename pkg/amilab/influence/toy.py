"""Two-action copy model: the adversary repeats the victim's action with probability p.

The victim marginal stays fixed, so the minority term is flat in p while the mutual information
and the majority term move.
"""
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError
from ..utils.csv_writer import write_frame
from .information import InfluenceDecomposition, decompose_mi

DEFAULT_MARGINAL = (0.2, 0.8)
DEFAULT_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


def copy_model_joint(p: float, victim_marginal: Sequence[float] = DEFAULT_MARGINAL) -> np.ndarray:
    """Joint table [adversary action, victim action] of the copy model."""
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError("Copy probability must be in [0, 1]")
    marginal = np.asarray(victim_marginal, dtype=np.float64)
    if marginal.shape != (2,):
        raise ConfigurationError("The copy model is defined for two actions")
    copy = np.eye(2)
    return marginal[None, :] * (p * copy + (1.0 - p) * (1.0 - copy))


def toy_example(p: float, victim_marginal: Sequence[float] = DEFAULT_MARGINAL) -> InfluenceDecomposition:
    return decompose_mi(copy_model_joint(p, victim_marginal))


def toy_curves(
    grid: Sequence[float] = DEFAULT_GRID, victim_marginal: Sequence[float] = DEFAULT_MARGINAL
) -> pd.DataFrame:
    rows = []
    for p in grid:
        d = toy_example(float(p), victim_marginal)
        rows.append({"p": float(p), "mi": d.mutual_information, "majority": d.majority_term, "minority": d.minority_term})
    return pd.DataFrame(rows, columns=["p", "mi", "majority", "minority"])


def export_toy_csv(path: str | Path, grid: Sequence[float] = DEFAULT_GRID) -> Path:
    return write_frame(path, toy_curves(grid))
