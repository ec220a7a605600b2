"""Entropy, KL-to-uniform and the mutual-information split into minority and majority terms (nats)."""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.special import entr, rel_entr

from ..exceptions import InfluenceInputError
from ..nn.distributions import Categorical

NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class InfluenceDecomposition:
    mutual_information: float
    minority_term: float
    majority_term: float


def _as_probs(dist: Union[Categorical, np.ndarray]) -> np.ndarray:
    if isinstance(dist, Categorical):
        return dist.probs
    return Categorical(np.asarray(dist, dtype=np.float64)).probs


def entropy(probs: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shannon entropy with 0 ln 0 = 0."""
    return entr(np.asarray(probs, dtype=np.float64)).sum(axis=axis)


def kl_to_uniform(probs: np.ndarray, axis: int = -1) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.shape[axis]
    return rel_entr(probs, 1.0 / n).sum(axis=axis)


def entropy_kl_identity(dist: Union[Categorical, np.ndarray]) -> Tuple[float, float]:
    """Return (H(p), KL(p || U)); they satisfy H = ln|A| - KL."""
    p = _as_probs(dist)
    return float(entropy(p)), float(kl_to_uniform(p))


def validate_joint(joint: np.ndarray) -> np.ndarray:
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 2 or joint.size == 0:
        raise InfluenceInputError(f"Joint table must be a non-empty 2-D array, got shape {joint.shape}")
    if not np.all(np.isfinite(joint)) or np.any(joint < 0):
        raise InfluenceInputError("Joint table entries must be finite and non-negative")
    total = float(joint.sum())
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise InfluenceInputError(f"Joint table must sum to 1 (sum={total:.12g})")
    return joint


def decompose_mi(joint: np.ndarray) -> InfluenceDecomposition:
    """Split I(a_adv; a_victim) for a table indexed [adversary action, victim action].

    minority = H(victim marginal), majority = -H(victim | adversary).
    """
    joint = validate_joint(joint)
    p_adv = joint.sum(axis=1)
    p_victim = joint.sum(axis=0)
    minority = float(entropy(p_victim))
    conditional = 0.0
    for a, weight in enumerate(p_adv):
        if weight > 0:
            conditional += weight * float(entropy(joint[a] / weight))
    majority = -conditional
    return InfluenceDecomposition(
        mutual_information=minority + majority, minority_term=minority, majority_term=majority
    )


def direct_mutual_information(joint: np.ndarray) -> float:
    """sum p log(p / (p_a p_v)) computed straight from the table."""
    joint = validate_joint(joint)
    outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    return float(rel_entr(joint, np.where(outer > 0, outer, 1.0)).sum())
