"""Influence terms and their mixing into the adversary reward."""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..exceptions import IntegrityError
from ..nn.distributions import ActionDistribution
from ..schemas.attack import AttackMethod, DistanceMetric
from .distance import distance


@dataclass
class InfluenceRecord:
    expected: List[ActionDistribution]
    targets: List
    distances: List[float]
    total: float


def ami_influence_reward(
    expected: Sequence[Optional[ActionDistribution]],
    targets: Sequence,
    metric: DistanceMetric,
    n_victims: Optional[int] = None,
) -> InfluenceRecord:
    """I = sum over victims of d(expected_i, target_i)."""
    n = len(expected) if n_victims is None else n_victims
    if len(expected) != n or len(targets) != n:
        raise IntegrityError(
            f"Influence needs {n} victim entries, got {len(expected)} distributions and {len(targets)} targets"
        )
    missing = [i for i in range(n) if expected[i] is None or targets[i] is None]
    if missing:
        raise IntegrityError(f"Missing influence entries for victims {missing}")
    distances = [distance(expected[i], targets[i], metric) for i in range(n)]
    return InfluenceRecord(list(expected), list(targets), distances, float(sum(distances)))


@dataclass
class InfluencePieces:
    """Per-step influence ingredients, each an array over (T, K) or a flat batch.

    distance_sum: targeted distance sum; majority: -sum_i H(p(.|s, a_adv, a_v));
    untargeted: -sum_i KL(p_hat || U); mutual_information: sum_i [H(p_hat) - H(p(.|s, a_adv, a_v))].
    """

    distance_sum: Optional[np.ndarray] = None
    majority: Optional[np.ndarray] = None
    untargeted: Optional[np.ndarray] = None
    mutual_information: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)


REQUIRED_PIECES = {
    AttackMethod.AMI: ("distance_sum",),
    AttackMethod.AMI_BILATERAL: ("distance_sum", "majority"),
    AttackMethod.AMI_UNTARGETED: ("untargeted",),
    AttackMethod.MI_BASELINE: ("mutual_information",),
    AttackMethod.ADV_POLICY: (),
}


def influence_term(method: AttackMethod, pieces: InfluencePieces, shape: Optional[tuple] = None) -> np.ndarray:
    names = REQUIRED_PIECES[method]
    arrays = []
    for name in names:
        value = getattr(pieces, name)
        if value is None:
            raise IntegrityError(f"Method '{method.value}' needs the '{name}' influence piece")
        arrays.append(np.asarray(value, dtype=np.float64))
    if len({a.shape for a in arrays}) > 1:
        raise IntegrityError(f"Influence pieces for '{method.value}' have mismatched shapes")
    if not arrays:
        if shape is None:
            shape = np.shape(pieces.distance_sum) if pieces.distance_sum is not None else ()
        return np.zeros(shape)
    if shape is not None and arrays[0].shape != tuple(shape):
        raise IntegrityError(f"Influence pieces have shape {arrays[0].shape}, rewards have {tuple(shape)}")
    return np.sum(arrays, axis=0)


def mix_reward(adv_reward: np.ndarray, influence: np.ndarray, ami_lambda: float) -> np.ndarray:
    return np.asarray(adv_reward, dtype=np.float64) + ami_lambda * np.asarray(influence, dtype=np.float64)


def variant_reward(
    method: AttackMethod,
    adv_reward: np.ndarray,
    pieces: InfluencePieces,
    ami_lambda: float,
    transform: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """r_AMI = r_adv + lambda * (method's influence term); adv_policy leaves r_adv untouched.

    `transform` maps the raw influence term to the one that is mixed in (flooring, normalisation).
    """
    adv_reward = np.asarray(adv_reward, dtype=np.float64)
    if method == AttackMethod.ADV_POLICY:
        return adv_reward.copy()
    influence = influence_term(method, pieces, adv_reward.shape)
    if transform is not None:
        influence = transform(influence)
    return mix_reward(adv_reward, influence, ami_lambda)
