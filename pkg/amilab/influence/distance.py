"""Distance-to-target metrics. Every metric is oriented so that larger means closer to the target."""
import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from ..exceptions import ConfigurationError
from ..nn.distributions import (
    ActionDistribution,
    Categorical,
    gaussian_log_prob,
    head_log_prob,
)
from ..schemas.attack import DistanceMetric, metric_supported

logger = logging.getLogger(__name__)

# Closed ranges each discrete metric can take.
DISCRETE_BOUNDS: Dict[DistanceMetric, Tuple[float, float]] = {
    DistanceMetric.L1: (-2.0, 0.0),
    DistanceMetric.L2: (-math.sqrt(2.0), 0.0),
    DistanceMetric.LINF: (-1.0, 0.0),
    DistanceMetric.PROB: (0.0, 1.0),
    DistanceMetric.CE: (-math.inf, 0.0),
}


CONTINUOUS_BOUNDS: Dict[DistanceMetric, Tuple[float, float]] = {
    DistanceMetric.L1_MEAN: (-math.inf, 0.0),
    DistanceMetric.PROB: (0.0, math.inf),
    DistanceMetric.CE: (-math.inf, math.inf),
}


def _discrete(probs: np.ndarray, target: np.ndarray, metric: DistanceMetric) -> np.ndarray:
    """Batched discrete distances for probs (..., A) and integer targets (...)."""
    target = np.asarray(target, dtype=np.int64)
    picked = np.take_along_axis(probs, target[..., None], axis=-1)[..., 0]
    if metric == DistanceMetric.PROB:
        return picked
    if metric == DistanceMetric.CE:
        if np.any(picked <= 0.0):
            logger.warning("Cross-entropy distance hit a zero-probability target; value is -inf")
        with np.errstate(divide="ignore"):
            return np.log(picked)
    diff = probs.copy()
    np.put_along_axis(diff, target[..., None], picked[..., None] - 1.0, axis=-1)
    if metric == DistanceMetric.L1:
        return -np.abs(diff).sum(axis=-1)
    if metric == DistanceMetric.L2:
        return -np.sqrt((diff**2).sum(axis=-1))
    return -np.abs(diff).max(axis=-1)


def distance(expected: ActionDistribution, target, metric: DistanceMetric) -> float:
    discrete = isinstance(expected, Categorical)
    if not metric_supported(metric, discrete):
        raise ConfigurationError(
            f"Metric '{metric.value}' is not defined for {'discrete' if discrete else 'continuous'} actions"
        )
    if discrete:
        return float(_discrete(expected.probs, np.asarray(int(target)), metric))
    target = np.atleast_1d(np.asarray(target, dtype=np.float64))
    if metric == DistanceMetric.L1_MEAN:
        return -float(np.abs(np.asarray(expected.mean) - target).sum())
    log_density = head_log_prob(expected, target)
    if metric == DistanceMetric.CE:
        return log_density
    return float(math.exp(log_density))


def discrete_distances(probs: np.ndarray, targets: np.ndarray, metric: DistanceMetric) -> np.ndarray:
    """Distances for probs (B, N, A) and integer targets (B, N)."""
    if not metric_supported(metric, True):
        raise ConfigurationError(f"Metric '{metric.value}' is not defined for discrete actions")
    return _discrete(np.asarray(probs, dtype=np.float64), targets, metric)


def mixture_distances(
    means: np.ndarray,
    log_std: np.ndarray,
    targets: np.ndarray,
    metric: DistanceMetric,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Distances for Gaussian mixtures with means (B, N, M, D), shared log-std (N, D), targets (B, N, D)."""
    if not metric_supported(metric, False):
        raise ConfigurationError(f"Metric '{metric.value}' is not defined for continuous actions")
    means = np.asarray(means, dtype=np.float64)
    n_comp = means.shape[2]
    w = np.full(means.shape[:3], 1.0 / n_comp) if weights is None else np.broadcast_to(weights, means.shape[:3])
    targets = np.asarray(targets, dtype=np.float64)
    if metric == DistanceMetric.L1_MEAN:
        mixture_mean = (w[..., None] * means).sum(axis=2)
        return -np.abs(mixture_mean - targets).sum(axis=-1)
    ls = np.broadcast_to(np.asarray(log_std)[None, :, None, :], means.shape)
    comp, _, _ = gaussian_log_prob(means, ls, np.broadcast_to(targets[:, :, None, :], means.shape))
    log_density = logsumexp(comp, b=w, axis=2)
    if metric == DistanceMetric.CE:
        return log_density
    return np.exp(log_density)


def within_bounds(values: np.ndarray, metric: DistanceMetric, discrete: bool = True) -> bool:
    lo, hi = (DISCRETE_BOUNDS if discrete else CONTINUOUS_BOUNDS)[metric]
    v = np.asarray(values, dtype=np.float64)
    tol = 1e-12
    return bool(np.all((v >= lo - tol) & (v <= hi + tol)))
