"""Action distributions and their analytic log-likelihood / entropy gradients."""
import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.special import entr, log_softmax, logsumexp, softmax

from ..exceptions import ConfigurationError, NumericError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
PROB_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Categorical:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ConfigurationError("Categorical probs must be a non-empty vector")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > PROB_TOLERANCE:
            raise NumericError(f"Categorical probs must be non-negative and sum to 1 (sum={p.sum():.12g})")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "Categorical":
        return cls(softmax(np.asarray(logits, dtype=np.float64)))

    @property
    def n_actions(self) -> int:
        return int(self.probs.size)

    def mode(self) -> int:
        return int(np.argmax(self.probs))

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_actions, p=self.probs))


@dataclass(frozen=True)
class DiagGaussian:
    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        log_std = np.broadcast_to(np.asarray(self.log_std, dtype=np.float64), mean.shape).copy()
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std))):
            raise NumericError("Gaussian mean and log_std must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "log_std", log_std)

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    def mode(self) -> np.ndarray:
        return self.mean.copy()

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + np.exp(self.log_std) * rng.standard_normal(self.dim)


@dataclass(frozen=True)
class GaussianMixture:
    """Equal-or-weighted mixture of diagonal Gaussians; density is the weighted average density."""

    weights: np.ndarray
    means: np.ndarray
    log_stds: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        log_stds = np.broadcast_to(np.asarray(self.log_stds, dtype=np.float64), means.shape).copy()
        if means.ndim != 2 or w.shape != (means.shape[0],):
            raise ConfigurationError("Mixture needs weights (M,) and means (M, D)")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > PROB_TOLERANCE:
            raise NumericError("Mixture weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "log_stds", log_stds)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def mode(self) -> np.ndarray:
        return self.mean

    def moment_matched(self) -> DiagGaussian:
        var = self.weights @ (np.exp(2.0 * self.log_stds) + self.means**2) - self.mean**2
        return DiagGaussian(self.mean, 0.5 * np.log(np.maximum(var, 1e-300)))


ActionDistribution = Union[Categorical, DiagGaussian, GaussianMixture]


def head_log_prob(dist: ActionDistribution, action) -> float:
    """Log-likelihood of one action. Zero-probability discrete actions return -inf and are logged."""
    if isinstance(dist, Categorical):
        a = int(action)
        if not 0 <= a < dist.n_actions:
            raise ConfigurationError(f"Action {a} out of range for {dist.n_actions} actions")
        p = dist.probs[a]
        if p <= 0.0:
            logger.warning("log-probability of zero-probability action %d requested; returning -inf", a)
            return -math.inf
        return float(math.log(p))
    a = np.atleast_1d(np.asarray(action, dtype=np.float64))
    if a.shape != (dist.dim,):
        raise ConfigurationError(f"Continuous action has shape {a.shape}, expected ({dist.dim},)")
    if isinstance(dist, DiagGaussian):
        return float(gaussian_log_prob(dist.mean, dist.log_std, a)[0])
    comp = gaussian_log_prob(dist.means, dist.log_stds, np.broadcast_to(a, dist.means.shape))[0]
    with np.errstate(divide="ignore"):
        return float(logsumexp(comp, b=dist.weights))


def head_entropy(dist: ActionDistribution) -> float:
    if isinstance(dist, Categorical):
        return float(entr(dist.probs).sum())
    if isinstance(dist, GaussianMixture):
        dist = dist.moment_matched()
    return float(np.sum(dist.log_std + 0.5 * (1.0 + LOG_2PI)))


# Batched forms used by the learners.

def categorical_probs(logits: np.ndarray) -> np.ndarray:
    return softmax(logits, axis=-1)


def categorical_log_prob(logits: np.ndarray, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """log pi(a) and d log pi(a) / d logits for logits (..., A), integer actions (...)."""
    logp_all = log_softmax(logits, axis=-1)
    idx = np.asarray(actions, dtype=np.int64)[..., None]
    logp = np.take_along_axis(logp_all, idx, axis=-1)[..., 0]
    grad = -np.exp(logp_all)
    np.put_along_axis(grad, idx, np.take_along_axis(grad, idx, axis=-1) + 1.0, axis=-1)
    return logp, grad


def categorical_entropy(logits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """H and dH / d logits, with dH/dz_k = -p_k (log p_k + H)."""
    logp = log_softmax(logits, axis=-1)
    p = np.exp(logp)
    h = -(p * logp).sum(axis=-1)
    grad = -p * (logp + h[..., None])
    return h, grad


def gaussian_log_prob(
    mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonal-Gaussian log density summed over the last axis, and its gradients."""
    log_std = np.broadcast_to(log_std, mean.shape)
    std = np.exp(log_std)
    z = (actions - mean) / std
    logp = (-0.5 * z**2 - log_std - 0.5 * LOG_2PI).sum(axis=-1)
    d_mean = z / std
    d_log_std = z**2 - 1.0
    return logp, d_mean, d_log_std


def gaussian_entropy(log_std: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    log_std = np.asarray(log_std, dtype=np.float64)
    h = (log_std + 0.5 * (1.0 + LOG_2PI)).sum(axis=-1)
    return h, np.ones_like(log_std)
