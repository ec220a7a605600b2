from typing import Optional, Tuple

import numpy as np
from scipy.special import expit


def value_loss(
    predictions: np.ndarray, targets: np.ndarray, huber_delta: Optional[float] = None
) -> Tuple[float, np.ndarray]:
    """Mean squared (0.5 e^2) or Huber loss over a batch, with d loss / d predictions."""
    err = np.asarray(predictions, dtype=np.float64) - np.asarray(targets, dtype=np.float64)
    n = max(err.size, 1)
    if huber_delta is None:
        return float(0.5 * np.sum(err**2) / n), err / n
    small = np.abs(err) <= huber_delta
    loss = np.where(small, 0.5 * err**2, huber_delta * (np.abs(err) - 0.5 * huber_delta))
    grad = np.where(small, err, huber_delta * np.sign(err))
    return float(np.sum(loss) / n), grad / n


def bce_with_logits(
    logits: np.ndarray, labels: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """Weighted-mean binary cross-entropy and its gradient with respect to the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    w = np.ones_like(logits) if weights is None else np.asarray(weights, dtype=np.float64)
    total = max(float(w.sum()), 1e-12)
    loss = np.logaddexp(0.0, logits) - labels * logits
    grad = (expit(logits) - labels) * w / total
    return float(np.sum(loss * w) / total), grad
