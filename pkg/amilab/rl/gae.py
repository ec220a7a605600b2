from typing import Optional, Tuple

import numpy as np


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    gae_lambda: float,
    bootstrap_value: np.ndarray | float = 0.0,
    truncated: Optional[np.ndarray] = None,
    next_values: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation along axis 0.

    Trailing axes are independent columns. A step with `done` stops the recursion; if it is also
    `truncated` the next-state value in `next_values` (or `bootstrap_value` for the final step) is
    still used for its TD residual. Returns (advantages, returns) with returns = A + V.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError(f"rewards {rewards.shape}, values {values.shape} and dones {dones.shape} must align")
    truncated = np.zeros_like(dones) if truncated is None else np.asarray(truncated, dtype=bool)
    horizon = rewards.shape[0]
    bootstrap = np.broadcast_to(np.asarray(bootstrap_value, dtype=np.float64), rewards.shape[1:])

    advantages = np.zeros_like(rewards)
    last = np.zeros(rewards.shape[1:])
    for t in reversed(range(horizon)):
        if t + 1 < horizon:
            following = values[t + 1]
        else:
            following = bootstrap
        if next_values is not None:
            following = np.where(truncated[t], next_values[t], following)
        continuing = ~dones[t] | truncated[t]
        delta = rewards[t] + gamma * following * continuing - values[t]
        last = delta + gamma * gae_lambda * np.where(dones[t], 0.0, last)
        advantages[t] = last
    return advantages, advantages + values


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    out = np.zeros_like(np.asarray(rewards, dtype=np.float64))
    running = 0.0
    for t in reversed(range(len(out))):
        running = rewards[t] + gamma * running
        out[t] = running
    return out
