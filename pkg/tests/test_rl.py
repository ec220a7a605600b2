import numpy as np
import pytest

from amilab.rl.gae import compute_gae, discounted_returns
from amilab.rl.policy import PolicyNetwork, ValueNetwork
from amilab.rl.ppo import (
    PPOBatch,
    clipped_surrogate,
    minibatches,
    normalize_advantages,
    ppo_update,
    surrogate_loss,
    value_update,
)
from amilab.schemas.env import ActionSpace, ActionSpaceKind
from amilab.schemas.train import TrainConfig


def brute_force_gae(rewards, values, dones, truncated, next_values, gamma, lam):
    """Sum of (gamma * lam)^l * delta_{t+l} up to and including the episode's final step."""
    horizon = len(rewards)
    deltas = np.zeros(horizon)
    for t in range(horizon):
        if dones[t] and not truncated[t]:
            following = 0.0
        elif truncated[t]:
            following = next_values[t]
        else:
            following = values[t + 1] if t + 1 < horizon else 0.0
        deltas[t] = rewards[t] + gamma * following - values[t]
    adv = np.zeros(horizon)
    for t in range(horizon):
        total, weight = 0.0, 1.0
        for u in range(t, horizon):
            total += weight * deltas[u]
            if dones[u]:
                break
            weight *= gamma * lam
        adv[t] = total
    return adv


class TestGAE:
    def test_matches_brute_force_on_random_episodes(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            horizon = int(rng.integers(1, 51))
            rewards = rng.standard_normal(horizon)
            values = rng.standard_normal(horizon)
            next_values = rng.standard_normal(horizon)
            dones = rng.random(horizon) < 0.1
            dones[-1] = True
            truncated = dones & (rng.random(horizon) < 0.5)
            adv, returns = compute_gae(
                rewards, values, dones, 0.99, 0.95, truncated=truncated, next_values=next_values
            )
            expected = brute_force_gae(rewards, values, dones, truncated, next_values, 0.99, 0.95)
            np.testing.assert_allclose(adv, expected, atol=1e-8)
            np.testing.assert_allclose(returns, adv + values, atol=1e-12)

    def test_lambda_one_gives_discounted_returns_minus_values(self):
        rewards = np.array([1.0, 2.0, 3.0])
        values = np.array([0.5, 0.1, -0.2])
        dones = np.array([False, False, True])
        adv, _ = compute_gae(rewards, values, dones, 0.9, 1.0)
        np.testing.assert_allclose(adv, discounted_returns(rewards, 0.9) - values)

    def test_columns_are_independent(self):
        rng = np.random.default_rng(1)
        rewards, values = rng.standard_normal((6, 2)), rng.standard_normal((6, 2))
        dones = np.zeros((6, 2), dtype=bool)
        dones[2, 0] = dones[5, 0] = dones[5, 1] = True
        adv, _ = compute_gae(rewards, values, dones, 0.99, 0.95)
        single, _ = compute_gae(rewards[:, 1], values[:, 1], dones[:, 1], 0.99, 0.95)
        np.testing.assert_allclose(adv[:, 1], single)

    def test_misaligned_inputs_rejected(self):
        with pytest.raises(ValueError):
            compute_gae(np.zeros(3), np.zeros(4), np.zeros(3, dtype=bool), 0.99, 0.95)


class TestPPO:
    def test_clipped_surrogate(self):
        objective, grad = clipped_surrogate(np.array([1.5, 0.5, 0.5, 1.5]), np.array([1.0, 1.0, -1.0, -1.0]), 0.2)
        np.testing.assert_allclose(objective, [1.2, 0.5, -0.8, -1.5])
        np.testing.assert_allclose(grad, [0.0, 1.0, 0.0, -1.0])

    def test_normalize_advantages(self):
        adv = normalize_advantages(np.array([1.0, 2.0, 3.0, 4.0]))
        assert adv.mean() == pytest.approx(0.0)
        assert adv.std() == pytest.approx(1.0, rel=1e-6)
        np.testing.assert_array_equal(normalize_advantages(np.array([2.0, 2.0])), [0.0, 0.0])

    def test_minibatches_partition_indices(self, rng):
        parts = minibatches(10, 3, rng)
        assert len(parts) == 3
        np.testing.assert_array_equal(np.sort(np.concatenate(parts)), np.arange(10))

    def test_update_raises_probability_of_advantaged_action(self, rng):
        space = ActionSpace(kind=ActionSpaceKind.DISCRETE, n=3)
        train = TrainConfig(lr=0.01, hidden_dim=8, entropy_coef=0.0)
        policy = PolicyNetwork(2, space, 1, train, rng)
        x = np.ones((20, 2))
        actions = np.array([0.0, 1.0] * 10).reshape(20, 1, 1)
        advantages = np.where(actions[:, 0, 0] == 0, 1.0, -1.0)
        before = policy.probs(x[:1])[0, 0, 0]
        batch = PPOBatch(x, actions, policy.log_prob(x, actions), advantages)
        loss_before = surrogate_loss(policy, batch, train.ppo_clip, train.entropy_coef)
        stats = ppo_update(policy, batch, train, rng)
        assert policy.probs(x[:1])[0, 0, 0] > before
        assert surrogate_loss(policy, batch, train.ppo_clip, train.entropy_coef) < loss_before
        assert stats.skipped == 0

    def test_non_finite_ratios_are_skipped(self, rng):
        space = ActionSpace(kind=ActionSpaceKind.DISCRETE, n=3)
        train = TrainConfig(hidden_dim=8, ppo_epochs=1)
        policy = PolicyNetwork(2, space, 1, train, rng)
        x = np.ones((4, 2))
        actions = np.zeros((4, 1, 1))
        old_logp = policy.log_prob(x, actions)
        old_logp[0, 0] = -np.inf
        stats = ppo_update(policy, PPOBatch(x, actions, old_logp, np.array([1.0, -1.0, 0.5, 0.0])), train, rng)
        assert stats.skipped == 1

    def test_mean_ratio_mode_for_multi_head(self, rng):
        space = ActionSpace(kind=ActionSpaceKind.DISCRETE, n=3)
        train = TrainConfig(hidden_dim=8, ppo_epochs=1)
        policy = PolicyNetwork(2, space, 3, train, rng)
        x = rng.standard_normal((6, 2))
        actions, logp = policy.sample(x, rng)
        stats = ppo_update(policy, PPOBatch(x, actions, logp, rng.standard_normal(6)), train, rng, ratio_mode="mean")
        assert stats.clip_fraction == 0.0
        assert stats.approx_kl == pytest.approx(0.0)

    def test_value_update_reduces_loss(self, rng):
        train = TrainConfig(lr=0.01, hidden_dim=16, ppo_epochs=50)
        critic = ValueNetwork(2, train, rng)
        x = rng.standard_normal((32, 2))
        targets = x[:, 0] - 2.0 * x[:, 1]
        initial = float(np.mean(0.5 * (critic.predict(x) - targets) ** 2))
        final = value_update(critic, x, targets, train, rng)
        assert final < initial
