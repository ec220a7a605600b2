"""Supervised model of the victims' next actions, p(a_v[t+1] | s_t, a_v[t], a_adv[t]).

Inputs are the global state, the encoded victim actions and, in its own slot, the encoded
adversary action, so the adversary action can be swapped for counterfactual queries.
"""
import logging
from typing import List, Optional

import numpy as np

from ..nn.distributions import ActionDistribution, Categorical, GaussianMixture
from ..rl.buffer import RolloutBuffer
from ..rl.policy import PolicyNetwork, encode_actions
from ..rl.ppo import minibatches
from ..schemas.env import PosgSpec
from ..schemas.train import TrainConfig

logger = logging.getLogger(__name__)

OPP_PREFIX = "opp/"


class OpponentModel:
    def __init__(self, spec: PosgSpec, train: TrainConfig, rng: np.random.Generator, epochs: int = 4):
        self.spec = spec
        self.train = train
        self.epochs = epochs
        self.space = spec.action_space
        self.n_victims = spec.n_victims
        enc = self.space.encoded_dim
        self.input_dim = spec.state_dim + self.n_victims * enc + enc
        self.network = PolicyNetwork(
            self.input_dim, self.space, self.n_victims, train, rng, prefix=OPP_PREFIX, lr=train.resolved_opp_lr
        )

    @property
    def params(self):
        return self.network.params

    def features(self, states: np.ndarray, victim_actions: np.ndarray, adv_actions: np.ndarray) -> np.ndarray:
        """Concatenate (B, S) states, (B, N_v, W) victim actions and (B, W) adversary actions."""
        states = np.atleast_2d(states)
        v = encode_actions(victim_actions, self.space)
        a = encode_actions(np.asarray(adv_actions, dtype=np.float64)[:, None, :], self.space)
        return np.concatenate([states, v, a], axis=1)

    def training_data(self, buffer: RolloutBuffer):
        sel = buffer.next_action_mask()
        states = buffer.states[sel]
        victim = buffer.victim_actions()[sel]
        adversary = buffer.adversary_actions()[sel]
        targets = buffer.next_victim_actions()[sel]
        return self.features(states, victim, adversary), targets

    def nll(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        """Mean negative log-likelihood per victim and sample."""
        if inputs.shape[0] == 0:
            return float("nan")
        return float(-self.network.log_prob(inputs, targets).mean())

    def fit(self, buffer: RolloutBuffer, rng: np.random.Generator) -> float:
        """Maximise the log-likelihood of logged next victim actions; returns the post-fit NLL."""
        inputs, targets = self.training_data(buffer)
        return self.fit_arrays(inputs, targets, rng)

    def fit_arrays(self, inputs: np.ndarray, targets: np.ndarray, rng: np.random.Generator) -> float:
        n = inputs.shape[0]
        if n == 0:
            logger.warning("Opponent model fit skipped: no (s, a, next victim action) triples")
            return float("nan")
        for _ in range(self.epochs):
            for idx in minibatches(n, self.train.minibatch_num, rng):
                coef = np.full((idx.size, self.n_victims), -1.0 / (idx.size * self.n_victims))
                grads = self.network.grad(inputs[idx], targets[idx], logp_coef=coef)
                self.network.apply_gradients(grads, self.train.max_grad_norm)
        return self.nll(inputs, targets)

    # Prediction

    def predict_probs(self, states, victim_actions, adv_actions) -> np.ndarray:
        """(B, N_v, A) next-action probabilities (discrete)."""
        return self.network.probs(self.features(states, victim_actions, adv_actions))

    def predict_gaussian(self, states, victim_actions, adv_actions):
        """Means (B, N_v, D) and log-std (N_v, D) (continuous)."""
        means, _ = self.network.gaussian_params(self.features(states, victim_actions, adv_actions))
        return means, self.network.params[self.network.log_std_name]

    def counterfactual_probs(self, states, victim_actions, adv_probs: np.ndarray) -> np.ndarray:
        """E over a_adv ~ pi_adv of p(.|s, a_v, a_adv) by exact enumeration; adv_probs is (B, A)."""
        adv_probs = np.atleast_2d(adv_probs)
        batch = adv_probs.shape[0]
        expected = np.zeros((batch, self.n_victims, self.space.n))
        for a in range(self.space.n):
            substitute = np.full((batch, 1), float(a))
            expected += adv_probs[:, a, None, None] * self.predict_probs(states, victim_actions, substitute)
        return expected

    def counterfactual_mixture(self, states, victim_actions, adv_samples: np.ndarray):
        """Mixture means (B, N_v, M, D) and log-std (N_v, D) for M sampled adversary actions (B, M, D)."""
        adv_samples = np.asarray(adv_samples, dtype=np.float64)
        n_samples = adv_samples.shape[1]
        means = []
        log_std = None
        for m in range(n_samples):
            mu, log_std = self.predict_gaussian(states, victim_actions, adv_samples[:, m])
            means.append(mu)
        return np.stack(means, axis=2), log_std

    def counterfactual_expectation(
        self,
        state: np.ndarray,
        victim_actions: np.ndarray,
        adversary_policy,
        adversary_obs: np.ndarray,
        rng: Optional[np.random.Generator] = None,
        n_samples: int = 8,
    ) -> List[ActionDistribution]:
        """Per-victim expected next-action distribution for one step.

        `adversary_policy` must expose `probs(obs)` for discrete spaces or `sample(obs, rng)` for
        continuous ones (a PolicyNetwork with one head does).
        """
        state = np.asarray(state, dtype=np.float64)[None, :]
        victim_actions = np.asarray(victim_actions, dtype=np.float64).reshape(1, self.n_victims, -1)
        obs = np.asarray(adversary_obs, dtype=np.float64)[None, :]
        if self.space.is_discrete:
            pi = adversary_policy.probs(obs)[:, 0]
            probs = self.counterfactual_probs(state, victim_actions, pi)[0]
            return [Categorical(p / p.sum()) for p in probs]
        rng = rng if rng is not None else np.random.default_rng(0)
        samples = np.stack(
            [adversary_policy.sample(obs, rng)[0][:, 0] for _ in range(n_samples)], axis=1
        )
        means, log_std = self.counterfactual_mixture(state, victim_actions, samples)
        weights = np.full(n_samples, 1.0 / n_samples)
        return [GaussianMixture(weights, means[0, i], log_std[i]) for i in range(self.n_victims)]
