"""Desk-scale directional experiments. Deselected by default; run with ``pytest -m slow``."""
import numpy as np
import pytest

from amilab.envs.factory import make_env
from amilab.rl.rollout import RandomPolicy, collect_rollouts
from amilab.schemas.attack import AttackConfig, AttackMethod
from amilab.schemas.defense import DualTrainingConfig
from amilab.schemas.env import EnvConfig, GatherGridConfig, RendezvousConfig
from amilab.schemas.experiment import VictimTrainingConfig
from amilab.schemas.train import TrainConfig
from amilab.services.attack_service import run_attack
from amilab.services.defense_service import dual_adversarial_train
from amilab.services.evaluation_service import evaluate_attack
from amilab.services.opponent_model import OpponentModel
from amilab.services.victim_service import train_victims
from amilab.utils.seeding import episode_seeds
from amilab.utils.stats import paired_tests

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2, 3, 4]

GRID = EnvConfig(name="gathergrid", gathergrid=GatherGridConfig(grid_size=7, n_agents=3, max_episode_len=25))
SWARM = EnvConfig(name="rendezvous", rendezvous=RendezvousConfig(n_agents=5, max_episode_len=50))
TRAIN = TrainConfig(parallel_envs=8, hidden_dim=32, eval_episodes=20)
SWARM_TRAIN = TrainConfig(lr=3e-4, parallel_envs=8, hidden_dim=32, eval_episodes=20)
SCRIPTED = make_env(EnvConfig(name="gathergrid")).spec


def kl_divergence(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.sum(p * (np.log(p) - np.log(q)), axis=-1)


def degraded(attacked: float, clean: float, fraction: float = 0.3) -> bool:
    """Team rewards are negative spreads; attacked must sit `fraction` of |clean| below clean."""
    return attacked <= clean - fraction * abs(clean)


@pytest.fixture(scope="module")
def grid_victims_by_seed():
    return {seed: train_victims(GRID, VictimTrainingConfig(iterations=40, train=TRAIN), seed)[0] for seed in SEEDS}


@pytest.fixture(scope="module")
def swarm_victims_by_seed():
    config = VictimTrainingConfig(iterations=60, train=SWARM_TRAIN)
    return {seed: train_victims(SWARM, config, seed)[0] for seed in SEEDS}


def adversary_rewards(env, attack, victims_by_seed):
    return [run_attack(env, attack, victims_by_seed[seed], seed, with_controls=False).evaluation.adv_reward_mean
            for seed in SEEDS]


class TestOpponentModelConvergence:
    def fit_scripted(self, table, n=6000):
        spec = SCRIPTED
        train = TrainConfig(lr=0.005, hidden_dim=32, minibatch_num=8)
        model = OpponentModel(spec, train, np.random.default_rng(0), epochs=80)
        rng = np.random.default_rng(1)
        states = rng.random((n, spec.state_dim))
        victim = rng.integers(0, 5, size=(n, spec.n_victims, 1)).astype(float)
        adversary = rng.integers(0, 5, size=(n, 1)).astype(float)
        ids = adversary[:, 0].astype(int)
        targets = np.stack(
            [[rng.choice(5, p=table[i, a]) for i in range(spec.n_victims)] for a in ids]
        )[..., None].astype(float)
        model.fit_arrays(model.features(states, victim, adversary), targets, rng)

        test_adv = rng.integers(0, 5, size=(500, 1)).astype(float)
        test_victim = rng.integers(0, 5, size=(500, spec.n_victims, 1)).astype(float)
        predicted = model.predict_probs(rng.random((500, spec.state_dim)), test_victim, test_adv)
        truth = table[:, test_adv[:, 0].astype(int)].transpose(1, 0, 2)
        return predicted, truth

    def test_scripted_stochastic_victims(self):
        # victim i plays (adversary action + i) mod 5 with probability 0.6, otherwise uniformly
        table = np.full((SCRIPTED.n_victims, 5, 5), 0.1)
        for i in range(SCRIPTED.n_victims):
            for a in range(5):
                table[i, a, (a + i) % 5] = 0.6
        predicted, truth = self.fit_scripted(table)
        assert kl_divergence(truth, predicted).mean() < 0.05

    def test_scripted_deterministic_victims(self):
        table = np.zeros((SCRIPTED.n_victims, 5, 5))
        for i in range(SCRIPTED.n_victims):
            for a in range(5):
                table[i, a, (a + i) % 5] = 1.0
        predicted, truth = self.fit_scripted(table)
        assert np.sum(predicted * truth, axis=-1).mean() > 0.95


class TestVictimTraining:
    def test_gathergrid_victims_beat_random_victims(self, grid_victims_by_seed):
        action_space = make_env(GRID).spec.action_space
        for seed in SEEDS:
            trained = evaluate_attack(GRID, grid_victims_by_seed[seed], None, 0, 20, seed)
            uniform = evaluate_attack(GRID, RandomPolicy(action_space), None, 0, 20, seed)
            assert 3.0 * abs(trained.team_reward_mean) <= abs(uniform.team_reward_mean)

    def test_rendezvous_victims_close_the_swarm(self, swarm_victims_by_seed):
        for seed in SEEDS:
            seeds = episode_seeds(seed, "eval", 10)
            starts = [make_env(SWARM, adversary_slot=None) for _ in seeds]
            for env, s in zip(starts, seeds):
                env.reset(s)
            envs = [make_env(SWARM, adversary_slot=None) for _ in seeds]
            collect_rollouts(envs, seeds, swarm_victims_by_seed[seed], np.random.default_rng(seed), deterministic=True)
            initial = np.mean([env.mean_pairwise_distance() for env in starts])
            final = np.mean([env.mean_pairwise_distance() for env in envs])
            assert final < 0.25 * initial


class TestGatherGridAttack:
    def test_ami_adversary_beats_baselines(self, grid_victims_by_seed):
        attack = AttackConfig(method=AttackMethod.AMI, iterations=40, train=TRAIN)
        baseline = attack.model_copy(update={"method": AttackMethod.ADV_POLICY})
        trained, random_adv, team, clean = [], [], [], []
        for seed in SEEDS:
            result = run_attack(GRID, attack, grid_victims_by_seed[seed], seed)
            trained.append(result.evaluation.adv_reward_mean)
            random_adv.append(result.controls["random_adversary"].adv_reward_mean)
            team.append(result.evaluation.team_reward_mean)
            clean.append(result.controls["no_attack"].team_reward_mean)
        adv_policy = adversary_rewards(GRID, baseline, grid_victims_by_seed)
        assert np.mean(trained) > np.mean(random_adv)
        assert paired_tests(trained, random_adv, alternative="greater").p_t < 0.1
        assert np.mean(trained) > np.mean(adv_policy)
        assert degraded(np.mean(team), np.mean(clean))

    def test_influence_ablations(self, grid_victims_by_seed):
        def with_method(method, ami_lambda=0.05):
            return AttackConfig(method=method, ami_lambda=ami_lambda, iterations=40, train=TRAIN)

        ami = adversary_rewards(GRID, with_method(AttackMethod.AMI), grid_victims_by_seed)
        bilateral = adversary_rewards(GRID, with_method(AttackMethod.AMI_BILATERAL), grid_victims_by_seed)
        assert np.mean(bilateral) <= np.mean(ami)

        plain = np.mean(adversary_rewards(GRID, with_method(AttackMethod.AMI, 0.0), grid_victims_by_seed))
        swept = [
            np.mean(adversary_rewards(GRID, with_method(AttackMethod.AMI, lam), grid_victims_by_seed))
            for lam in (0.01, 0.05, 0.1)
        ]
        assert max(swept) > plain


class TestRendezvousAttack:
    def test_ami_adversary_beats_baselines(self, swarm_victims_by_seed):
        attack = AttackConfig(method=AttackMethod.AMI, iterations=40, train=SWARM_TRAIN)
        baseline = attack.model_copy(update={"method": AttackMethod.ADV_POLICY})
        trained, random_adv = [], []
        for seed in SEEDS:
            result = run_attack(SWARM, attack, swarm_victims_by_seed[seed], seed)
            trained.append(result.evaluation.adv_reward_mean)
            random_adv.append(result.controls["random_adversary"].adv_reward_mean)
        adv_policy = adversary_rewards(SWARM, baseline, swarm_victims_by_seed)
        assert paired_tests(trained, random_adv, alternative="greater").p_t < 0.1
        assert np.mean(trained) > np.mean(adv_policy)


class TestDualAdversarialTraining:
    def test_hardened_victims_resist_the_adversary(self, grid_victims_by_seed):
        attack = AttackConfig(method=AttackMethod.AMI, iterations=40, train=TRAIN)
        victim_config = VictimTrainingConfig(iterations=40, train=TRAIN)
        before, after, clean_before, clean_after = [], [], [], []
        for seed in SEEDS:
            victims = grid_victims_by_seed[seed]
            result = run_attack(GRID, attack, victims, seed)
            hardened = dual_adversarial_train(
                GRID, victim_config, DualTrainingConfig(mix=0.5, iterations=40), result.adversary, seed, victims=victims
            ).victims
            before.append(result.evaluation.adv_reward_mean)
            after.append(evaluate_attack(GRID, hardened, result.adversary, 0, 20, seed).adv_reward_mean)
            clean_before.append(result.controls["no_attack"].team_reward_mean)
            clean_after.append(evaluate_attack(GRID, hardened, None, 0, 20, seed).team_reward_mean)
        assert np.mean(after) < np.mean(before)
        assert abs(np.mean(clean_after) - np.mean(clean_before)) <= 0.15 * abs(np.mean(clean_before))
