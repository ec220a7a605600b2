import numpy as np
import pytest

from amilab.envs.factory import make_env
from amilab.exceptions import DivergenceError, NumericError
from amilab.services import victim_service
from amilab.services.activity_service import ActivityService
from amilab.services.victim_service import VictimPolicySet, VictimTrainer, train_victims
from amilab.utils.csv_writer import read_rows


class TestVictimPolicySet:
    def test_shared_actor_gets_slot_suffix(self, grid_env_config, tiny_train):
        spec = make_env(grid_env_config).spec
        victims = VictimPolicySet(spec, tiny_train, np.random.default_rng(0))
        assert len(victims.actors) == 1
        inputs = victims.actor_input(np.zeros(spec.obs_dim), 2)
        assert inputs.shape == (1, spec.obs_dim + spec.n_agents)
        np.testing.assert_array_equal(inputs[0, spec.obs_dim:], [0.0, 0.0, 1.0])

    def test_independent_actors(self, grid_env_config, tiny_train):
        spec = make_env(grid_env_config).spec
        victims = VictimPolicySet(spec, tiny_train, np.random.default_rng(0), share_parameters=False)
        assert len(victims.actors) == spec.n_agents
        assert victims.actor_for(1) is victims.actors[1]
        assert victims.actor_input(np.zeros(spec.obs_dim), 1).shape == (1, spec.obs_dim)

    def test_copy_is_unfrozen_and_independent(self, grid_victims):
        clone = grid_victims.copy()
        assert grid_victims.frozen and not clone.frozen
        assert clone.checksum() == grid_victims.checksum()
        clone.actors[0].params["victim/actor/W0"] = np.zeros_like(clone.actors[0].params["victim/actor/W0"])
        assert clone.checksum() != grid_victims.checksum()
        grid_victims.verify_frozen()


class TestTrainVictims:
    def test_same_seed_gives_identical_curves(self, grid_env_config, victim_config):
        a, curve_a = train_victims(grid_env_config, victim_config, 7)
        b, curve_b = train_victims(grid_env_config, victim_config, 7)
        assert [r.reward_mean for r in curve_a] == [r.reward_mean for r in curve_b]
        assert [r.policy_loss for r in curve_a] == [r.policy_loss for r in curve_b]
        assert a.checksum() == b.checksum()

    def test_different_seeds_differ(self, grid_env_config, victim_config):
        a, _ = train_victims(grid_env_config, victim_config, 1)
        b, _ = train_victims(grid_env_config, victim_config, 2)
        assert a.checksum() != b.checksum()

    def test_outputs_and_checkpoint_round_trip(self, tmp_path, grid_env_config, victim_config):
        events = ActivityService("victims")
        victims, curve = train_victims(grid_env_config, victim_config, 0, out_dir=tmp_path, events=events)
        assert victims.frozen
        rows = read_rows(tmp_path / "learning_curve.csv")
        assert list(rows["iteration"]) == [0, 1]
        assert list(rows["env_steps"]) == [r.env_steps for r in curve]
        assert curve[1].env_steps > curve[0].env_steps
        spec = make_env(grid_env_config).spec
        loaded = VictimPolicySet.load(tmp_path / "victims.ami", spec, victim_config.train)
        assert loaded.checksum() == victims.checksum()
        assert [e.event_type for e in events.events] == ["victim_update", "victim_update", "victims_frozen"]

    def test_independent_actors_train(self, grid_env_config, victim_config):
        config = victim_config.model_copy(update={"iterations": 1, "share_parameters": False})
        victims, curve = train_victims(grid_env_config, config, 0)
        assert len(victims.actors) == 3
        assert len(curve) == 1

    def test_entropy_coefficient_changes_the_policy(self, grid_env_config, victim_config):
        def with_entropy(coef):
            train = victim_config.train.model_copy(update={"entropy_coef": coef})
            return victim_config.model_copy(update={"train": train})

        greedy, spread = with_entropy(0.0), with_entropy(0.5)
        a, _ = train_victims(grid_env_config, greedy, 0)
        b, _ = train_victims(grid_env_config, spread, 0)
        assert a.checksum() != b.checksum()

    def test_continuous_victims_train(self, swarm_env_config, victim_config):
        victims, curve = train_victims(swarm_env_config, victim_config.model_copy(update={"iterations": 1}), 0)
        assert victims.frozen
        assert np.isfinite(curve[0].reward_mean)

    def test_numeric_failure_becomes_divergence(self, grid_env_config, victim_config, monkeypatch):
        def explode(*args, **kwargs):
            raise NumericError("Non-finite gradient", block="victim/critic/W0")

        monkeypatch.setattr(victim_service, "value_update", explode)
        trainer = VictimTrainer(grid_env_config, victim_config, 0)
        with pytest.raises(DivergenceError) as err:
            trainer.iteration(0)
        assert err.value.context["iteration"] == 0
        assert err.value.context["block"] == "victim/critic/W0"
