import json
from pathlib import Path

import pytest

from amilab.exceptions import ConfigurationError
from amilab.schemas.attack import AttackMethod, DistanceMetric
from amilab.schemas.experiment import load_experiment, parse_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestExperimentConfig:
    def test_unknown_key_lists_valid_keys(self):
        with pytest.raises(ConfigurationError) as err:
            parse_experiment({"attack": {"lamda": 0.1}})
        message = str(err.value)
        assert "Unknown key 'attack.lamda'" in message
        assert "ami_lambda" in message and "metric" in message

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigurationError) as err:
            parse_experiment({"victim": {}})
        assert "Valid keys:" in str(err.value)
        assert "victims" in str(err.value)

    def test_defaults_follow_the_environment(self):
        grid = parse_experiment({})
        assert grid.attack.ami_lambda == 0.05
        assert grid.attack.metric == DistanceMetric.L1
        swarm = parse_experiment({"env": {"name": "rendezvous"}})
        assert swarm.attack.ami_lambda == 0.003
        assert swarm.attack.metric == DistanceMetric.PROB

    def test_continuous_preset_with_user_override(self):
        config = parse_experiment({"env": {"name": "rendezvous"}, "victims": {"train": {"parallel_envs": 4}}})
        assert config.victims.train.lr == 5e-5
        assert config.victims.train.huber_loss
        assert config.victims.train.parallel_envs == 4
        assert config.attack.train.lr == 5e-5

    def test_metric_must_fit_the_action_space(self):
        with pytest.raises(ConfigurationError):
            parse_experiment({"env": {"name": "rendezvous"}, "attack": {"metric": "l2"}})
        with pytest.raises(ConfigurationError):
            parse_experiment({"attack": {"metric": "l1_mean"}})

    def test_adversary_slot_range(self):
        with pytest.raises(ConfigurationError):
            parse_experiment({"attack": {"adversary_slot": 5}})

    def test_invalid_mix(self):
        with pytest.raises(ConfigurationError):
            parse_experiment({"defense": {"mix": 1.0}})


class TestLoadExperiment:
    def test_shipped_configs_parse(self):
        grid = load_experiment(CONFIG_DIR / "gathergrid.json")
        assert grid.env.gathergrid.n_agents == 5
        swarm = load_experiment(CONFIG_DIR / "rendezvous.json")
        assert swarm.attack.metric == DistanceMetric.PROB
        assert swarm.victims.train.parallel_envs == 16

    def test_dotted_overrides(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"attack": {"iterations": 10}}))
        config = load_experiment(path, {"attack.iterations": 3, "attack.method": "adv_policy", "env.gathergrid.grid_size": 5})
        assert config.attack.iterations == 3
        assert config.attack.method == AttackMethod.ADV_POLICY
        assert config.env.gathergrid.grid_size == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_experiment(tmp_path / "absent.json")

    def test_snapshot_round_trip(self):
        config = parse_experiment({"env": {"name": "rendezvous"}, "attack": {"iterations": 7}})
        again = parse_experiment(config.model_dump(mode="json"))
        assert again == config
