import pandas as pd
import pytest

from amilab.commands.replay import replay_argv
from amilab.main import main
from amilab.services.run_service import load_manifest

TINY = [
    "env.gathergrid.grid_size=4",
    "env.gathergrid.n_agents=3",
    "env.gathergrid.max_episode_len=5",
    "victims.iterations=1",
    "victims.train.parallel_envs=2",
    "victims.train.hidden_dim=8",
    "victims.train.ppo_epochs=1",
    "attack.iterations=2",
    "attack.opp_epochs=1",
    "attack.train.parallel_envs=2",
    "attack.train.hidden_dim=8",
    "attack.train.ppo_epochs=1",
    "attack.train.eval_episodes=2",
    "defense.iterations=1",
    "detection.hidden_dim=4",
    "detection.epochs=1",
    "detection.batch_size=4",
    "detection.benign_episodes=2",
    "detection.attacked_episodes=2",
    "detection.heldout_episodes=2",
]


def tiny_args(*args):
    out = list(args)
    for item in TINY:
        out += ["--set", item]
    return out + ["--no-registry"]


@pytest.fixture(scope="module")
def lab(tmp_path_factory):
    root = tmp_path_factory.mktemp("lab")
    assert main(tiny_args("train-victims", "--out", str(root), "--seeds", "0,1")) == 0
    assert main(tiny_args("attack", "--out", str(root), "--seeds", "0,1")) == 0
    assert main(tiny_args("attack", "--out", str(root), "--seeds", "0,1", "--method", "adv-policy")) == 0
    return root


class TestCommands:
    def test_toy(self, tmp_path):
        assert main(["toy", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "toy" / "toy_example.csv").exists()

    def test_pipeline_layout(self, lab):
        manifest = load_manifest(lab / "attack" / "ami" / "seed1")
        assert manifest.label == "ami" and manifest.seed == 1
        assert manifest.extra["audit_violations"] == 0
        assert manifest.extra["inputs"]["--victims"].endswith("victims.ami")
        assert set(manifest.controls) == {"random_adversary", "no_attack"}
        assert load_manifest(lab / "attack" / "adv_policy" / "seed0").config["attack"]["method"] == "adv_policy"

    def test_missing_victims_exit_code(self, tmp_path):
        assert main(tiny_args("attack", "--out", str(tmp_path), "--seed", "0")) == 2

    def test_unknown_config_key_exit_code(self, tmp_path):
        assert main(["attack", "--out", str(tmp_path), "--set", "attack.lamda=1", "--no-registry"]) == 2

    def test_report(self, lab):
        assert main(["report", "--out", str(lab), "--baseline", "adv_policy"]) == 0
        summary = pd.read_csv(lab / "report" / "summary.csv")
        assert sorted(summary["method"]) == ["adv_policy", "ami"]
        assert "| ami | adv_policy | 2 |" in (lab / "report" / "report.md").read_text()

    def test_lambda_sweep(self, lab):
        assert main(tiny_args("ablate", "--out", str(lab), "--seeds", "0", "--lambda-sweep", "0,0.1")) == 0
        assert load_manifest(lab / "ablate" / "lambda" / "lambda_0" / "seed0").config["attack"]["ami_lambda"] == 0.0
        assert (lab / "ablate" / "lambda" / "lambda_0.1" / "seed0" / "metrics.csv").exists()

    def test_sweep_needs_exactly_one_axis(self, lab):
        assert main(tiny_args("ablate", "--out", str(lab), "--seeds", "0")) == 2

    def test_defend_then_reattack(self, lab):
        assert main(tiny_args("defend", "--out", str(lab), "--seed", "0", "--mode", "at")) == 0
        at = load_manifest(lab / "defend" / "at" / "seed0")
        assert set(at.controls) == {"pre_at_attack", "no_attack", "pre_at_no_attack"}
        assert main(tiny_args("defend", "--out", str(lab), "--seed", "0", "--mode", "pos-ami")) == 0
        rows = load_manifest(lab / "defend" / "pos-ami" / "seed0").extra["rows"]
        assert [r["slot"] for r in rows] == [1, 2]

    def test_detect(self, lab):
        assert main(tiny_args("detect", "--out", str(lab), "--seed", "0", "--signal", "state")) == 0
        manifest = load_manifest(lab / "detect" / "state" / "seed0")
        assert "accuracy" in manifest.metric_files
        assert set(manifest.extra["datasets"]) == {"train_dataset", "heldout_dataset"}


class TestReplay:
    def test_argv_rebuilt_from_manifest(self, lab, tmp_path):
        manifest = load_manifest(lab / "attack" / "adv_policy" / "seed1")
        argv = replay_argv(manifest, tmp_path / "cfg.json", tmp_path)
        assert argv[0] == "attack"
        assert "--set" not in argv and "--seeds" not in argv
        assert argv[argv.index("--seed") + 1] == "1"
        assert argv[argv.index("--method") + 1] == "adv-policy"
        assert argv[argv.index("--label") + 1] == "adv_policy"
        assert "--victims" in argv

    def test_attack_replay_reproduces_metrics(self, lab, tmp_path):
        run_dir = lab / "attack" / "ami" / "seed0"
        assert main(["replay", str(run_dir), "--out", str(tmp_path), "--no-registry"]) == 0
        replayed = tmp_path / "attack" / "ami" / "seed0"
        assert (replayed / "metrics.csv").read_bytes() == (run_dir / "metrics.csv").read_bytes()
        assert (replayed / "trajectories.csv").read_bytes() == (run_dir / "trajectories.csv").read_bytes()

    def test_victim_replay(self, lab, tmp_path):
        assert main(["replay", str(lab / "victims" / "seed1" / "manifest.json"), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "victims" / "seed1" / "victims.ami").exists()

    def test_tampered_checkpoint_fails(self, lab, tmp_path):
        source = lab / "attack" / "ami" / "seed1"
        copy = tmp_path / "copy"
        copy.mkdir()
        for f in source.iterdir():
            (copy / f.name).write_bytes(f.read_bytes())
        (copy / "adversary.ami").write_bytes(b"x")
        assert main(["replay", str(copy), "--out", str(tmp_path / "out"), "--no-registry"]) == 2
