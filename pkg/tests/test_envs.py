import math

import numpy as np
import pytest

from amilab.envs.export import export_trajectories
from amilab.envs.factory import make_env
from amilab.envs.gathergrid import GridState, gathergrid_rewards, gathergrid_step, validate_grid_actions
from amilab.envs.rendezvous import rendezvous_observe, rendezvous_reward, rendezvous_step, swarm_state
from amilab.exceptions import ProtocolError
from amilab.rl.rollout import RandomPolicy, collect_rollouts
from amilab.schemas.env import EnvConfig, GatherGridConfig, RendezvousConfig


class TestGatherGrid:
    def test_spec_dimensions(self, grid_env_config):
        spec = make_env(grid_env_config).spec
        assert spec.n_victims == 2
        assert spec.state_dim == 7
        assert spec.obs_dim == 6
        assert spec.action_space.n == 5

    def test_rewards_measure_spread_around_centroid(self):
        positions = np.array([[0, 0], [0, 2], [3, 3]])
        team, adversary = gathergrid_rewards(positions, victims=[0, 1])
        assert adversary == pytest.approx(2.0)
        centroid = positions.mean(axis=0)
        assert team == pytest.approx(-np.abs(positions - centroid).sum())

    def test_walls_and_edges_block_moves(self):
        config = GatherGridConfig(grid_size=3, n_agents=2, max_episode_len=10, walls=[(0, 1)])
        state = GridState(positions=np.array([[0, 0], [2, 2]]))
        # agent 0 moves east into the wall, agent 1 moves south off the grid
        new_state, _, _, done = gathergrid_step(state, np.array([3, 2]), config, adversary_slot=None)
        np.testing.assert_array_equal(new_state.positions, [[0, 0], [2, 2]])
        assert not done
        assert new_state.t == 1

    def test_victim_colocation_ends_episode(self):
        config = GatherGridConfig(grid_size=3, n_agents=3, max_episode_len=10)
        state = GridState(positions=np.array([[2, 2], [1, 1], [1, 2]]))
        # victims 1 and 2 meet on (1, 1); the adversary at slot 0 stays apart
        new_state, _, adversary, done = gathergrid_step(state, np.array([0, 0, 4]), config, adversary_slot=0)
        assert new_state.colocated and done
        assert adversary == 0.0

    def test_invalid_actions_rejected(self):
        with pytest.raises(ProtocolError):
            validate_grid_actions(np.array([0, 5]), 2)
        with pytest.raises(ProtocolError):
            validate_grid_actions(np.array([0.5, 1.0]), 2)
        with pytest.raises(ProtocolError):
            validate_grid_actions(np.array([0, 1, 2]), 2)

    def test_reset_is_deterministic_per_seed(self, grid_env_config):
        a, b = make_env(grid_env_config), make_env(grid_env_config)
        np.testing.assert_array_equal(a.reset(7)[0], b.reset(7)[0])

    def test_horizon_truncates(self):
        config = EnvConfig(gathergrid=GatherGridConfig(grid_size=7, n_agents=2, max_episode_len=2))
        env = make_env(config, adversary_slot=None)
        env.reset(0)
        env.state = GridState(positions=np.array([[0, 0], [6, 6]]))
        first = env.step(np.array([0, 0]))
        second = env.step(np.array([0, 0]))
        assert not first.done
        assert second.done and second.info["truncated"]

    def test_adversary_reward_flips_team_objective_for_victims(self, grid_env_config):
        env = make_env(grid_env_config, adversary_slot=1)
        env.reset(3)
        record = env.step(np.array([0, 0, 0]))
        assert record.adversary_slot == 1
        assert record.adversary_action == 0
        assert record.victim_actions.shape == (2,)
        assert record.adversary_reward >= 0.0
        assert record.team_reward <= 0.0


class TestRendezvous:
    def test_spec_dimensions(self):
        env = make_env(EnvConfig(name="rendezvous", rendezvous=RendezvousConfig(n_agents=5)))
        spec = env.spec
        assert spec.state_dim == 10 + 40
        assert spec.obs_dim == 20
        assert spec.action_space.dim == 2
        assert spec.action_space.low == -6.0 and spec.action_space.high == 6.0

    def test_swarm_state_matrices(self):
        state = swarm_state(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.zeros(3))
        np.testing.assert_allclose(state.distances, state.distances.T)
        assert state.distances[1, 2] == pytest.approx(math.sqrt(2.0))
        assert state.angles[0, 2] == pytest.approx(math.pi / 2)
        assert state.angles[1, 0] == pytest.approx(math.pi)
        np.testing.assert_array_equal(np.diag(state.angles), 0.0)

    def test_observation_layout(self):
        state = swarm_state(np.array([[0.0, 0.0], [1.0, 0.0]]), np.zeros(2))
        obs = rendezvous_observe(state, 0)
        # distance, sin and cos of the bearing to the other robot, then of its bearing back
        np.testing.assert_allclose(obs, [1.0, 0.0, 1.0, 0.0, -1.0], atol=1e-12)

    def test_coincident_robots_have_zero_distance(self):
        state = swarm_state(np.array([[2.0, 2.0], [2.0, 2.0], [0.0, 1.0]]), np.zeros(3))
        assert rendezvous_observe(state, 1)[0] == 0.0

    def test_observation_matches_trigonometry(self, rng):
        positions = rng.uniform(0, 5, size=(4, 2))
        headings = rng.uniform(-np.pi, np.pi, size=4)
        obs = rendezvous_observe(swarm_state(positions, headings), 2)
        others = [0, 1, 3]
        delta = positions[others] - positions[2]
        theta = np.arctan2(delta[:, 1], delta[:, 0]) - headings[2]
        phi = np.arctan2(-delta[:, 1], -delta[:, 0]) - headings[others]
        expected = np.concatenate(
            [np.linalg.norm(delta, axis=1), np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)]
        )
        np.testing.assert_allclose(obs, expected, atol=1e-12)

    def test_equal_wheel_speeds_drive_straight(self):
        config = RendezvousConfig(n_agents=2)
        state = swarm_state(np.array([[1.0, 1.0], [0.5, 0.5]]), np.array([0.0, math.pi / 2]))
        new_state, clipped = rendezvous_step(state, np.array([[5.0, 5.0], [0.0, 0.0]]), config)
        assert not clipped
        step = config.wheel_radius * 5.0 * config.dt
        np.testing.assert_allclose(new_state.positions[0], [1.0 + step, 1.0])
        np.testing.assert_allclose(new_state.positions[1], [0.5, 0.5])
        np.testing.assert_allclose(new_state.headings, state.headings)

    def test_out_of_box_actions_are_clipped(self):
        config = RendezvousConfig(n_agents=2)
        state = swarm_state(np.array([[1.0, 1.0], [0.5, 0.5]]), np.zeros(2))
        _, clipped = rendezvous_step(state, np.array([[9.0, 0.0], [0.0, 0.0]]), config)
        assert clipped

    def test_reward_components(self):
        state = swarm_state(np.array([[0.0, 0.0], [3.0, 4.0]]), np.zeros(2))
        actions = np.array([[3.0, 4.0], [0.0, 0.0]])
        r, r_d, r_c = rendezvous_reward(state, actions, control_penalty=0.1)
        assert r_d == pytest.approx(-5.0)
        assert r_c == pytest.approx(5.0)
        assert r == pytest.approx(-5.5)

    def test_adversary_reward_is_distance_sum(self, swarm_env_config):
        env = make_env(swarm_env_config)
        env.reset(1)
        record = env.step(np.zeros((3, 2)))
        assert record.adversary_reward == pytest.approx(-record.info["r_d"])

    def test_mean_pairwise_distance(self, swarm_env_config):
        env = make_env(swarm_env_config)
        env.reset(0)
        env.state = swarm_state(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.zeros(3))
        assert env.mean_pairwise_distance() == pytest.approx((2.0 + math.sqrt(2.0)) / 3.0)


class TestRollouts:
    def test_collect_masks_finished_columns(self, grid_env_config, grid_victims, rng):
        envs = [make_env(grid_env_config) for _ in range(3)]
        buffer = collect_rollouts(envs, [1, 2, 3], grid_victims, rng)
        assert buffer.mask.shape == (5, 3)
        assert buffer.actions.shape == (5, 3, 3, 1)
        lengths = buffer.episode_lengths()
        for k in range(3):
            assert buffer.mask[: lengths[k], k].all()
            assert not buffer.mask[lengths[k]:, k].any()
            assert buffer.dones[lengths[k] - 1, k]

    def test_collection_is_reproducible(self, grid_env_config, grid_victims):
        def collect():
            envs = [make_env(grid_env_config) for _ in range(2)]
            return collect_rollouts(
                envs, [5, 6], grid_victims, np.random.default_rng(3),
                adversary=RandomPolicy(envs[0].spec.action_space), adversary_slot=0,
            )

        a, b = collect(), collect()
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.adv_rewards, b.adv_rewards)

    def test_adversary_requires_slot(self, grid_env_config, grid_victims, rng):
        envs = [make_env(grid_env_config)]
        with pytest.raises(ValueError):
            collect_rollouts(envs, [1], grid_victims, rng, adversary_present=[True])

    def test_export_trajectories(self, tmp_path, grid_env_config, grid_victims, rng):
        envs = [make_env(grid_env_config) for _ in range(2)]
        buffer = collect_rollouts(envs, [1, 2], grid_victims, rng, keep_records=True)
        path = export_trajectories(tmp_path / "traj.csv", enumerate(buffer.records))
        lines = path.read_text().strip().splitlines()
        assert lines[0].split(",")[:3] == ["episode", "t", "agent"]
        assert len(lines) == 1 + buffer.n_valid * 3
