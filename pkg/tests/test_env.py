import numpy as np
import pytest

from hildrive.env import (
    DrivingEnv,
    EnvConfig,
    Observation,
    SceneLibrary,
    compute_reward,
)
from hildrive.errors import ConfigError, StateError
from hildrive.roadmap import LaneFragment, Obstacle, Pose, SceneMap, Spawn


def straight_scene(length=200.0, obstacles=()):
    pts = np.stack([np.linspace(0.0, length, int(length // 2) + 1),
                    np.zeros(int(length // 2) + 1)], axis=1)
    return SceneMap(
        lanes={"lane0": LaneFragment("lane0", pts)},
        edges=[],
        spawns=[Spawn(5.0, 0.0, 0.0, "lane0")],
        destination=Pose(length - 10.0, 0.0, 0.0),
        obstacles=list(obstacles),
        seed=0,
        blocks=["straight"],
    )


class FixtureLibrary:
    """Duck-typed stand-in for SceneLibrary serving one hand-built scene."""

    def __init__(self, scene):
        self.scene = scene

    def count(self, split):
        return 1

    def scene_seed(self, split, index):
        return 12345

    def get(self, split, index):
        return self.scene


def make_env(scene=None, **cfg):
    cfg.setdefault("traffic_per_100m", 0.0)
    config = EnvConfig(**cfg)
    lib = FixtureLibrary(scene if scene is not None else straight_scene())
    env = DrivingEnv(config, split="train", library=lib)
    return env


ZERO = np.zeros(2)
AHEAD = np.array([0.0, 1.0])


class TestConfig:
    def test_tick_ratio_must_be_integer(self):
        with pytest.raises(ConfigError):
            EnvConfig(physics_dt=0.1, control_dt=0.25)

    def test_dimensional_fields_positive(self):
        with pytest.raises(ConfigError):
            EnvConfig(v_max=0.0)
        with pytest.raises(ConfigError):
            EnvConfig(horizon=-1)

    def test_default_obs_dim(self):
        assert EnvConfig().obs_dim == 240 + 5 + 4

    def test_two_substeps_per_control_tick(self):
        assert EnvConfig().substeps == 2


class TestRewardArithmetic:
    CFG = EnvConfig()

    def test_progress_fixture(self):
        r = compute_reward(2.0, 11.11, "none", self.CFG)
        assert r == pytest.approx(2.05, abs=1e-12)

    def test_success_pays_exactly_ten(self):
        assert compute_reward(2.0, 11.11, "success", self.CFG) == 10.0

    def test_out_of_road_pays_minus_five(self):
        assert compute_reward(2.0, 11.11, "out-of-road", self.CFG) == -5.0

    def test_horizon_pays_zero(self):
        assert compute_reward(2.0, 11.11, "horizon", self.CFG) == 0.0

    def test_stationary_nonterminal_is_zero(self):
        assert compute_reward(0.0, 0.0, "none", self.CFG) == 0.0

    def test_unlocalized_drops_displacement_term(self):
        r = compute_reward(2.0, 11.11, "none", self.CFG, localized=False)
        assert r == pytest.approx(0.05, abs=1e-12)

    def test_optional_crash_penalty(self):
        r = compute_reward(2.0, 11.11, "none", self.CFG, crash_penalty=True)
        assert r == pytest.approx(2.05 - 5.0, abs=1e-12)


class TestStepBasics:
    def test_zero_action_standstill_stays_put(self):
        env = make_env()
        env.reset(0, 0)
        out = env.step(ZERO)
        assert abs(env.ego.x - 5.0) < 1e-9
        assert abs(env.ego.y) < 1e-9
        assert out.done is False
        assert out.cost == 0.0

    def test_brake_at_standstill_does_not_reverse(self):
        env = make_env()
        env.reset(0, 0)
        env.step(np.array([0.0, -1.0]))
        assert env.ego.speed == 0.0
        assert abs(env.ego.x - 5.0) < 1e-9

    def test_throttle_moves_forward(self):
        env = make_env()
        env.reset(0, 0)
        for _ in range(10):
            out = env.step(AHEAD)
        assert env.ego.x > 5.5
        assert env.ego.speed > 0.0
        assert out.reward > 0.0

    def test_speed_clamps_at_v_max(self):
        env = make_env()
        env.reset(0, 0)
        for _ in range(200):
            if env.step(AHEAD).done:
                break
        assert env.ego.speed <= env.config.v_max + 1e-12

    def test_positive_steer_turns_clockwise(self):
        env = make_env()
        env.reset(0, 0)
        for _ in range(5):
            env.step(np.array([1.0, 1.0]))
        assert env.ego.heading < 0.0
        env.reset(0, 0)
        for _ in range(5):
            env.step(np.array([-1.0, 1.0]))
        assert env.ego.heading > 0.0

    def test_heading_stays_normalized(self):
        env = make_env(horizon=300)
        env.reset(0, 0)
        for _ in range(120):
            out = env.step(np.array([1.0, 0.3]))
            assert -np.pi < env.ego.heading <= np.pi
            if out.done:
                break

    def test_step_after_done_raises(self):
        env = make_env(horizon=2)
        env.reset(0, 0)
        env.step(ZERO)
        out = env.step(ZERO)
        assert out.done and out.termination == "horizon"
        with pytest.raises(StateError):
            env.step(ZERO)

    def test_bad_action_shape_rejected(self):
        env = make_env()
        env.reset(0, 0)
        with pytest.raises(StateError):
            env.step(np.zeros(3))


class TestTermination:
    def test_horizon_tag_and_zero_reward(self):
        env = make_env(horizon=4)
        env.reset(0, 0)
        outs = [env.step(ZERO) for _ in range(4)]
        assert [o.termination for o in outs] == ["none"] * 3 + ["horizon"]
        assert outs[-1].reward == 0.0

    def test_success_on_reaching_destination(self):
        env = make_env()
        env.reset(0, 0)
        done_out = None
        for _ in range(400):
            out = env.step(AHEAD)
            if out.done:
                done_out = out
                break
        assert done_out is not None
        assert done_out.termination == "success"
        assert done_out.reward == 10.0

    def test_hard_steer_leaves_the_road(self):
        env = make_env()
        env.reset(0, 0)
        out = None
        for _ in range(200):
            out = env.step(np.array([1.0, 1.0]))
            if out.done:
                break
        assert out.termination == "out-of-road"
        assert out.reward == -5.0

    def test_tags_mutually_exclusive_and_done_consistent(self):
        env = make_env(horizon=50)
        env.reset(0, 0)
        for _ in range(50):
            out = env.step(AHEAD)
            assert (out.termination == "none") == (not out.done)
            if out.done:
                break


class TestCollisionsAndFlags:
    def test_obstacle_overlap_costs_but_does_not_terminate(self):
        scene = straight_scene(obstacles=[Obstacle(30.0, 0.0, 1.0)])
        env = make_env(scene)
        env.reset(0, 0)
        costs = []
        for _ in range(120):
            out = env.step(AHEAD)
            costs.append(out.cost)
            if out.flags["crash-obstacle"]:
                assert out.done is False
            if env.ego.x > 45.0:
                break
        assert sum(costs) >= 2.0  # several overlap ticks while passing through

    def test_sidewalk_flag_costs_without_termination(self):
        env = make_env()
        env.reset(0, 0)
        env.ego.y = -2.8  # body over the right boundary, center still on-road
        out = env.step(ZERO)
        assert out.flags["crash-sidewalk"] is True
        assert out.cost >= 1.0
        assert out.done is False

    def test_yellow_line_flag_is_costless(self):
        env = make_env()
        env.reset(0, 0)
        env.ego.y = 2.8
        out = env.step(ZERO)
        assert out.flags["on-yellow-line"] is True
        assert out.cost == 0.0
        assert out.done is False

    def test_episode_cost_equals_sum_of_tick_costs(self):
        scene = straight_scene(obstacles=[Obstacle(30.0, 0.0, 1.0)])
        env = make_env(scene)
        env.reset(0, 0)
        total = 0.0
        for _ in range(100):
            out = env.step(AHEAD)
            total += out.cost
            if out.done:
                break
        assert env.episode_cost == pytest.approx(total)

    def test_ramming_traffic_costs_and_continues(self):
        # Straight road, slow traffic ahead, ego at full throttle: overlap
        # ticks must accrue cost without ending the episode.
        env = make_env(traffic_per_100m=2.0)
        env.reset(0, 0)
        assert len(env.traffic) >= 1
        crash_ticks = 0
        for _ in range(400):
            out = env.step(AHEAD)
            if out.flags["crash-vehicle"]:
                crash_ticks += 1
                assert out.done is False
            if out.done:
                break
        assert crash_ticks >= 1


class TestTraffic:
    def test_traffic_tracks_centerline(self):
        env = make_env(traffic_per_100m=2.0)
        env.reset(0, 0)
        # Fixture scene is the straight lane along y = 0.
        for _ in range(80):
            env.step(ZERO)
            for veh in env.traffic:
                if veh.alive:
                    assert abs(veh.y) < 1e-9
                    assert 0.0 <= veh.speed <= env.config.v_max

    def test_traffic_brakes_behind_stopped_ego(self):
        env = make_env(traffic_per_100m=1.0)
        env.reset(0, 0)
        veh = env.traffic[0]
        # Park the ego a few meters ahead of the traffic vehicle.
        env.ego.x = veh.route_s + 8.0
        env.ego.speed = 0.0
        v0 = veh.speed
        for _ in range(20):
            env.step(ZERO)
        assert veh.speed < max(0.2, v0)
        assert veh.route_s < env.ego.x - env.config.body_length / 2.0

    def test_traffic_despawns_at_route_end(self):
        env = make_env(traffic_per_100m=1.0)
        env.reset(0, 0)
        veh = env.traffic[0]
        veh.route_s = env.route.length - 1.0
        env.step(ZERO)
        assert veh.alive is False


class TestObservation:
    def test_shapes_and_bounds(self):
        env = make_env()
        obs = env.reset(0, 0)
        assert isinstance(obs, Observation)
        assert obs.lidar.shape == (240,)
        assert obs.ego.shape == (5,)
        assert obs.nav.shape == (4,)
        v = obs.vector()
        assert v.shape == (249,)
        assert np.all(np.isfinite(v))
        assert np.all(obs.lidar >= 0.0) and np.all(obs.lidar <= 1.0)

    def test_ego_summary_at_spawn(self):
        env = make_env()
        obs = env.reset(0, 0)
        np.testing.assert_allclose(obs.ego, [0.0, 0.0, 0.0, 0.5, 0.5], atol=1e-9)

    def test_nav_points_at_next_checkpoints(self):
        env = make_env()
        obs = env.reset(0, 0)
        # Spawn at s=5; checkpoints at 50, 100, ... First one 45 m dead ahead.
        np.testing.assert_allclose(obs.nav[0], 0.9, atol=1e-9)
        np.testing.assert_allclose(obs.nav[1], 0.0, atol=1e-9)
        assert obs.nav[2] == 1.0  # second checkpoint clipped at range

    def test_lateral_offset_moves_boundary_distances(self):
        env = make_env()
        env.reset(0, 0)
        env.ego.y = 1.4  # 1.4 m to the left
        obs = env.step(ZERO).observation
        assert obs.ego[3] == pytest.approx((3.5 - 1.4) / 7.0, abs=1e-6)
        assert obs.ego[4] == pytest.approx((3.5 + 1.4) / 7.0, abs=1e-6)


class TestDeterminism:
    def _run(self, seed_actions=0, noise=0.0, n=40):
        cfg = dict(lidar_noise=noise, traffic_per_100m=1.5)
        config = EnvConfig(**cfg)
        env = DrivingEnv(config, split="train", library=SceneLibrary(config))
        obs = [env.reset(0, 7).vector()]
        rng = np.random.default_rng(seed_actions)
        rewards = []
        for _ in range(n):
            a = rng.uniform(-1, 1, size=2)
            out = env.step(a)
            obs.append(out.observation.vector())
            rewards.append(out.reward)
            if out.done:
                break
        return np.array(obs), np.array(rewards)

    def test_bit_identical_replay(self):
        a_obs, a_r = self._run()
        b_obs, b_r = self._run()
        assert np.array_equal(a_obs, b_obs)
        assert np.array_equal(a_r, b_r)

    def test_bit_identical_with_seeded_noise(self):
        a_obs, _ = self._run(noise=0.01)
        b_obs, _ = self._run(noise=0.01)
        assert np.array_equal(a_obs, b_obs)

    def test_different_episode_seed_changes_world(self):
        config = EnvConfig(traffic_per_100m=1.5)
        env = DrivingEnv(config, library=SceneLibrary(config))
        env.reset(0, 1)
        placement_a = [(v.route_s, v.target_speed) for v in env.traffic]
        env.reset(0, 2)
        placement_b = [(v.route_s, v.target_speed) for v in env.traffic]
        assert placement_a != placement_b

    def test_same_reset_same_first_observation(self):
        config = EnvConfig(traffic_per_100m=1.5)
        env = DrivingEnv(config, library=SceneLibrary(config))
        a = env.reset(1, 3).vector()
        b = env.reset(1, 3).vector()
        assert np.array_equal(a, b)


class TestStateCapture:
    def test_resume_reproduces_trajectory(self):
        config = EnvConfig(traffic_per_100m=1.5, lidar_noise=0.01)
        env_a = DrivingEnv(config, library=SceneLibrary(config))
        env_a.reset(0, 11)
        rng = np.random.default_rng(4)
        actions = rng.uniform(-1, 1, size=(25, 2))
        for a in actions[:10]:
            env_a.step(a)
        snapshot = env_a.get_state()

        env_b = DrivingEnv(config, library=SceneLibrary(config))
        env_b.set_state(snapshot)
        for a in actions[10:]:
            out_a = env_a.step(a)
            out_b = env_b.step(a)
            assert np.array_equal(out_a.observation.vector(),
                                  out_b.observation.vector())
            assert out_a.reward == out_b.reward
            assert out_a.done == out_b.done
            if out_a.done:
                break

    def test_state_roundtrip_is_json_safe(self):
        import json
        config = EnvConfig(traffic_per_100m=1.0)
        env = DrivingEnv(config, library=SceneLibrary(config))
        env.reset(0, 0)
        env.step(AHEAD)
        text = json.dumps(env.get_state())
        env.set_state(json.loads(text))
        assert env.tick == 1


class TestSplits:
    def test_wrong_split_scene_id_rejected(self):
        env = make_env()
        with pytest.raises(ConfigError):
            env.reset("test:0", 0)

    def test_scene_index_out_of_range(self):
        config = EnvConfig(n_train_scenes=2, traffic_per_100m=0.0)
        env = DrivingEnv(config, library=SceneLibrary(config))
        with pytest.raises(ConfigError):
            env.reset(5, 0)

    def test_train_and_test_scenes_disjoint(self):
        config = EnvConfig(n_train_scenes=6, n_test_scenes=6)
        lib = SceneLibrary(config)
        train = {lib.get("train", i).to_json() for i in range(6)}
        test = {lib.get("test", i).to_json() for i in range(6)}
        assert not (train & test)

    def test_scene_seeds_deterministic(self):
        config = EnvConfig()
        a = SceneLibrary(config)
        b = SceneLibrary(config)
        assert [a.scene_seed("train", i) for i in range(5)] == \
               [b.scene_seed("train", i) for i in range(5)]


class TestTrajectoryLog:
    def test_records_have_required_fields(self):
        env = make_env()
        env.reset(0, 0)
        env.step(AHEAD, intervention=True)
        env.step(ZERO, intervention=False)
        assert len(env.trajectory) == 2
        rec = env.trajectory[0]
        for key in ("t", "x", "y", "heading", "speed", "action", "reward",
                    "cost", "intervention"):
            assert key in rec
        assert rec["intervention"] is True
        assert env.trajectory[1]["intervention"] is False
