"""Deterministic fixed-tick 2D driving environment.

One control tick is 0.2 s and advances the world by two 0.1 s physics
sub-steps. The ego is a kinematic bicycle; traffic vehicles track their route
centerline under an IDM speed law and react to whoever is ahead of them,
the ego included. Collisions accrue cost but never terminate; episodes end
on success, leaving the road, or the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, StateError
from .geom import (
    circle_rect_overlap,
    normalize_angle,
    rectangle_corners,
    rectangles_overlap,
    segments_of_polyline,
)
from .idm import IDMParams, idm_accel
from .lidar import LidarSpec, lidar_scan
from .mapgen import pg_generate
from .roadmap import Route, SceneMap, localize

TERMINATION_TAGS = ("none", "success", "out-of-road", "horizon")
CRASH_FLAGS = ("crash-vehicle", "crash-obstacle", "crash-sidewalk")
EVENT_FLAGS = CRASH_FLAGS + ("on-yellow-line",)

SPLITS = ("train", "test")

EGO_SUMMARY_DIM = 5
NAV_DIM = 4


@dataclass(frozen=True)
class EnvConfig:
    physics_dt: float = 0.1
    control_dt: float = 0.2
    horizon: int = 1000
    lidar_rays: int = 240
    lidar_range: float = 50.0
    lidar_noise: float = 0.0
    v_max: float = 22.22
    c1: float = 1.0
    c2: float = 0.1
    success_reward: float = 10.0
    failure_reward: float = -5.0
    crash_penalty_enabled: bool = False  # one-time -5 on an episode's first crash tick
    traffic_per_100m: float = 1.0
    obstacle_count: int = 4
    num_blocks: int = 4
    lane_width: float = 7.0     # generated-map lane width, m
    seed: int = 0
    n_train_scenes: int = 50
    n_test_scenes: int = 50
    wheelbase: float = 2.5
    max_steer: float = float(np.deg2rad(40.0))
    accel_gain: float = 3.0   # m/s^2 at accel command +1
    brake_gain: float = 5.0   # m/s^2 at accel command -1
    body_length: float = 4.0
    body_width: float = 1.8
    checkpoint_spacing: float = 50.0
    destination_radius: float = 5.0
    localize_band: float = 5.0
    localize_angle: float = float(np.pi / 2.0)
    traffic_speed_lo: float = 0.35  # traffic target speed range, fraction of v_max
    traffic_speed_hi: float = 0.60

    def __post_init__(self) -> None:
        for name in ("physics_dt", "control_dt", "horizon", "lidar_rays",
                     "lidar_range", "v_max", "wheelbase", "body_length",
                     "body_width", "checkpoint_spacing", "destination_radius",
                     "lane_width"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        ratio = self.control_dt / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("control_dt must be an integer multiple of physics_dt")
        if self.lidar_noise < 0:
            raise ConfigError("lidar_noise must be >= 0")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))

    def lidar_spec(self) -> LidarSpec:
        return LidarSpec(num_rays=self.lidar_rays, max_range=self.lidar_range,
                         noise_std=self.lidar_noise)

    @property
    def obs_dim(self) -> int:
        return self.lidar_rays + EGO_SUMMARY_DIM + NAV_DIM


@dataclass
class Observation:
    lidar: np.ndarray
    ego: np.ndarray
    nav: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.lidar, self.ego, self.nav])


@dataclass
class VehicleState:
    x: float
    y: float
    heading: float
    speed: float
    kind: str = "traffic"        # "ego" | "traffic"
    alive: bool = True
    route_s: float = 0.0         # traffic only: arclength along its route
    target_speed: float = 10.0   # traffic only: IDM desired speed


@dataclass
class StepOutcome:
    observation: Observation
    reward: float
    cost: float
    done: bool
    termination: str
    flags: dict[str, bool]
    info: dict

    def __post_init__(self) -> None:
        assert self.termination in TERMINATION_TAGS
        assert self.done == (self.termination != "none")


def compute_reward(delta_s: float, speed: float, termination: str,
                   config: EnvConfig, localized: bool = True,
                   crash_penalty: bool = False) -> float:
    """Dense progress reward plus terminal bonus/penalty.

    Non-terminal: c1 * (forward Frenet displacement) + c2 * speed/v_max.
    Terminal steps zero the dense terms and pay only the terminal value.
    """
    if termination == "success":
        return config.success_reward
    if termination == "out-of-road":
        return config.failure_reward
    if termination == "horizon":
        return 0.0
    r_disp = delta_s if localized else 0.0
    r = config.c1 * r_disp + config.c2 * (speed / config.v_max)
    if crash_penalty:
        r += config.failure_reward
    return r


class SceneLibrary:
    """Lazy, cached per-split collection of procedurally generated maps."""

    _SPLIT_TAG = {"train": 0, "test": 1}

    def __init__(self, config: EnvConfig) -> None:
        self.config = config
        self._cache: dict[tuple[str, int], SceneMap] = {}

    def count(self, split: str) -> int:
        self._check_split(split)
        return self.config.n_train_scenes if split == "train" else self.config.n_test_scenes

    def scene_seed(self, split: str, index: int) -> int:
        self._check_split(split)
        if not 0 <= index < self.count(split):
            raise ConfigError(f"scene index {index} out of range for split {split!r}")
        ss = np.random.SeedSequence(
            [int(self.config.seed), self._SPLIT_TAG[split], int(index)])
        return int(ss.generate_state(1)[0])

    def get(self, split: str, index: int) -> SceneMap:
        key = (split, index)
        if key not in self._cache:
            self._cache[key] = pg_generate(self.scene_seed(split, index),
                                           num_blocks=self.config.num_blocks,
                                           obstacle_count=self.config.obstacle_count,
                                           lane_width=self.config.lane_width)
        return self._cache[key]

    @staticmethod
    def _check_split(split: str) -> None:
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r}, expected one of {SPLITS}")


def parse_scene_id(scene: int | str, default_split: str) -> tuple[str, int]:
    if isinstance(scene, int):
        return default_split, scene
    if ":" in scene:
        split, _, idx = scene.partition(":")
        return split, int(idx)
    return default_split, int(scene)


class DrivingEnv:
    """Single-ego driving task over a library of generated scenes."""

    def __init__(self, config: EnvConfig, split: str = "train",
                 library: SceneLibrary | None = None) -> None:
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r}")
        self.config = config
        self.split = split
        self.library = library if library is not None else SceneLibrary(config)
        self.scene: SceneMap | None = None
        self.route: Route | None = None
        self._done = True
        self._last_obs: Observation | None = None
        self.trajectory: list[dict] = []

    # -- episode lifecycle ---------------------------------------------------

    @property
    def done(self) -> bool:
        """True between construction/termination and the next reset()."""
        return self._done

    def reset(self, scene: int | str = 0, episode_seed: int = 0) -> Observation:
        split, index = parse_scene_id(scene, self.split)
        if split != self.split:
            raise ConfigError(
                f"scene {scene!r} belongs to split {split!r}; this env serves {self.split!r}")
        self.scene_index = index
        self.episode_seed = int(episode_seed)
        self.scene = self.library.get(split, index)
        spawn = self.scene.spawns[0]
        self.route = self.scene.route_for_spawn(spawn)
        dest_s, _, _ = self.route.project(self.scene.destination.xy)
        self._dest_s = dest_s
        cp_s = list(np.arange(self.config.checkpoint_spacing, dest_s,
                              self.config.checkpoint_spacing))
        self._cp_s = np.array(cp_s + [dest_s])
        self._cp_pos = np.array([self.route.embed(s, 0.0) for s in cp_s]
                                + [self.scene.destination.xy])

        self.rng = np.random.default_rng(np.random.SeedSequence(
            [self.library.scene_seed(split, index), self.episode_seed, 0xE9]))

        self.ego = VehicleState(spawn.x, spawn.y, spawn.heading, 0.0, kind="ego")
        self.steer_prev = 0.0
        self.traffic = self._spawn_traffic()
        self.tick = 0
        self._done = False
        self._route_hint = 0
        s0, _, self._route_hint = self.route.project(np.array([spawn.x, spawn.y]))
        self._prev_route_s = s0
        self.episode_reward = 0.0
        self.episode_cost = 0.0
        self._crashed_before = False
        self.last_flags = {f: False for f in EVENT_FLAGS}
        self.termination = "none"
        self.trajectory = []
        self._last_obs = self._observe()
        return self._last_obs

    def _spawn_traffic(self) -> list[VehicleState]:
        assert self.route is not None
        usable = self._dest_s - 50.0
        n = int(round(self.config.traffic_per_100m * max(0.0, usable) / 100.0))
        placed: list[float] = []
        vehicles: list[VehicleState] = []
        for _ in range(n):
            for _ in range(50):
                s = float(self.rng.uniform(30.0, max(31.0, self._dest_s - 20.0)))
                if all(abs(s - q) >= 25.0 for q in placed):
                    placed.append(s)
                    break
        placed.sort()
        for s in placed:
            v0 = float(self.rng.uniform(self.config.traffic_speed_lo,
                                        self.config.traffic_speed_hi) * self.config.v_max)
            p = self.route.embed(s, 0.0)
            vehicles.append(VehicleState(float(p[0]), float(p[1]),
                                         self.route.heading_at(s), 0.5 * v0,
                                         kind="traffic", route_s=s, target_speed=v0))
        return vehicles

    # -- stepping --------------------------------------------------------------

    def step(self, action: np.ndarray, intervention: bool = False) -> StepOutcome:
        if self._done:
            raise StateError("step() after episode end; call reset()")
        assert self.scene is not None and self.route is not None
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (2,):
            raise StateError(f"action must have shape (2,), got {action.shape}")
        steer_cmd = float(np.clip(action[0], -1.0, 1.0))
        accel_cmd = float(np.clip(action[1], -1.0, 1.0))

        for _ in range(self.config.substeps):
            self._substep_ego(steer_cmd, accel_cmd)
            self._substep_traffic()
        self.steer_prev = steer_cmd
        self.tick += 1

        pos = np.array([self.ego.x, self.ego.y])
        route_s, route_d, self._route_hint = self.route.project(pos, self._route_hint)
        width = self.route.width_at(route_s)
        flags = self._collision_flags(route_s, route_d, width)
        cost = float(sum(flags[f] for f in CRASH_FLAGS))

        localized = localize(self.scene, pos, self.ego.heading,
                             self.config.localize_band, self.config.localize_angle)
        termination = "none"
        if float(np.linalg.norm(pos - self.scene.destination.xy)) < self.config.destination_radius:
            termination = "success"
        elif abs(route_d) > width / 2.0 or localized is None:
            termination = "out-of-road"
        elif self.tick >= self.config.horizon:
            termination = "horizon"

        crash_now = any(flags[f] for f in CRASH_FLAGS)
        first_crash = crash_now and not self._crashed_before
        self._crashed_before = self._crashed_before or crash_now
        reward = compute_reward(route_s - self._prev_route_s, self.ego.speed,
                                termination, self.config,
                                localized=localized is not None,
                                crash_penalty=(self.config.crash_penalty_enabled
                                               and first_crash))
        self._prev_route_s = route_s
        self.episode_reward += reward
        self.episode_cost += cost
        self._done = termination != "none"
        self.termination = termination
        self.last_flags = flags

        obs = self._observe()
        self._last_obs = obs
        info = {
            "tick": self.tick,
            "route_s": route_s,
            "route_d": route_d,
            "speed": self.ego.speed,
            "x": self.ego.x, "y": self.ego.y, "heading": self.ego.heading,
            "episode_reward": self.episode_reward,
            "episode_cost": self.episode_cost,
        }
        self.trajectory.append({
            "t": self.tick, "x": self.ego.x, "y": self.ego.y,
            "heading": self.ego.heading, "speed": self.ego.speed,
            "action": [steer_cmd, accel_cmd], "reward": reward, "cost": cost,
            "intervention": bool(intervention),
        })
        return StepOutcome(observation=obs, reward=reward, cost=cost,
                           done=self._done, termination=termination,
                           flags=flags, info=info)

    def _substep_ego(self, steer_cmd: float, accel_cmd: float) -> None:
        # Sign convention: positive steer command turns clockwise (right).
        cfg = self.config
        dt = cfg.physics_dt
        steer = steer_cmd * cfg.max_steer
        accel = accel_cmd * (cfg.accel_gain if accel_cmd >= 0 else cfg.brake_gain)
        v = self.ego.speed
        self.ego.x += v * np.cos(self.ego.heading) * dt
        self.ego.y += v * np.sin(self.ego.heading) * dt
        self.ego.heading = normalize_angle(
            self.ego.heading - v / cfg.wheelbase * np.tan(steer) * dt)
        self.ego.speed = float(np.clip(v + accel * dt, 0.0, cfg.v_max))

    def _substep_traffic(self) -> None:
        assert self.route is not None
        cfg = self.config
        dt = cfg.physics_dt
        ego_s, ego_d, _ = self.route.project(
            np.array([self.ego.x, self.ego.y]), self._route_hint)
        ego_on_road = abs(ego_d) <= self.route.width_at(ego_s) / 2.0 + 0.5
        alive = [v for v in self.traffic if v.alive]
        order = sorted(alive, key=lambda v: -v.route_s)
        for i, veh in enumerate(order):
            leader_s, leader_v = None, None
            if i > 0:
                leader_s, leader_v = order[i - 1].route_s, order[i - 1].speed
            if ego_on_road and ego_s > veh.route_s:
                if leader_s is None or ego_s < leader_s:
                    leader_s, leader_v = ego_s, self.ego.speed
            params = IDMParams(v0=veh.target_speed, brake_max=cfg.brake_gain)
            if leader_s is not None and leader_s - veh.route_s <= 50.0:
                gap = leader_s - veh.route_s - cfg.body_length
                a = idm_accel(params, veh.speed, leader_v=leader_v, gap=gap)
            else:
                a = idm_accel(params, veh.speed)
            veh.speed = float(np.clip(veh.speed + a * dt, 0.0, cfg.v_max))
            veh.route_s += veh.speed * dt
            if veh.route_s >= self.route.length - 0.5:
                veh.alive = False
                continue
            p = self.route.embed(veh.route_s, 0.0)
            veh.x, veh.y = float(p[0]), float(p[1])
            veh.heading = self.route.heading_at(veh.route_s)

    def _collision_flags(self, route_s: float, route_d: float,
                         width: float) -> dict[str, bool]:
        assert self.scene is not None
        cfg = self.config
        ego_corners = rectangle_corners(self.ego.x, self.ego.y, self.ego.heading,
                                        cfg.body_length, cfg.body_width)
        flags = {f: False for f in EVENT_FLAGS}
        for veh in self.traffic:
            if not veh.alive:
                continue
            if abs(veh.x - self.ego.x) > 10.0 or abs(veh.y - self.ego.y) > 10.0:
                continue
            corners = rectangle_corners(veh.x, veh.y, veh.heading,
                                        cfg.body_length, cfg.body_width)
            if rectangles_overlap(ego_corners, corners):
                flags["crash-vehicle"] = True
                break
        ego_pos = np.array([self.ego.x, self.ego.y])
        for ob in self.scene.obstacles:
            if circle_rect_overlap(np.array([ob.x, ob.y]), ob.radius, ego_pos,
                                   self.ego.heading, cfg.body_length, cfg.body_width):
                flags["crash-obstacle"] = True
                break
        margin = width / 2.0 - cfg.body_width / 2.0
        frag = self.route.fragment_at(route_s)
        if route_d < -margin:
            flags["crash-sidewalk"] = True
        if route_d > margin and frag.boundary_left == "yellow-solid":
            flags["on-yellow-line"] = True
        return flags

    # -- observation -----------------------------------------------------------

    def _observe(self) -> Observation:
        assert self.scene is not None and self.route is not None
        cfg = self.config
        pos = np.array([self.ego.x, self.ego.y])
        segments = [self.scene.wall_segments()]
        for veh in self.traffic:
            if not veh.alive:
                continue
            corners = rectangle_corners(veh.x, veh.y, veh.heading,
                                        cfg.body_length, cfg.body_width)
            closed = np.concatenate([corners, corners[:1]], axis=0)
            segments.append(segments_of_polyline(closed))
        obstacles = self.scene.obstacles
        centers = np.array([[o.x, o.y] for o in obstacles]) if obstacles else None
        radii = np.array([o.radius for o in obstacles]) if obstacles else None
        lidar = lidar_scan(pos, self.ego.heading, cfg.lidar_spec(),
                           segments=np.concatenate(segments, axis=0),
                           centers=centers, radii=radii, rng=self.rng)

        route_s, route_d, _ = self.route.project(pos, self._route_hint)
        width = self.route.width_at(route_s)
        heading_err = normalize_angle(self.ego.heading - self.route.heading_at(route_s))
        ego_vec = np.array([
            self.ego.speed / cfg.v_max,
            self.steer_prev,
            heading_err / np.pi,
            np.clip((width / 2.0 - route_d) / width, 0.0, 1.0),
            np.clip((width / 2.0 + route_d) / width, 0.0, 1.0),
        ])

        nxt = np.searchsorted(self._cp_s, route_s + 1e-9)
        cps = []
        for k in (nxt, nxt + 1):
            k = min(k, len(self._cp_s) - 1)
            cps.append(self._cp_pos[k])
        c, s = np.cos(-self.ego.heading), np.sin(-self.ego.heading)
        rot = np.array([[c, -s], [s, c]])
        nav = np.concatenate([
            np.clip(rot @ (cp - pos) / cfg.checkpoint_spacing, -1.0, 1.0) for cp in cps])
        return Observation(lidar=lidar, ego=ego_vec, nav=nav)

    def current_observation(self) -> Observation:
        """The observation produced by the most recent reset() or step().

        Cached rather than recomputed so that step loops built on top of the
        environment see exactly one sensor draw per tick even with lidar
        noise enabled.
        """
        if self._last_obs is None:
            raise StateError("environment never reset")
        return self._last_obs

    # -- state capture for exact resume -----------------------------------------

    def get_state(self) -> dict:
        if self.scene is None:
            raise StateError("environment never reset")
        return {
            "split": self.split,
            "scene_index": self.scene_index,
            "episode_seed": self.episode_seed,
            "tick": self.tick,
            "done": self._done,
            "termination": self.termination,
            "ego": {"x": self.ego.x, "y": self.ego.y, "heading": self.ego.heading,
                    "speed": self.ego.speed},
            "steer_prev": self.steer_prev,
            "traffic": [{"route_s": v.route_s, "speed": v.speed,
                         "target_speed": v.target_speed, "alive": v.alive,
                         "x": v.x, "y": v.y, "heading": v.heading}
                        for v in self.traffic],
            "prev_route_s": self._prev_route_s,
            "route_hint": self._route_hint,
            "episode_reward": self.episode_reward,
            "episode_cost": self.episode_cost,
            "crashed_before": self._crashed_before,
            "rng_state": self.rng.bit_generator.state,
            "last_obs": {"lidar": self._last_obs.lidar.tolist(),
                         "ego": self._last_obs.ego.tolist(),
                         "nav": self._last_obs.nav.tolist()},
            "trajectory": [dict(rec) for rec in self.trajectory],
        }

    def set_state(self, state: dict) -> None:
        if state["split"] != self.split:
            raise ConfigError(f"state for split {state['split']!r} loaded into "
                              f"{self.split!r} env")
        self.reset(int(state["scene_index"]), int(state["episode_seed"]))
        e = state["ego"]
        self.ego = VehicleState(e["x"], e["y"], e["heading"], e["speed"], kind="ego")
        self.steer_prev = float(state["steer_prev"])
        self.traffic = [VehicleState(t["x"], t["y"], t["heading"], t["speed"],
                                     kind="traffic", alive=t["alive"],
                                     route_s=t["route_s"], target_speed=t["target_speed"])
                        for t in state["traffic"]]
        self.tick = int(state["tick"])
        self._done = bool(state["done"])
        self.termination = state["termination"]
        self._prev_route_s = float(state["prev_route_s"])
        self._route_hint = int(state["route_hint"])
        self.episode_reward = float(state["episode_reward"])
        self.episode_cost = float(state["episode_cost"])
        self._crashed_before = bool(state["crashed_before"])
        self.rng.bit_generator.state = state["rng_state"]
        ob = state["last_obs"]
        self._last_obs = Observation(lidar=np.asarray(ob["lidar"], dtype=np.float64),
                                     ego=np.asarray(ob["ego"], dtype=np.float64),
                                     nav=np.asarray(ob["nav"], dtype=np.float64))
        self.trajectory = [dict(rec) for rec in state.get("trajectory", [])]
