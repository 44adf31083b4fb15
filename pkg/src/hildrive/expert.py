"""Scripted takeover driver and the intervention gate.

The expert is a pure-pursuit steering law plus an IDM speed law, modeled for
gating purposes as an isotropic Gaussian around its scripted action. The
gate fires when the learner's action is too unlikely under that model, or
relays a live human override when one is wired in.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .env import DrivingEnv
from .errors import ContractError
from .idm import IDMParams, idm_accel
from .roadmap import localize

GATE_MODES = ("threshold", "human", "off")

FAILSAFE_ACTION = np.array([0.0, -1.0])
FALLBACK_ACTION = np.array([0.0, -0.5])


@dataclass(frozen=True)
class ExpertParams:
    lookahead_base: float = 4.0     # pure-pursuit lookahead at standstill, m
    lookahead_gain: float = 0.5     # extra lookahead per m/s
    lookahead_max: float = 20.0
    target_speed_frac: float = 0.55  # cruise target as a fraction of v_max
    sigma_e: float = 0.3            # action-model std, per dimension

    def __post_init__(self) -> None:
        if self.sigma_e <= 0:
            raise ContractError("sigma_e must be > 0")


class ScriptedExpert:
    """Route follower with privileged access to the environment state."""

    def __init__(self, params: ExpertParams | None = None) -> None:
        self.params = params if params is not None else ExpertParams()

    def action(self, env: DrivingEnv) -> tuple[np.ndarray, dict]:
        """Deterministic scripted action, plus info with a fallback flag."""
        assert env.scene is not None and env.route is not None
        cfg = env.config
        pos = np.array([env.ego.x, env.ego.y])
        if localize(env.scene, pos, env.ego.heading,
                    cfg.localize_band, cfg.localize_angle) is None:
            return FALLBACK_ACTION.copy(), {"fallback": True}

        route_s, _, _ = env.route.project(pos, env._route_hint)
        v = env.ego.speed
        p = self.params
        lookahead = float(np.clip(p.lookahead_base + p.lookahead_gain * v,
                                  p.lookahead_base, p.lookahead_max))
        target = env.route.embed(route_s + lookahead, 0.0)
        rel = target - pos
        c, s = np.cos(-env.ego.heading), np.sin(-env.ego.heading)
        local = np.array([c * rel[0] - s * rel[1], s * rel[0] + c * rel[1]])
        dist = float(np.linalg.norm(local))
        alpha = float(np.arctan2(local[1], local[0]))
        # Pure pursuit: curvature toward the lookahead point; positive alpha
        # means the target is to the left, which needs a negative (CCW is
        # negative under the right-positive convention) steer command.
        kappa = 2.0 * np.sin(alpha) / max(dist, 1e-6)
        steer_angle = np.arctan(cfg.wheelbase * kappa)
        steer_cmd = float(np.clip(-steer_angle / cfg.max_steer, -1.0, 1.0))

        v0 = p.target_speed_frac * cfg.v_max
        idm = IDMParams(v0=v0, brake_max=cfg.brake_gain)
        leader = self._leader(env, route_s)
        if leader is not None:
            gap, leader_v = leader
            accel = idm_accel(idm, v, leader_v=leader_v, gap=gap)
        else:
            accel = idm_accel(idm, v)
        accel_cmd = accel / cfg.accel_gain if accel >= 0 else accel / cfg.brake_gain
        accel_cmd = float(np.clip(accel_cmd, -1.0, 1.0))
        return np.array([steer_cmd, accel_cmd]), {"fallback": False}

    @staticmethod
    def _leader(env: DrivingEnv, route_s: float) -> tuple[float, float] | None:
        """Bumper gap and speed of the nearest vehicle ahead on the route."""
        best = None
        for veh in env.traffic:
            if not veh.alive or veh.route_s <= route_s:
                continue
            if veh.route_s - route_s > 50.0:
                continue
            if best is None or veh.route_s < best.route_s:
                best = veh
        if best is None:
            return None
        gap = best.route_s - route_s - env.config.body_length
        return gap, best.speed


def gaussian_action_density(a: np.ndarray, mu: np.ndarray, sigma: float) -> float:
    """Isotropic 2D normal density of action a around mean mu."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    r2 = float(d @ d)
    return float(np.exp(-r2 / (2.0 * sigma * sigma)) / (2.0 * np.pi * sigma * sigma))


def density_threshold_radius(sigma: float, epsilon: float) -> float:
    """Action distance where the density crosses epsilon (nan if it never does)."""
    peak = 1.0 / (2.0 * np.pi * sigma * sigma)
    if epsilon <= 0.0 or epsilon >= peak:
        return float("nan")
    return float(np.sqrt(-2.0 * sigma * sigma * np.log(epsilon / peak)))


@dataclass
class GateDecision:
    intervene: bool
    expert_action: np.ndarray | None
    density: float | None = None
    failsafe: bool = False
    expert_fallback: bool = False


@dataclass
class OverrideMessage:
    takeover: bool
    steer: float
    accel: float
    client_time_ms: int = 0

    def action(self) -> np.ndarray:
        return np.clip(np.array([self.steer, self.accel]), -1.0, 1.0)


class OverrideChannel:
    """Latest-wins mailbox between the bridge thread and the training loop."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._msg: OverrideMessage | None = None
        self._stamp: float = -float("inf")

    def push(self, msg: OverrideMessage, stamp: float | None = None) -> None:
        with self._lock:
            self._msg = msg
            self._stamp = time.monotonic() if stamp is None else stamp

    def latest(self, now: float | None = None,
               stale_after: float = 1.0) -> OverrideMessage | None:
        with self._lock:
            if self._msg is None:
                return None
            age = (time.monotonic() if now is None else now) - self._stamp
            return self._msg if age <= stale_after else None

    def clear(self) -> None:
        with self._lock:
            self._msg = None
            self._stamp = -float("inf")


@dataclass
class InterventionGate:
    """Decides per control tick whether the expert takes over.

    threshold mode: fire when the learner action's density under the
    expert's Gaussian action model drops below epsilon, and hand back a
    sample from that model. human mode: relay the override channel, with a
    hard-brake failsafe when the channel is dead. off: never fire.
    """

    mode: str = "threshold"
    epsilon: float = 0.05
    expert: ScriptedExpert = field(default_factory=ScriptedExpert)
    channel: OverrideChannel | None = None
    stale_after: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in GATE_MODES:
            raise ContractError(f"unknown gate mode {self.mode!r}")
        if self.epsilon < 0:
            raise ContractError("epsilon must be >= 0")

    def decide(self, a_n: np.ndarray, env: DrivingEnv,
               rng: np.random.Generator | None = None,
               now: float | None = None) -> GateDecision:
        if self.mode == "off":
            return GateDecision(False, None)
        if self.mode == "human":
            msg = self.channel.latest(now, self.stale_after) if self.channel else None
            if msg is None:
                return GateDecision(True, FAILSAFE_ACTION.copy(), failsafe=True)
            if not msg.takeover:
                return GateDecision(False, None)
            return GateDecision(True, msg.action())

        mu, info = self.expert.action(env)
        sigma = self.expert.params.sigma_e
        density = gaussian_action_density(a_n, mu, sigma)
        if density >= self.epsilon:
            return GateDecision(False, None, density=density,
                                expert_fallback=info["fallback"])
        if rng is None:
            raise ContractError("threshold gate needs an rng to sample a_h")
        a_h = np.clip(mu + sigma * rng.normal(size=2), -1.0, 1.0)
        return GateDecision(True, a_h, density=density,
                            expert_fallback=info["fallback"])


def behavior_action(intervene: bool, a_n: np.ndarray,
                    a_h: np.ndarray | None) -> np.ndarray:
    """Executed action: the human's when intervened, the learner's otherwise."""
    if intervene:
        if a_h is None:
            raise ContractError("intervention without an expert action")
        return np.asarray(a_h, dtype=np.float64)
    return np.asarray(a_n, dtype=np.float64)
