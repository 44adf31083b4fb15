"""Held-out policy evaluation and multi-seed aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .nets import ParamSet

TERMINAL_TAGS = ("success", "out-of-road", "horizon", "fault")


@dataclass
class EpisodeMetrics:
    """Outcome of one evaluation episode."""

    termination: str
    steps: int
    cost: float
    reward: float
    interventions: int
    route_completion: float
    crashed: bool

    def __post_init__(self):
        if self.termination not in TERMINAL_TAGS:
            raise ContractError(f"unknown terminal tag {self.termination!r}")
        if self.cost < 0.0:
            raise ContractError("episodic cost must be >= 0")
        self.route_completion = float(np.clip(self.route_completion, 0.0, 1.0))


@dataclass
class EvalReport:
    """Aggregate over one evaluation sweep of n episodes."""

    n_episodes: int
    success_rate: float
    out_rate: float
    timeout_rate: float
    crash_rate: float
    mean_cost: float
    mean_reward: float
    mean_completion: float
    mean_interventions: float
    checkpoint_step: int = 0
    seed: int = 0
    faults: int = 0
    episodes: list[EpisodeMetrics] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n_episodes", "success_rate", "out_rate", "timeout_rate",
            "crash_rate", "mean_cost", "mean_reward", "mean_completion",
            "mean_interventions", "checkpoint_step", "seed", "faults")}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


def _policy_fn(policy):
    if isinstance(policy, ParamSet):
        return lambda obs: np.clip(policy.forward(obs), -1.0, 1.0)
    if callable(policy):
        return policy
    raise ContractError("policy must be a ParamSet or a callable obs -> action")


def run_episode(policy, env, scene: int, episode_seed: int,
                max_steps: int | None = None) -> EpisodeMetrics:
    """Roll one greedy episode; the policy drives alone (no gate)."""
    act = _policy_fn(policy)
    env.reset(scene, episode_seed)
    limit = max_steps if max_steps is not None else env.config.horizon + 1
    steps = 0
    try:
        for _ in range(limit):
            out = env.step(act(env.current_observation().vector()))
            steps += 1
            if out.done:
                break
        termination = env.termination if env.termination != "none" else "horizon"
        dest_s = env._dest_s
        route_s, _, _ = env.route.project(np.array([env.ego.x, env.ego.y]),
                                          env._route_hint)
        completion = 1.0 if termination == "success" else route_s / max(dest_s, 1e-9)
        return EpisodeMetrics(termination=termination, steps=steps,
                              cost=env.episode_cost, reward=env.episode_reward,
                              interventions=0, route_completion=completion,
                              crashed=env.episode_cost > 0.0)
    except Exception:
        # individual episode faults are recorded, not fatal
        return EpisodeMetrics(termination="fault", steps=steps, cost=0.0,
                              reward=0.0, interventions=0, route_completion=0.0,
                              crashed=False)


def evaluate(policy, env, n_episodes: int, eval_seed: int = 0,
             checkpoint_step: int = 0) -> EvalReport:
    """Run n held-out episodes, cycling the env's scenes round-robin.

    Deterministic in (policy, env split, eval_seed).  The policy is greedy
    and no intervention source is attached.
    """
    if n_episodes < 1:
        raise ContractError("n_episodes must be >= 1")
    scenes = env.library.count(env.split)
    metrics = []
    for i in range(n_episodes):
        ep_seed = int(np.random.SeedSequence([eval_seed, i]).generate_state(1)[0])
        metrics.append(run_episode(policy, env, i % scenes, ep_seed))
    clean = [m for m in metrics if m.termination != "fault"]
    n_clean = max(len(clean), 1)

    def rate(tag):
        return sum(m.termination == tag for m in clean) / n_clean

    def mean(attr):
        return float(np.mean([getattr(m, attr) for m in clean])) if clean else 0.0

    return EvalReport(
        n_episodes=n_episodes,
        success_rate=rate("success"),
        out_rate=rate("out-of-road"),
        timeout_rate=rate("horizon"),
        crash_rate=sum(m.crashed for m in clean) / n_clean,
        mean_cost=mean("cost"),
        mean_reward=mean("reward"),
        mean_completion=mean("route_completion"),
        mean_interventions=mean("interventions"),
        checkpoint_step=checkpoint_step,
        seed=eval_seed,
        faults=len(metrics) - len(clean),
        episodes=metrics)


CURVE_METRICS = ("success_rate", "out_rate", "timeout_rate", "crash_rate",
                 "mean_cost", "mean_reward", "mean_completion")


def aggregate_seeds(runs: list[list[EvalReport]]) -> list[dict]:
    """Combine per-seed checkpoint series into mean/std rows per checkpoint.

    Every seed must have evaluated on the same checkpoint grid; the sample
    std uses the n-1 denominator and is 0 for a single seed.
    """
    if not runs or not all(runs):
        raise ContractError("aggregate_seeds needs at least one non-empty series")
    grids = [tuple(r.checkpoint_step for r in series) for series in runs]
    if len(set(grids)) != 1:
        raise ContractError(f"checkpoint grids differ across seeds: {sorted(set(grids))}")
    rows = []
    for k, step in enumerate(grids[0]):
        row = {"step": step, "n_seeds": len(runs)}
        for metric in CURVE_METRICS:
            vals = np.array([series[k] for series in runs], dtype=object)
            vals = np.array([getattr(v, metric) for v in vals], dtype=np.float64)
            row[f"{metric}_mean"] = float(np.mean(vals))
            row[f"{metric}_std"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        rows.append(row)
    return rows
