"""Reward-free policy learning from live interventions.

The value head never sees an environment reward.  Instead it is anchored
on intervened ticks (+bound on the takeover action, -bound on the agent
action that triggered the takeover) and those anchor values are spread
across the state space by a temporal-difference backup whose target keeps
only the discounted bootstrap term.  The policy then ascends the learned
value with a squared-error imitation term on the takeover data as a
regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .buffers import ACTION_DIM, Batch, DEFAULT_CAPACITY, DualBuffer, Transition
from .errors import ConfigError, ContractError
from .expert import behavior_action
from .nets import NetSpec, ParamSet, soft_update


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters of the online learner."""

    obs_dim: int
    action_dim: int = ACTION_DIM
    value_bound: float = 1.0
    gamma: float = 0.99
    batch_size: int = 1024
    lr: float = 1e-4
    tau: float = 0.05
    bc_weight: float = 1.0
    warmup: int = 100
    updates_per_step: int = 1
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    explore_noise: float = 0.1
    hidden: tuple[int, ...] = (256, 256)
    buffer_capacity: int = DEFAULT_CAPACITY
    # Whether the policy objective's value term averages over both sampled
    # halves or only the autonomous one.
    policy_value_on_union: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.obs_dim < 1 or self.action_dim < 1:
            raise ConfigError("obs_dim and action_dim must be >= 1")
        if self.value_bound <= 0.0:
            raise ConfigError("value_bound must be > 0")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must be in (0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.lr <= 0.0:
            raise ConfigError("lr must be > 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must be in [0, 1]")
        if self.warmup < 1 or self.policy_delay < 1 or self.updates_per_step < 1:
            raise ConfigError("warmup, policy_delay, updates_per_step must be >= 1")
        if min(self.target_noise, self.target_noise_clip, self.explore_noise,
               self.bc_weight) < 0.0:
            raise ConfigError("noise scales and bc_weight must be >= 0")
        if self.buffer_capacity < self.warmup:
            raise ConfigError("buffer_capacity must be >= warmup")


# ---------------------------------------------------------------------------
# loss functions
#
# Each accumulates parameter gradients on the trained net (via its tape) and
# returns the scalar loss; callers zero_grad before and take the optimizer
# step after, so several losses can share one step.


def bc_loss(actor: ParamSet, obs: np.ndarray, target_actions: np.ndarray,
            scale: float = 1.0) -> float:
    """Imitation term: half mean squared error between pi(obs) and targets.

    The gradient contribution is multiplied by ``scale`` so a weighted sum
    of losses can share one optimizer step; the returned value is unweighted.
    Empty batches contribute 0 and touch nothing.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    target_actions = np.atleast_2d(np.asarray(target_actions, dtype=np.float64))
    n = obs.shape[0]
    if n == 0:
        return 0.0
    out, tape = actor.forward_tape(obs)
    diff = out - target_actions
    actor.backward(tape, scale * diff / n)
    return float(0.5 * np.sum(diff * diff) / n)


def proxy_value_loss(critic: ParamSet, batch_h: Batch, bound: float) -> float:
    """Anchor loss over intervened ticks only.

    Pulls Q(s, takeover action) to +bound and Q(s, agent action) to -bound,
    teaching the value head which actions the overseer accepts without any
    reward signal.
    """
    n = len(batch_h)
    if n == 0:
        return 0.0
    if not np.all(batch_h.intervened):
        raise ContractError("proxy value loss requires an all-intervened batch")
    x_h = np.concatenate([batch_h.obs, batch_h.a_h], axis=1)
    x_n = np.concatenate([batch_h.obs, batch_h.a_n], axis=1)
    q_h, tape_h = critic.forward_tape(x_h)
    q_n, tape_n = critic.forward_tape(x_n)
    d_h = q_h - bound
    d_n = q_n + bound
    critic.backward(tape_h, 2.0 * d_h / n)
    critic.backward(tape_n, 2.0 * d_n / n)
    return float(np.sum(d_h * d_h + d_n * d_n) / n)


def td_target(batch: Batch, critic_targets: list[ParamSet],
              actor_target: ParamSet | None, gamma: float,
              noise_std: float = 0.0, noise_clip: float = 0.0,
              rng: np.random.Generator | None = None,
              include_reward: bool = False,
              next_action_fn=None) -> np.ndarray:
    """Bootstrap targets, treated as constants (no gradient flows back).

    The continuous-action maximum is approximated by the target policy's
    action plus clipped smoothing noise; ``next_action_fn(next_obs)`` can
    replace that (e.g. exact enumeration over a finite action set).  With
    ``include_reward`` False the target is purely the discounted bootstrap,
    zeroed on terminal transitions.
    """
    if next_action_fn is not None:
        a_next = np.asarray(next_action_fn(batch.next_obs), dtype=np.float64)
    else:
        if actor_target is None:
            raise ContractError("td_target needs actor_target or next_action_fn")
        a_next = np.atleast_2d(actor_target.forward(batch.next_obs))
        if noise_std > 0.0:
            if rng is None:
                raise ContractError("target smoothing noise requires an rng")
            noise = np.clip(rng.normal(0.0, noise_std, size=a_next.shape),
                            -noise_clip, noise_clip)
            a_next = np.clip(a_next + noise, -1.0, 1.0)
    x_next = np.concatenate([batch.next_obs, a_next], axis=1)
    q_next = np.min(np.stack([ct.forward(x_next)[:, 0] for ct in critic_targets]),
                    axis=0)
    y = gamma * (1.0 - batch.done.astype(np.float64)) * q_next
    if include_reward:
        y = y + batch.reward
    return y


def td_loss(critic: ParamSet, batch: Batch, target_values: np.ndarray) -> float:
    """Squared Bellman residual of the executed actions against fixed targets."""
    n = len(batch)
    if n == 0:
        return 0.0
    x = np.concatenate([batch.obs, batch.executed], axis=1)
    q, tape = critic.forward_tape(x)
    diff = q - np.asarray(target_values, dtype=np.float64)[:, None]
    critic.backward(tape, 2.0 * diff / n)
    return float(np.sum(diff * diff) / n)


def policy_loss(actor: ParamSet, critic: ParamSet, obs: np.ndarray,
                bc_obs: np.ndarray, bc_targets: np.ndarray,
                bc_weight: float) -> tuple[float, float, float]:
    """Deterministic policy objective: -mean Q(s, pi(s)) + weighted imitation.

    The value gradient flows through the action input of the critic; the
    critic's own parameters receive no gradient here.  Returns
    (total, value term, unweighted imitation term).
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    n = obs.shape[0]
    q_term = 0.0
    if n > 0:
        a_pi, tape_a = actor.forward_tape(obs)
        x = np.concatenate([obs, a_pi], axis=1)
        q, tape_q = critic.forward_tape(x)
        q_term = float(-np.mean(q))
        input_grad = critic.backward(tape_q, np.full((n, 1), -1.0 / n),
                                     accumulate=False)
        actor.backward(tape_a, input_grad[:, obs.shape[1]:])
    bc_term = bc_loss(actor, bc_obs, bc_targets, scale=bc_weight)
    return q_term + bc_weight * bc_term, q_term, bc_term


# ---------------------------------------------------------------------------
# online learner


class PolicyLearner:
    """Actor-critic trained online from dual intervention buffers."""

    def __init__(self, config: LearnerConfig, seed: int = 0):
        self.config = config
        init_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1417]))
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0BB5]))
        actor_spec = NetSpec(config.obs_dim, config.hidden, config.action_dim,
                             out_act="tanh")
        critic_spec = NetSpec(config.obs_dim + config.action_dim, config.hidden, 1)
        self.actor = ParamSet.initialized(actor_spec, init_rng, final_scale=0.01)
        self.critic = ParamSet.initialized(critic_spec, init_rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.buffers = DualBuffer(config.obs_dim, config.buffer_capacity)
        self.tick_count = 0
        self.update_count = 0

    # -- acting ----------------------------------------------------------------

    def act(self, obs: np.ndarray, explore: bool = False) -> np.ndarray:
        """Greedy policy action, optionally with clamped exploration noise."""
        a = self.actor.forward(np.asarray(obs, dtype=np.float64))
        if explore and self.config.explore_noise > 0.0:
            a = a + self.rng.normal(0.0, self.config.explore_noise, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def observe(self, t: Transition) -> None:
        self.buffers.store(t)

    def ready(self) -> bool:
        return self.buffers.ready(self.config.warmup)

    # -- updates ---------------------------------------------------------------

    def value_update(self, batch_h: Batch, batch_n: Batch) -> tuple[float, float]:
        """One optimizer step on anchor loss + reward-free TD over the union."""
        cfg = self.config
        union = batch_h.concat(batch_n)
        self.critic.zero_grad()
        proxy = proxy_value_loss(self.critic, batch_h, cfg.value_bound)
        y = td_target(union, [self.critic_target], self.actor_target, cfg.gamma,
                      cfg.target_noise, cfg.target_noise_clip, self.rng)
        td = td_loss(self.critic, union, y)
        self.critic.adam_step(cfg.lr)
        return proxy, td

    def policy_update(self, batch_h: Batch,
                      batch_n: Batch) -> tuple[float, float, float]:
        """One optimizer step on the policy objective; critic frozen."""
        cfg = self.config
        if cfg.policy_value_on_union:
            value_obs = np.concatenate([batch_h.obs, batch_n.obs], axis=0)
        else:
            value_obs = batch_n.obs
        mask = batch_h.intervened
        self.actor.zero_grad()
        total, q_term, bc_term = policy_loss(
            self.actor, self.critic, value_obs,
            batch_h.obs[mask], batch_h.a_h[mask], cfg.bc_weight)
        self.actor.adam_step(cfg.lr)
        return total, q_term, bc_term

    def update(self) -> dict | None:
        """Sample balanced batches and run the update cadence once.

        Value step every call; policy step and target tracking every
        ``policy_delay``-th value step.  Returns the loss record, or None
        while either buffer is below warmup.
        """
        cfg = self.config
        report = None
        for _ in range(cfg.updates_per_step):
            pair = self.buffers.sample_balanced(cfg.batch_size, self.rng,
                                                cfg.warmup)
            if pair is None:
                return None
            batch_h, batch_n = pair
            proxy, td = self.value_update(batch_h, batch_n)
            self.update_count += 1
            report = {"loss_proxy": proxy, "loss_td": td,
                      "loss_q_total": proxy + td,
                      "loss_policy": None, "loss_bc": None}
            if self.update_count % cfg.policy_delay == 0:
                total, _, bc_term = self.policy_update(batch_h, batch_n)
                soft_update(self.critic_target, self.critic, cfg.tau)
                soft_update(self.actor_target, self.actor, cfg.tau)
                report["loss_policy"] = total
                report["loss_bc"] = bc_term
        return report

    # -- snapshots and resume ----------------------------------------------------

    def policy_snapshot(self) -> ParamSet:
        """Immutable copy of the current policy for evaluation."""
        return self.actor.copy()

    def nets(self) -> dict[str, ParamSet]:
        return {"actor": self.actor, "critic": self.critic,
                "actor_target": self.actor_target,
                "critic_target": self.critic_target}

    def get_state(self) -> dict:
        """JSON-safe counters and rng state (nets and buffers travel separately)."""
        return {"tick_count": self.tick_count,
                "update_count": self.update_count,
                "rng_state": self.rng.bit_generator.state}

    def set_state(self, state: dict) -> None:
        self.tick_count = int(state["tick_count"])
        self.update_count = int(state["update_count"])
        self.rng.bit_generator.state = state["rng_state"]


# ---------------------------------------------------------------------------
# one online control tick


@dataclass
class TickReport:
    """What one control tick did, for logging and audits."""

    step: int
    intervened: bool
    done: bool
    termination: str
    reward: float
    cost: float
    events: tuple[str, ...]
    losses: dict | None
    buffer_sizes: tuple[int, int]
    failsafe: bool = False
    expert_fallback: bool = False


def train_tick(env, gate, learner: PolicyLearner, gate_rng=None, now=None,
               explore: bool = True) -> TickReport:
    """Run one tick of the online loop on an already-reset environment.

    observe -> propose agent action (plus exploration noise) -> gate ->
    execute the intervention-selected branch -> store the transition ->
    update if both buffers are past warmup.  The caller owns episode resets.
    """
    s = env.current_observation().vector()
    a_n = learner.act(s, explore=explore)
    decision = gate.decide(a_n, env, rng=gate_rng, now=now)
    a = behavior_action(decision.intervene, a_n, decision.expert_action)
    out = env.step(a, intervention=decision.intervene)
    learner.observe(Transition(
        obs=s, a_n=a_n,
        a_h=decision.expert_action if decision.intervene else None,
        intervened=decision.intervene,
        next_obs=out.observation.vector(), done=out.done,
        reward=out.reward, cost=out.cost))
    learner.tick_count += 1
    losses = learner.update()
    events = tuple(f for f, v in out.flags.items() if v)
    if out.done:
        events = events + (out.termination,)
    return TickReport(step=learner.tick_count, intervened=decision.intervene,
                      done=out.done, termination=out.termination,
                      reward=out.reward, cost=out.cost, events=events,
                      losses=losses, buffer_sizes=learner.buffers.sizes(),
                      failsafe=decision.failsafe,
                      expert_fallback=decision.expert_fallback)
