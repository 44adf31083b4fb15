"""Reference baselines built on the same network core as the main learner.

Two comparison points: plain supervised imitation over expert-driven data
(matched to the main run's takeover budget), and a reward-driven twin-critic
actor-critic that uses the same TD machinery with the reward term switched
back on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .buffers import ACTION_DIM, ReplayBuffer, Transition
from .errors import ConfigError
from .learner import TickReport, bc_loss, policy_loss, td_loss, td_target
from .nets import NetSpec, ParamSet, soft_update

# ---------------------------------------------------------------------------
# supervised imitation


def bc_train(obs: np.ndarray, actions: np.ndarray, hidden=(256, 256),
             lr: float = 1e-3, epochs: int = 100, batch_size: int | None = None,
             seed: int = 0) -> tuple[ParamSet, list[float]]:
    """Regress a policy net onto (observation, action) pairs.

    Full-batch when batch_size is None, otherwise shuffled minibatches.
    Returns the trained net and the loss recorded at the start of each epoch.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    n = obs.shape[0]
    if n == 0:
        raise ConfigError("imitation training needs a non-empty dataset")
    if actions.shape[0] != n:
        raise ConfigError("observations and actions must pair up 1:1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBC]))
    spec = NetSpec(obs.shape[1], tuple(hidden), actions.shape[1], out_act="tanh")
    actor = ParamSet.initialized(spec, rng, final_scale=0.01)
    losses = []
    for _ in range(epochs):
        if batch_size is None or batch_size >= n:
            actor.zero_grad()
            losses.append(bc_loss(actor, obs, actions))
            actor.adam_step(lr)
        else:
            losses.append(float(
                0.5 * np.mean(np.sum((actor.forward(obs) - actions) ** 2, axis=1))))
            order = rng.permutation(n)
            for lo in range(0, n, batch_size):
                idx = order[lo:lo + batch_size]
                actor.zero_grad()
                bc_loss(actor, obs[idx], actions[idx])
                actor.adam_step(lr)
    return actor, losses


def collect_expert_dataset(env, expert, n_samples: int,
                           rng: np.random.Generator,
                           scene_count: int | None = None
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Let the scripted expert drive and record (observation, action) pairs.

    Actions carry the same sampling noise the intervention gate applies on
    takeover, so a matched sample count really is a matched budget.  Episodes
    cycle round-robin over the split's scenes.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    scenes = scene_count if scene_count is not None else env.library.count(env.split)
    sigma = expert.params.sigma_e
    obs_rows, act_rows = [], []
    episode = 0
    env.reset(episode % scenes, episode_seed=episode)
    while len(obs_rows) < n_samples:
        obs_rows.append(env.current_observation().vector())
        mu, _ = expert.action(env)
        a = np.clip(mu + sigma * rng.normal(size=ACTION_DIM), -1.0, 1.0)
        act_rows.append(a)
        out = env.step(a)
        if out.done:
            episode += 1
            env.reset(episode % scenes, episode_seed=episode)
    return np.asarray(obs_rows), np.asarray(act_rows)


# ---------------------------------------------------------------------------
# reward-driven actor-critic baseline


@dataclass(frozen=True)
class TD3Config:
    """Hyperparameters for the reward-based baseline."""

    obs_dim: int
    action_dim: int = ACTION_DIM
    gamma: float = 0.99
    batch_size: int = 1024
    lr: float = 1e-4
    tau: float = 0.05
    warmup: int = 100
    start_steps: int = 0  # uniform-random action period at the start
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    explore_noise: float = 0.1
    hidden: tuple[int, ...] = (256, 256)
    buffer_capacity: int = 50_000
    twin: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.obs_dim < 1 or self.batch_size < 1 or self.warmup < 1:
            raise ConfigError("obs_dim, batch_size, warmup must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must be in (0, 1)")
        if self.lr <= 0.0 or not 0.0 <= self.tau <= 1.0:
            raise ConfigError("bad lr or tau")


class TD3Learner:
    """Twin-critic deterministic-policy learner driven by the env reward."""

    def __init__(self, config: TD3Config, seed: int = 0):
        self.config = config
        init_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7D3]))
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0D3]))
        actor_spec = NetSpec(config.obs_dim, config.hidden, config.action_dim,
                             out_act="tanh")
        critic_spec = NetSpec(config.obs_dim + config.action_dim, config.hidden, 1)
        self.actor = ParamSet.initialized(actor_spec, init_rng, final_scale=0.01)
        n_critics = 2 if config.twin else 1
        self.critics = [ParamSet.initialized(critic_spec, init_rng)
                        for _ in range(n_critics)]
        self.actor_target = self.actor.copy()
        self.critic_targets = [c.copy() for c in self.critics]
        self.buffer = ReplayBuffer(config.buffer_capacity, config.obs_dim)
        self.tick_count = 0
        self.update_count = 0

    def act(self, obs: np.ndarray, explore: bool = False) -> np.ndarray:
        a = self.actor.forward(np.asarray(obs, dtype=np.float64))
        if explore and self.config.explore_noise > 0.0:
            a = a + self.rng.normal(0.0, self.config.explore_noise, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def observe(self, t: Transition) -> None:
        self.buffer.append(t)

    def update(self) -> dict | None:
        cfg = self.config
        if len(self.buffer) < cfg.warmup:
            return None
        batch = self.buffer.sample(cfg.batch_size, self.rng)
        y = td_target(batch, self.critic_targets, self.actor_target, cfg.gamma,
                      cfg.target_noise, cfg.target_noise_clip, self.rng,
                      include_reward=True)
        td_vals = []
        for critic in self.critics:
            critic.zero_grad()
            td_vals.append(td_loss(critic, batch, y))
            critic.adam_step(cfg.lr)
        self.update_count += 1
        report = {"loss_td": float(np.mean(td_vals)), "loss_policy": None}
        if self.update_count % cfg.policy_delay == 0:
            self.actor.zero_grad()
            total, _, _ = policy_loss(self.actor, self.critics[0], batch.obs,
                                      np.zeros((0, cfg.obs_dim)),
                                      np.zeros((0, cfg.action_dim)), 0.0)
            self.actor.adam_step(cfg.lr)
            soft_update(self.actor_target, self.actor, cfg.tau)
            for tgt, src in zip(self.critic_targets, self.critics):
                soft_update(tgt, src, cfg.tau)
            report["loss_policy"] = total
        return report

    def policy_snapshot(self) -> ParamSet:
        return self.actor.copy()


def td3_tick(env, learner: TD3Learner) -> TickReport:
    """One control tick of the reward-driven baseline (no gate, no human)."""
    cfg = learner.config
    s = env.current_observation().vector()
    if learner.tick_count < cfg.start_steps:
        a = learner.rng.uniform(-1.0, 1.0, size=cfg.action_dim)
    else:
        a = learner.act(s, explore=True)
    out = env.step(a)
    learner.observe(Transition(obs=s, a_n=a, a_h=None, intervened=False,
                               next_obs=out.observation.vector(), done=out.done,
                               reward=out.reward, cost=out.cost))
    learner.tick_count += 1
    losses = learner.update()
    events = tuple(f for f, v in out.flags.items() if v)
    if out.done:
        events = events + (out.termination,)
    return TickReport(step=learner.tick_count, intervened=False, done=out.done,
                      termination=out.termination, reward=out.reward,
                      cost=out.cost, events=events, losses=losses,
                      buffer_sizes=(0, len(learner.buffer)))
