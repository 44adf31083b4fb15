"""Matched-budget learning comparison at desk scale.

Three learners share one interaction budget on the same scene split:

* gated online learning (the package's main loop: expert takeovers, dual
  buffers, value anchoring, no reward),
* imitation from an expert dataset whose size equals the number of expert
  actions the gated run actually consumed, and
* a reward-driven actor-critic trained on the environment reward.

Everything here is deliberately small (short horizon, 60-ray lidar, compact
nets) so a full three-seed comparison fits in minutes on one CPU core.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import TD3Config, TD3Learner, bc_train, collect_expert_dataset, td3_tick
from .env import DrivingEnv, EnvConfig, SceneLibrary
from .errors import ConfigError
from .evaluation import EvalReport, evaluate
from .expert import ExpertParams, InterventionGate, ScriptedExpert
from .learner import LearnerConfig, PolicyLearner, train_tick

GATE_RNG_TAG = 0x6A7E
DATASET_RNG_TAG = 0xDA7A


def desk_env_config(map_seed: int = 7) -> EnvConfig:
    """Scaled-down task: 10 train / 10 test maps, moderate traffic, one core.

    Ten-block maps give routes long enough that success demands sustained
    competence (the scripted expert needs 170-330 ticks per scene), a few
    hundred imitation samples cover only a fraction of the route
    distribution, live traffic makes both sensing and speed control part of
    the task, collisions carry a reward penalty so the reward-driven
    baseline faces the full problem, and the horizon is tight enough that
    success also demands near-expert pace. Those separations are the point
    of the comparison."""
    return EnvConfig(lidar_rays=60, num_blocks=10, horizon=450,
                     traffic_per_100m=1.0, crash_penalty_enabled=True,
                     n_train_scenes=10, n_test_scenes=10, seed=map_seed)


@dataclass(frozen=True)
class ExperimentConfig:
    """One seed's worth of the comparison. Scale knobs shared by all arms."""

    seed: int = 0
    total_steps: int = 8000
    window: int = 1000              # intervention-count bucketing, in ticks
    eval_episodes: int = 20         # traffic draws differ per episode seed
    epsilon: float = 0.05           # gate firing threshold on action density
    sigma_e: float = 0.2            # expert action-model std at this scale
    hidden: tuple = (64, 64)
    batch_size: int = 128
    lr: float = 3e-4
    warmup: int = 100
    bc_weight: float = 1.0
    hil_updates_per_step: int = 2   # gated arm consolidates each takeover harder
    explore_noise: float = 0.1
    buffer_capacity: int = 10_000
    bc_epochs: int = 300
    td3_start_steps: int = 300
    env: EnvConfig = field(default_factory=desk_env_config)

    def __post_init__(self):
        if self.total_steps < 1 or self.window < 1:
            raise ConfigError("total_steps and window must be >= 1")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")


def make_envs(cfg: ExperimentConfig) -> tuple[DrivingEnv, DrivingEnv]:
    """Train and test env sharing one scene library (one generation cache)."""
    lib = SceneLibrary(cfg.env)
    return (DrivingEnv(cfg.env, split="train", library=lib),
            DrivingEnv(cfg.env, split="test", library=lib))


def learner_config(cfg: ExperimentConfig) -> LearnerConfig:
    return LearnerConfig(obs_dim=cfg.env.obs_dim, hidden=cfg.hidden,
                         batch_size=cfg.batch_size, lr=cfg.lr,
                         warmup=cfg.warmup, bc_weight=cfg.bc_weight,
                         updates_per_step=cfg.hil_updates_per_step,
                         explore_noise=cfg.explore_noise,
                         buffer_capacity=cfg.buffer_capacity)


@dataclass
class HILResult:
    report: EvalReport
    interventions_total: int
    intervention_windows: list
    episodes: int
    steps: int

    @property
    def decay_ratio(self) -> float:
        """Final-window takeovers as a fraction of first-window takeovers."""
        first = self.intervention_windows[0]
        if first == 0:
            return math.inf if self.intervention_windows[-1] > 0 else 0.0
        return self.intervention_windows[-1] / first


def run_hil(cfg: ExperimentConfig) -> HILResult:
    """Train the gated learner for the full budget, then score on test maps."""
    train_env, test_env = make_envs(cfg)
    learner = PolicyLearner(learner_config(cfg), seed=cfg.seed)
    expert = ScriptedExpert(ExpertParams(sigma_e=cfg.sigma_e))
    gate = InterventionGate(mode="threshold", epsilon=cfg.epsilon, expert=expert)
    gate_rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, GATE_RNG_TAG]))

    n_windows = math.ceil(cfg.total_steps / cfg.window)
    windows = [0] * n_windows
    episode = 0
    train_env.reset(0, episode_seed=0)
    for t in range(cfg.total_steps):
        if train_env.done:
            episode += 1
            train_env.reset(episode % cfg.env.n_train_scenes,
                            episode_seed=episode)
        tick = train_tick(train_env, gate, learner, gate_rng=gate_rng)
        windows[t // cfg.window] += int(tick.intervened)

    report = evaluate(learner.policy_snapshot(), test_env,
                      n_episodes=cfg.eval_episodes, eval_seed=cfg.seed,
                      checkpoint_step=cfg.total_steps)
    return HILResult(report=report, interventions_total=sum(windows),
                     intervention_windows=windows, episodes=episode + 1,
                     steps=cfg.total_steps)


def run_bc(cfg: ExperimentConfig, expert_budget: int) -> EvalReport:
    """Imitation trained on exactly `expert_budget` expert action samples."""
    if expert_budget < 1:
        raise ConfigError("expert_budget must be >= 1")
    train_env, test_env = make_envs(cfg)
    expert = ScriptedExpert(ExpertParams(sigma_e=cfg.sigma_e))
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, DATASET_RNG_TAG]))
    obs, acts = collect_expert_dataset(train_env, expert, expert_budget, rng)
    actor, _ = bc_train(obs, acts, hidden=cfg.hidden, lr=cfg.lr,
                        epochs=cfg.bc_epochs, batch_size=cfg.batch_size,
                        seed=cfg.seed)
    return evaluate(actor, test_env, n_episodes=cfg.eval_episodes,
                    eval_seed=cfg.seed, checkpoint_step=expert_budget)


def run_td3(cfg: ExperimentConfig) -> EvalReport:
    """Reward-driven baseline on the same tick budget, no expert anywhere."""
    train_env, test_env = make_envs(cfg)
    tcfg = TD3Config(obs_dim=cfg.env.obs_dim, hidden=cfg.hidden,
                     batch_size=cfg.batch_size, lr=cfg.lr, warmup=cfg.warmup,
                     start_steps=cfg.td3_start_steps,
                     buffer_capacity=cfg.buffer_capacity)
    learner = TD3Learner(tcfg, seed=cfg.seed)
    episode = 0
    train_env.reset(0, episode_seed=0)
    for _ in range(cfg.total_steps):
        if train_env.done:
            episode += 1
            train_env.reset(episode % cfg.env.n_train_scenes,
                            episode_seed=episode)
        td3_tick(train_env, learner)
    return evaluate(learner.policy_snapshot(), test_env,
                    n_episodes=cfg.eval_episodes, eval_seed=cfg.seed,
                    checkpoint_step=cfg.total_steps)


@dataclass
class ComparisonResult:
    hil: list
    bc: list
    td3: list
    seeds: tuple

    def summary(self) -> dict:
        hil_succ = float(np.mean([r.report.success_rate for r in self.hil]))
        bc_succ = float(np.mean([r.success_rate for r in self.bc]))
        td3_succ = float(np.mean([r.success_rate for r in self.td3]))
        decay = float(np.mean([r.decay_ratio for r in self.hil]))
        return {
            "hil_success": hil_succ,
            "bc_success": bc_succ,
            "td3_success": td3_succ,
            "margin_over_bc": hil_succ - bc_succ,
            "margin_over_td3": hil_succ - td3_succ,
            "intervention_decay_ratio": decay,
            "mean_interventions": float(np.mean(
                [r.interventions_total for r in self.hil])),
            "seeds": list(self.seeds),
        }


def run_comparison(base: ExperimentConfig, seeds=(0, 1, 2)) -> ComparisonResult:
    """Full three-arm comparison; imitation budgets match per seed."""
    hil, bc, td3 = [], [], []
    for s in seeds:
        cfg = replace(base, seed=int(s))
        h = run_hil(cfg)
        hil.append(h)
        bc.append(run_bc(cfg, max(1, h.interventions_total)))
        td3.append(run_td3(cfg))
    return ComparisonResult(hil=hil, bc=bc, td3=td3, seeds=tuple(seeds))
