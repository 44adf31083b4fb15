"""Run configuration: one structured JSON file covering every module.

Strictness rules: unknown keys are rejected at every level, the learner's
observation width is derived from the env section (never configurable), and
any field can be overridden through environment variables with the
``HILDRIVE_`` prefix, e.g. ``HILDRIVE_LEARNER_LR=3e-4`` or
``HILDRIVE_ENV_N_TRAIN_SCENES=10``.
"""

import dataclasses
import json
import os
import types
import typing

from .env import DrivingEnv, EnvConfig, SceneLibrary
from .errors import ConfigError
from .expert import ExpertParams, InterventionGate, OverrideChannel, ScriptedExpert
from .learner import LearnerConfig, PolicyLearner

ENV_PREFIX = "HILDRIVE_"
GATE_MODES_CLI = ("threshold", "live", "off")


@dataclasses.dataclass(frozen=True)
class GateConfig:
    """How interventions are decided during training."""

    mode: str = "threshold"      # threshold | live | off
    epsilon: float = 0.05        # density threshold for takeover
    sigma_e: float = 0.3         # expert action-model std
    stale_after: float = 1.0     # live mode: seconds before failsafe braking

    def __post_init__(self):
        if self.mode not in GATE_MODES_CLI:
            raise ConfigError(
                f"gate mode {self.mode!r} not in {GATE_MODES_CLI}")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.sigma_e <= 0 or self.stale_after <= 0:
            raise ConfigError("sigma_e and stale_after must be > 0")


@dataclasses.dataclass(frozen=True)
class RunSection:
    """Schedule and bookkeeping for one training run."""

    seed: int = 0
    total_steps: int = 40_000
    eval_every: int = 200        # environment interactions between evals
    eval_episodes: int = 100
    checkpoint_every: int = 1000
    run_dir: str | None = None   # usually supplied by the CLI --out flag

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if self.eval_every < 0 or self.checkpoint_every < 0:
            raise ConfigError("cadences must be >= 0 (0 disables)")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = dataclasses.field(default_factory=EnvConfig)
    learner: LearnerConfig = None
    gate: GateConfig = dataclasses.field(default_factory=GateConfig)
    run: RunSection = dataclasses.field(default_factory=RunSection)

    def __post_init__(self):
        if self.learner is None:
            object.__setattr__(self, "learner",
                               LearnerConfig(obs_dim=self.env.obs_dim))
        if self.learner.obs_dim != self.env.obs_dim:
            raise ConfigError(
                f"learner obs_dim {self.learner.obs_dim} does not match the "
                f"env observation width {self.env.obs_dim}; it is derived, "
                "not configurable")

    # -- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "env": dataclasses.asdict(self.env),
            "learner": dataclasses.asdict(self.learner),
            "gate": dataclasses.asdict(self.gate),
            "run": dataclasses.asdict(self.run),
        }
        del d["learner"]["obs_dim"]
        d["learner"]["hidden"] = list(self.learner.hidden)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        unknown = set(raw) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        parts = {}
        for name, section_cls in _SECTIONS.items():
            body = raw.get(name, {})
            if not isinstance(body, dict):
                raise ConfigError(f"section {name!r} must be an object")
            _check_keys(name, section_cls, body)
            parts[name] = dict(body)
        if "obs_dim" in parts["learner"]:
            raise ConfigError(
                "learner.obs_dim is derived from the env section; remove it")
        env = EnvConfig(**parts["env"])
        learner = LearnerConfig(obs_dim=env.obs_dim, **parts["learner"])
        return cls(env=env, learner=learner,
                   gate=GateConfig(**parts["gate"]),
                   run=RunSection(**parts["run"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        return cls.from_dict(raw)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path, environ: dict | None = None) -> "RunConfig":
        """Read a config file and apply HILDRIVE_* overrides on top."""
        with open(path) as fh:
            raw = json.load(fh)
        return cls.from_dict(apply_env_overrides(raw, environ))


_SECTIONS = {"env": EnvConfig, "learner": LearnerConfig,
             "gate": GateConfig, "run": RunSection}


def _field_types(cls) -> dict:
    return typing.get_type_hints(cls)


def _check_keys(section: str, cls, body: dict) -> None:
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(body) - allowed
    if unknown:
        raise ConfigError(
            f"unknown keys in section {section!r}: {sorted(unknown)}")


def _coerce(raw: str, typ, var: str):
    origin = typing.get_origin(typ)
    if origin in (typing.Union, types.UnionType):  # e.g. str | None
        args = [a for a in typing.get_args(typ) if a is not type(None)]
        if raw.lower() in ("none", "null", ""):
            return None
        return _coerce(raw, args[0], var)
    if origin is tuple:
        inner = typing.get_args(typ)[0]
        parts = [p for p in raw.replace(",", " ").split() if p]
        return tuple(_coerce(p, inner, var) for p in parts)
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is str:
            return raw
    except ValueError as e:
        raise ConfigError(f"{var}: cannot parse {raw!r} as {typ.__name__}") from e
    raise ConfigError(f"{var}: unsupported override type {typ!r}")


def apply_env_overrides(raw: dict, environ: dict | None = None) -> dict:
    """Overlay HILDRIVE_<SECTION>_<FIELD> variables onto a raw config dict."""
    environ = os.environ if environ is None else environ
    out = {k: dict(v) for k, v in raw.items() if isinstance(v, dict)}
    out.update({k: v for k, v in raw.items() if not isinstance(v, dict)})
    for var, value in sorted(environ.items()):
        if not var.startswith(ENV_PREFIX):
            continue
        rest = var[len(ENV_PREFIX):]
        section, _, field_part = rest.partition("_")
        section = section.lower()
        field_name = field_part.lower()
        if section not in _SECTIONS or not field_name:
            raise ConfigError(f"unrecognized override variable {var}")
        cls = _SECTIONS[section]
        hints = _field_types(cls)
        if field_name not in hints:
            raise ConfigError(
                f"{var}: section {section!r} has no field {field_name!r}")
        out.setdefault(section, {})
        out[section][field_name] = _coerce(value, hints[field_name], var)
    return out


# -- constructing live objects from a config ---------------------------------


def build_envs(rc: RunConfig) -> tuple[DrivingEnv, DrivingEnv]:
    """Train and test environments sharing one scene-generation cache."""
    lib = SceneLibrary(rc.env)
    return (DrivingEnv(rc.env, split="train", library=lib),
            DrivingEnv(rc.env, split="test", library=lib))


def build_learner(rc: RunConfig) -> PolicyLearner:
    return PolicyLearner(rc.learner, seed=rc.run.seed)


def build_gate(rc: RunConfig,
               channel: OverrideChannel | None = None) -> InterventionGate:
    """Map the CLI-facing mode names onto the gate implementation."""
    expert = ScriptedExpert(ExpertParams(sigma_e=rc.gate.sigma_e))
    if rc.gate.mode == "live":
        return InterventionGate(mode="human", epsilon=rc.gate.epsilon,
                                expert=expert,
                                channel=channel or OverrideChannel(),
                                stale_after=rc.gate.stale_after)
    return InterventionGate(mode=rc.gate.mode, epsilon=rc.gate.epsilon,
                            expert=expert)
