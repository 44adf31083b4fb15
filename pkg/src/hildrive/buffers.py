"""Transition storage: two bounded FIFO stores sampled in equal halves.

Overridden ticks and autonomous ticks are kept in separate stores so that
minibatches can draw the same amount from each, no matter how rare
interventions become as training progresses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError, StateError

ACTION_DIM = 2

DEFAULT_CAPACITY = 50_000


@dataclass
class Transition:
    """One control tick as seen by the learner.

    ``a_n`` is the agent's proposed action, ``a_h`` the overriding action
    when the tick was intervened (None otherwise), and the executed action
    is always the intervention-selected branch of the two.  ``reward`` is
    carried for baselines and diagnostics only; the main learner never
    reads it.
    """

    obs: np.ndarray
    a_n: np.ndarray
    a_h: np.ndarray | None
    intervened: bool
    next_obs: np.ndarray
    done: bool
    reward: float = 0.0
    cost: float = 0.0

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=np.float64)
        self.next_obs = np.asarray(self.next_obs, dtype=np.float64)
        self.a_n = np.asarray(self.a_n, dtype=np.float64)
        self.intervened = bool(self.intervened)
        self.done = bool(self.done)
        self.reward = float(self.reward)
        self.cost = float(self.cost)
        if self.obs.ndim != 1 or self.obs.shape != self.next_obs.shape:
            raise DimensionError("obs and next_obs must be 1-D and equal length")
        if self.a_n.shape != (ACTION_DIM,):
            raise DimensionError(f"a_n must have shape ({ACTION_DIM},)")
        if self.intervened:
            if self.a_h is None:
                raise ContractError("intervened transition requires a_h")
            self.a_h = np.asarray(self.a_h, dtype=np.float64)
            if self.a_h.shape != (ACTION_DIM,):
                raise DimensionError(f"a_h must have shape ({ACTION_DIM},)")
            if np.any(np.abs(self.a_h) > 1.0 + 1e-12):
                raise ContractError("a_h outside [-1, 1]")
        elif self.a_h is not None:
            raise ContractError("non-intervened transition must not carry a_h")
        if np.any(np.abs(self.a_n) > 1.0 + 1e-12):
            raise ContractError("a_n outside [-1, 1]")
        if not (np.all(np.isfinite(self.obs)) and np.all(np.isfinite(self.next_obs))):
            raise ContractError("non-finite observation")

    @property
    def executed(self) -> np.ndarray:
        """The action that actually drove the environment this tick."""
        return self.a_h if self.intervened else self.a_n


@dataclass
class Batch:
    """Column-stacked view of sampled transitions.

    ``a_h`` rows are zero where ``intervened`` is False; consumers must mask
    by the flag before touching them.
    """

    obs: np.ndarray
    a_n: np.ndarray
    a_h: np.ndarray
    intervened: np.ndarray
    executed: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    reward: np.ndarray
    cost: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]

    def concat(self, other: "Batch") -> "Batch":
        return Batch(*[np.concatenate([getattr(self, f), getattr(other, f)], axis=0)
                       for f in ("obs", "a_n", "a_h", "intervened", "executed",
                                 "next_obs", "done", "reward", "cost")])

    @classmethod
    def empty(cls, obs_dim: int) -> "Batch":
        z = np.zeros((0, obs_dim))
        a = np.zeros((0, ACTION_DIM))
        v = np.zeros(0)
        return cls(obs=z, a_n=a, a_h=a.copy(), intervened=np.zeros(0, dtype=bool),
                   executed=a.copy(), next_obs=z.copy(), done=np.zeros(0, dtype=bool),
                   reward=v, cost=v.copy())


class ReplayBuffer:
    """Bounded FIFO transition store over preallocated columns."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1 or obs_dim < 1:
            raise ContractError("capacity and obs_dim must be >= 1")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.inserted = 0  # lifetime counter, also the FIFO write cursor
        n, d = self.capacity, self.obs_dim
        self._obs = np.zeros((n, d))
        self._a_n = np.zeros((n, ACTION_DIM))
        self._a_h = np.zeros((n, ACTION_DIM))
        self._intervened = np.zeros(n, dtype=bool)
        self._next_obs = np.zeros((n, d))
        self._done = np.zeros(n, dtype=bool)
        self._reward = np.zeros(n)
        self._cost = np.zeros(n)

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def append(self, t: Transition) -> None:
        if t.obs.shape != (self.obs_dim,):
            raise DimensionError(
                f"transition obs has dim {t.obs.shape[0]}, buffer expects {self.obs_dim}")
        i = self.inserted % self.capacity
        self._obs[i] = t.obs
        self._a_n[i] = t.a_n
        self._a_h[i] = t.a_h if t.intervened else 0.0
        self._intervened[i] = t.intervened
        self._next_obs[i] = t.next_obs
        self._done[i] = t.done
        self._reward[i] = t.reward
        self._cost[i] = t.cost
        self.inserted += 1

    def gather(self, idx: np.ndarray) -> Batch:
        return Batch(obs=self._obs[idx], a_n=self._a_n[idx], a_h=self._a_h[idx],
                     intervened=self._intervened[idx],
                     executed=np.where(self._intervened[idx, None],
                                       self._a_h[idx], self._a_n[idx]),
                     next_obs=self._next_obs[idx], done=self._done[idx],
                     reward=self._reward[idx], cost=self._cost[idx])

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        """Uniform with-replacement draw of n stored transitions."""
        if len(self) == 0:
            raise StateError("cannot sample from an empty buffer")
        return self.gather(rng.integers(0, len(self), size=int(n)))

    def transitions(self):
        """Stored transitions, oldest first."""
        size = len(self)
        start = self.inserted - size
        for k in range(size):
            i = (start + k) % self.capacity
            intervened = bool(self._intervened[i])
            yield Transition(obs=self._obs[i].copy(), a_n=self._a_n[i].copy(),
                             a_h=self._a_h[i].copy() if intervened else None,
                             intervened=intervened,
                             next_obs=self._next_obs[i].copy(),
                             done=bool(self._done[i]),
                             reward=float(self._reward[i]),
                             cost=float(self._cost[i]))

    # -- checkpoint support ----------------------------------------------------

    def state_arrays(self) -> dict:
        return {"obs": self._obs, "a_n": self._a_n, "a_h": self._a_h,
                "intervened": self._intervened, "next_obs": self._next_obs,
                "done": self._done, "reward": self._reward, "cost": self._cost,
                "inserted": np.array(self.inserted),
                "capacity": np.array(self.capacity)}

    @classmethod
    def from_state_arrays(cls, d: dict) -> "ReplayBuffer":
        buf = cls(int(d["capacity"]), int(np.asarray(d["obs"]).shape[1]))
        buf._obs[...] = d["obs"]
        buf._a_n[...] = d["a_n"]
        buf._a_h[...] = d["a_h"]
        buf._intervened[...] = d["intervened"]
        buf._next_obs[...] = d["next_obs"]
        buf._done[...] = d["done"]
        buf._reward[...] = d["reward"]
        buf._cost[...] = d["cost"]
        buf.inserted = int(d["inserted"])
        return buf


class DualBuffer:
    """Paired stores for intervened vs autonomous transitions."""

    def __init__(self, obs_dim: int, capacity: int = DEFAULT_CAPACITY):
        self.obs_dim = int(obs_dim)
        self.intervened = ReplayBuffer(capacity, obs_dim)
        self.autonomous = ReplayBuffer(capacity, obs_dim)

    def store(self, t: Transition) -> None:
        """Route by the intervention flag; invariants re-checked on entry."""
        if t.intervened and t.a_h is None:
            raise ContractError("intervened transition requires a_h")
        if not t.intervened and t.a_h is not None:
            raise ContractError("non-intervened transition must not carry a_h")
        (self.intervened if t.intervened else self.autonomous).append(t)

    def sizes(self) -> tuple[int, int]:
        return len(self.intervened), len(self.autonomous)

    def ready(self, warmup: int) -> bool:
        return len(self.intervened) >= warmup and len(self.autonomous) >= warmup

    def sample_balanced(self, n: int, rng: np.random.Generator,
                        warmup: int = 1) -> tuple[Batch, Batch] | None:
        """Draw n from each store, independently and with replacement.

        Returns None (the not-ready signal, not an error) while either store
        is below the warmup size.
        """
        if not self.ready(warmup):
            return None
        batch_h = self.intervened.sample(n, rng)
        batch_n = self.autonomous.sample(n, rng)
        return batch_h, batch_n

    def state_arrays(self) -> dict:
        d = {f"h_{k}": v for k, v in self.intervened.state_arrays().items()}
        d.update({f"n_{k}": v for k, v in self.autonomous.state_arrays().items()})
        return d

    @classmethod
    def from_state_arrays(cls, d: dict) -> "DualBuffer":
        h = ReplayBuffer.from_state_arrays(
            {k[2:]: v for k, v in d.items() if k.startswith("h_")})
        n = ReplayBuffer.from_state_arrays(
            {k[2:]: v for k, v in d.items() if k.startswith("n_")})
        buf = cls(h.obs_dim, h.capacity)
        buf.intervened = h
        buf.autonomous = n
        return buf
