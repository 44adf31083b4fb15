"""Feed-forward networks with hand-rolled reverse-mode gradients.

The only topology needed anywhere in the package is a fully-connected MLP,
so gradients are computed from a per-forward tape rather than a general
autodiff graph. All parameters live in one flat float64 vector; the
structured per-layer weight/bias matrices are numpy views into it, so
writing through either view is visible in the other.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, NumericError, StateError

ACTIVATIONS = ("identity", "relu", "tanh")

CHECKPOINT_FORMAT = "nncore-v1"


def _act(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "identity":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation: {tag!r}")


def _act_grad(tag: str, z: np.ndarray) -> np.ndarray:
    """Derivative of the activation evaluated at pre-activation z."""
    if tag == "identity":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0.0).astype(np.float64)
    if tag == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    raise ValueError(f"unknown activation: {tag!r}")


@dataclass(frozen=True)
class NetSpec:
    """Widths and activation tags of a fully-connected network."""

    in_dim: int
    hidden: tuple[int, ...] = (256, 256)
    out_dim: int = 1
    hidden_act: str = "relu"
    out_act: str = "identity"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1 or any(h < 1 for h in self.hidden):
            raise DimensionError("all layer widths must be >= 1")
        for tag in (self.hidden_act, self.out_act):
            if tag not in ACTIVATIONS:
                raise ValueError(f"unknown activation: {tag!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per layer, input to output order."""
        widths = [self.in_dim, *self.hidden, self.out_dim]
        return [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]

    def activation_tags(self) -> list[str]:
        return [self.hidden_act] * len(self.hidden) + [self.out_act]

    def param_count(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_dims())

    def to_dict(self) -> dict:
        return {
            "in_dim": self.in_dim,
            "hidden": list(self.hidden),
            "out_dim": self.out_dim,
            "hidden_act": self.hidden_act,
            "out_act": self.out_act,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetSpec":
        return cls(
            in_dim=int(d["in_dim"]),
            hidden=tuple(int(h) for h in d["hidden"]),
            out_dim=int(d["out_dim"]),
            hidden_act=d["hidden_act"],
            out_act=d["out_act"],
        )


@dataclass
class Tape:
    """Intermediate activations of one forward pass.

    ``inputs[i]`` is the input to layer i (2D, batch-first) and ``pre[i]``
    its pre-activation; ``squeezed`` records whether the original input was
    a single vector rather than a batch.
    """

    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    squeezed: bool


class ParamSet:
    """Parameters, gradient accumulator, and optimizer state of one MLP.

    The flat vector ``theta`` owns the storage; ``weights[i]`` and
    ``biases[i]`` are views into it (same for ``grad`` via ``w_grads`` /
    ``b_grads``). Not thread-safe; share deep copies for telemetry.
    """

    def __init__(self, spec: NetSpec):
        self.spec = spec
        n = spec.param_count()
        self.theta = np.zeros(n, dtype=np.float64)
        self.grad = np.zeros(n, dtype=np.float64)
        self.moment1 = np.zeros(n, dtype=np.float64)
        self.moment2 = np.zeros(n, dtype=np.float64)
        self.step_count = 0
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        self.w_grads: list[np.ndarray] = []
        self.b_grads: list[np.ndarray] = []
        self._acts = spec.activation_tags()
        off = 0
        for fan_in, fan_out in spec.layer_dims():
            self.weights.append(self.theta[off:off + fan_in * fan_out].reshape(fan_out, fan_in))
            self.w_grads.append(self.grad[off:off + fan_in * fan_out].reshape(fan_out, fan_in))
            off += fan_in * fan_out
            self.biases.append(self.theta[off:off + fan_out])
            self.b_grads.append(self.grad[off:off + fan_out])
            off += fan_out

    # ------------------------------------------------------------------
    # construction

    @classmethod
    def initialized(cls, spec: NetSpec, rng: np.random.Generator,
                    final_scale: float = 1.0) -> "ParamSet":
        """Uniform fan-in scaled init; ``final_scale`` shrinks the output layer.

        Action heads use final_scale=0.01 so a fresh policy is near zero.
        """
        ps = cls(spec)
        n_layers = len(ps.weights)
        for i, (fan_in, _) in enumerate(spec.layer_dims()):
            bound = 1.0 / np.sqrt(fan_in)
            ps.weights[i][...] = rng.uniform(-bound, bound, size=ps.weights[i].shape)
            ps.biases[i][...] = rng.uniform(-bound, bound, size=ps.biases[i].shape)
            if i == n_layers - 1 and final_scale != 1.0:
                ps.weights[i] *= final_scale
                ps.biases[i] *= final_scale
        return ps

    def copy(self) -> "ParamSet":
        """Deep snapshot (parameters, gradient, optimizer state)."""
        ps = ParamSet(self.spec)
        ps.theta[...] = self.theta
        ps.grad[...] = self.grad
        ps.moment1[...] = self.moment1
        ps.moment2[...] = self.moment2
        ps.step_count = self.step_count
        return ps

    # ------------------------------------------------------------------
    # forward / backward

    def _check_input(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        squeezed = x.ndim == 1
        if squeezed:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.spec.in_dim:
            raise DimensionError(
                f"input width {x.shape[-1]} does not match spec in_dim {self.spec.in_dim}")
        return x, squeezed

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the network; pure and deterministic."""
        h, squeezed = self._check_input(x)
        for W, b, tag in zip(self.weights, self.biases, self._acts):
            h = _act(tag, h @ W.T + b)
        return h[0] if squeezed else h

    def forward_tape(self, x: np.ndarray) -> tuple[np.ndarray, Tape]:
        """Forward pass that records the intermediates needed by backward()."""
        h, squeezed = self._check_input(x)
        inputs, pre = [], []
        for W, b, tag in zip(self.weights, self.biases, self._acts):
            inputs.append(h)
            z = h @ W.T + b
            pre.append(z)
            h = _act(tag, z)
        out = h[0] if squeezed else h
        return out, Tape(inputs=inputs, pre=pre, squeezed=squeezed)

    def backward(self, tape: Tape, upstream: np.ndarray,
                 accumulate: bool = True) -> np.ndarray:
        """Backpropagate d(upstream . output) through the taped pass.

        Accumulates parameter gradients (unless ``accumulate`` is False,
        used when this net acts as a frozen critic) and returns the
        gradient w.r.t. the input.
        """
        if tape is None or not tape.inputs:
            raise StateError("backward() requires the tape of a matching forward pass")
        u = np.asarray(upstream, dtype=np.float64)
        if tape.squeezed:
            u = u[None, :]
        if u.shape != (tape.inputs[0].shape[0], self.spec.out_dim):
            raise DimensionError(
                f"upstream shape {u.shape} does not match output "
                f"({tape.inputs[0].shape[0]}, {self.spec.out_dim})")
        delta = u
        for i in range(len(self.weights) - 1, -1, -1):
            delta = delta * _act_grad(self._acts[i], tape.pre[i])
            if accumulate:
                self.w_grads[i] += delta.T @ tape.inputs[i]
                self.b_grads[i] += delta.sum(axis=0)
            delta = delta @ self.weights[i]
        return delta[0] if tape.squeezed else delta

    def zero_grad(self):
        self.grad[...] = 0.0

    # ------------------------------------------------------------------
    # optimization

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8):
        """Adaptive-moment update with bias correction; zeroes the accumulator."""
        if not np.all(np.isfinite(self.grad)):
            raise NumericError("non-finite gradient; parameters left untouched")
        self.step_count += 1
        t = self.step_count
        self.moment1[...] = beta1 * self.moment1 + (1.0 - beta1) * self.grad
        self.moment2[...] = beta2 * self.moment2 + (1.0 - beta2) * self.grad * self.grad
        m_hat = self.moment1 / (1.0 - beta1 ** t)
        v_hat = self.moment2 / (1.0 - beta2 ** t)
        self.theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if not np.all(np.isfinite(self.theta)):
            raise NumericError("optimizer step produced non-finite parameters")
        self.zero_grad()


def soft_update(target: ParamSet, online: ParamSet, tau: float):
    """target <- (1 - tau) * target + tau * online, elementwise."""
    if target.spec != online.spec:
        raise DimensionError("soft_update requires identical network specs")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    target.theta[...] = (1.0 - tau) * target.theta + tau * online.theta


# ----------------------------------------------------------------------
# checkpoint I/O ("nncore-v1": one JSON file holding named nets)


def _encode(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode(s: str, n: int) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(s.encode("ascii")), dtype="<f8").astype(np.float64)
    if a.shape[0] != n:
        raise DimensionError(f"checkpoint array has {a.shape[0]} values, expected {n}")
    return a


def save_params(nets: dict[str, ParamSet], path) -> None:
    """Write named parameter sets to one nncore-v1 checkpoint file."""
    doc = {"format": CHECKPOINT_FORMAT, "nets": {}}
    for name, ps in nets.items():
        doc["nets"][name] = {
            "spec": ps.spec.to_dict(),
            "theta": _encode(ps.theta),
            "moment1": _encode(ps.moment1),
            "moment2": _encode(ps.moment2),
            "step_count": ps.step_count,
        }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True)


def load_params(path) -> dict[str, ParamSet]:
    """Load an nncore-v1 checkpoint; forward outputs reproduce exactly."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} checkpoint: {path}")
    nets = {}
    for name, entry in doc["nets"].items():
        spec = NetSpec.from_dict(entry["spec"])
        ps = ParamSet(spec)
        n = spec.param_count()
        ps.theta[...] = _decode(entry["theta"], n)
        ps.moment1[...] = _decode(entry["moment1"], n)
        ps.moment2[...] = _decode(entry["moment2"], n)
        ps.step_count = int(entry["step_count"])
        nets[name] = ps
    return nets
