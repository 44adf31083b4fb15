"""Run-directory persistence: layout, metrics log, checkpoints, curve export.

Layout under a run directory:

    config.json                     frozen config snapshot
    metrics.log                     one JSON object per control tick
    checkpoints/step_NNNNNNNN/      nets.json + state.json + buffers.npz
    trajectories/episode_NNNNNN.json
    evals/step_NNNNNNNN.json

Checkpoints carry everything exact resume needs: network parameters with
optimizer moments, both replay buffers, all step counters, and every RNG
state (learner, gate, environment).
"""

import json
import os

import numpy as np

from .buffers import DualBuffer
from .errors import StateError
from .evaluation import EvalReport
from .nets import load_params, save_params

CONFIG_FILE = "config.json"
METRICS_FILE = "metrics.log"
CHECKPOINT_DIR = "checkpoints"
TRAJ_DIR = "trajectories"
EVAL_DIR = "evals"

CURVE_HEADER = ("step,n_episodes,success_rate,out_rate,timeout_rate,"
                "crash_rate,mean_cost,mean_reward,mean_completion,"
                "mean_interventions")

METRIC_KEYS = ("step", "I", "loss_proxy", "loss_td", "loss_q_total",
               "loss_policy", "loss_bc", "buffer_h", "buffer_n", "events")


def init_run_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    for sub in (CHECKPOINT_DIR, TRAJ_DIR, EVAL_DIR):
        os.makedirs(os.path.join(path, sub), exist_ok=True)
    return path


class MetricsWriter:
    """Append-only line-delimited metrics log, flushed per record."""

    def __init__(self, run_dir: str):
        self.path = os.path.join(run_dir, METRICS_FILE)
        self._fh = open(self.path, "a")

    def write(self, record: dict) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_metrics(run_dir: str):
    """Yield metrics records oldest-first; missing log yields nothing."""
    path = os.path.join(run_dir, METRICS_FILE)
    if not os.path.exists(path):
        return
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_trajectory(run_dir: str, episode_index: int, records: list,
                     scene_index: int = 0, episode_seed: int = 0,
                     split: str = "train") -> str:
    path = os.path.join(run_dir, TRAJ_DIR, f"episode_{episode_index:06d}.json")
    doc = {"episode": int(episode_index), "scene_index": int(scene_index),
           "episode_seed": int(episode_seed), "split": split,
           "records": records}
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return path


def read_trajectory(run_dir: str, episode_index: int) -> dict:
    path = os.path.join(run_dir, TRAJ_DIR, f"episode_{episode_index:06d}.json")
    if not os.path.exists(path):
        raise StateError(f"no trajectory for episode {episode_index} in {run_dir}")
    with open(path) as fh:
        return json.load(fh)


def write_eval_report(run_dir: str, report: EvalReport) -> str:
    path = os.path.join(run_dir, EVAL_DIR,
                        f"step_{report.checkpoint_step:08d}.json")
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    return path


def read_eval_reports(run_dir: str) -> list:
    """All persisted eval reports, ordered by checkpoint step."""
    eval_dir = os.path.join(run_dir, EVAL_DIR)
    if not os.path.isdir(eval_dir):
        return []
    reports = []
    for name in sorted(os.listdir(eval_dir)):
        if name.startswith("step_") and name.endswith(".json"):
            with open(os.path.join(eval_dir, name)) as fh:
                reports.append(EvalReport.from_dict(json.load(fh)))
    reports.sort(key=lambda r: r.checkpoint_step)
    return reports


def export_learning_curve(run_dir: str, out_path: str | None = None) -> str:
    """Write the eval history as comma-delimited text; returns the path.

    Header (documented contract): step, n_episodes, success_rate, out_rate,
    timeout_rate, crash_rate, mean_cost, mean_reward, mean_completion,
    mean_interventions. An empty eval history produces a header-only file.
    """
    reports = read_eval_reports(run_dir)
    lines = [CURVE_HEADER]
    for r in reports:
        lines.append(",".join([
            str(r.checkpoint_step), str(r.n_episodes),
            repr(r.success_rate), repr(r.out_rate), repr(r.timeout_rate),
            repr(r.crash_rate), repr(r.mean_cost), repr(r.mean_reward),
            repr(r.mean_completion), repr(r.mean_interventions)]))
    out_path = out_path or os.path.join(run_dir, "curve.csv")
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return out_path


# -- checkpoints ---------------------------------------------------------------


def checkpoint_path(run_dir: str, step: int) -> str:
    return os.path.join(run_dir, CHECKPOINT_DIR, f"step_{step:08d}")


def list_checkpoints(run_dir: str) -> list:
    """(step, path) pairs sorted ascending by step."""
    root = os.path.join(run_dir, CHECKPOINT_DIR)
    if not os.path.isdir(root):
        return []
    out = []
    for name in sorted(os.listdir(root)):
        if name.startswith("step_"):
            try:
                out.append((int(name[5:]), os.path.join(root, name)))
            except ValueError:
                continue
    return sorted(out)


def save_checkpoint(run_dir: str, step: int, learner, env,
                    gate_rng: np.random.Generator | None,
                    episode_index: int) -> str:
    """Persist nets, buffers, and every state needed for exact resume."""
    path = checkpoint_path(run_dir, step)
    os.makedirs(path, exist_ok=True)
    save_params(learner.nets(), os.path.join(path, "nets.json"))
    sidecar = {
        "step": int(step),
        "episode_index": int(episode_index),
        "learner": learner.get_state(),
        "buffer_sizes": list(learner.buffers.sizes()),
        "gate_rng": None if gate_rng is None else gate_rng.bit_generator.state,
        "env": env.get_state(),
    }
    with open(os.path.join(path, "state.json"), "w") as fh:
        json.dump(sidecar, fh)
    np.savez_compressed(os.path.join(path, "buffers.npz"),
                        **learner.buffers.state_arrays())
    return path


def load_checkpoint(path: str) -> dict:
    """Read a checkpoint directory back into plain python/numpy objects."""
    if not os.path.isdir(path):
        raise StateError(f"checkpoint directory {path!r} does not exist")
    try:
        nets = load_params(os.path.join(path, "nets.json"))
        with open(os.path.join(path, "state.json")) as fh:
            sidecar = json.load(fh)
        with np.load(os.path.join(path, "buffers.npz")) as z:
            buffer_arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError, json.JSONDecodeError, KeyError) as e:
        raise StateError(f"checkpoint at {path!r} is unreadable: {e}") from e
    return {"nets": nets, "sidecar": sidecar, "buffer_arrays": buffer_arrays}


def restore_learner(learner, ckpt: dict) -> None:
    """Load checkpointed nets, buffers, counters, and RNG into a learner."""
    nets = ckpt["nets"]
    for name, target in learner.nets().items():
        if name not in nets:
            raise StateError(f"checkpoint is missing network {name!r}")
        src = nets[name]
        target.theta[:] = src.theta
        target.moment1[:] = src.moment1
        target.moment2[:] = src.moment2
        target.step_count = src.step_count
    learner.buffers = DualBuffer.from_state_arrays(ckpt["buffer_arrays"])
    learner.set_state(ckpt["sidecar"]["learner"])
    sizes = tuple(ckpt["sidecar"]["buffer_sizes"])
    if learner.buffers.sizes() != sizes:
        raise StateError(
            f"buffer sizes {learner.buffers.sizes()} disagree with the "
            f"sidecar record {sizes}")
