"""Online training driver: tick loop, persistence cadence, and exact resume.

One OnlineTrainer owns a train env, a test env, the gate, and the learner.
Headless runs are unpaced; live mode paces each tick to the 0.2 s control
period and never blocks on network I/O (frames go out through a caller
supplied non-blocking sink, overrides come in through the gate's channel).
"""

import logging
import os
import time

import numpy as np

from . import runio
from .config import RunConfig, build_envs, build_gate, build_learner
from .errors import StateError
from .evaluation import evaluate
from .expert import OverrideChannel
from .learner import train_tick

log = logging.getLogger("hildrive.driver")

TICK_SECONDS = 0.2
GATE_RNG_TAG = 0x6A7E
LIDAR_FRAME_RAYS = 60  # outbound frames decimate the scan to this many rays


class OnlineTrainer:
    """Drives train_tick against the configured env, gate, and learner."""

    def __init__(self, rc: RunConfig, run_dir: str,
                 channel: OverrideChannel | None = None,
                 frame_sink=None, paced: bool | None = None):
        self.rc = rc
        self.run_dir = runio.init_run_dir(run_dir)
        cfg_path = os.path.join(self.run_dir, runio.CONFIG_FILE)
        if not os.path.exists(cfg_path):
            rc.save(cfg_path)
        self.train_env, self.test_env = build_envs(rc)
        self.channel = channel
        self.gate = build_gate(rc, channel)
        if self.gate.channel is not None:
            self.channel = self.gate.channel
        self.learner = build_learner(rc)
        self.gate_rng = np.random.default_rng(
            np.random.SeedSequence([rc.run.seed, GATE_RNG_TAG]))
        self.episode_index = 0
        self.frame_sink = frame_sink
        self.paced = (rc.gate.mode == "live") if paced is None else paced
        self.latest_eval = None
        self.latest_losses = None
        self._started = False
        self._last_ckpt_step = None
        self._stop = False
        self._scene_key = None
        self._scene_payload_cache: dict = {}

    # -- resume ---------------------------------------------------------------

    @classmethod
    def resume(cls, rc: RunConfig, run_dir: str, checkpoint: str,
               channel: OverrideChannel | None = None,
               frame_sink=None) -> "OnlineTrainer":
        tr = cls(rc, run_dir, channel=channel, frame_sink=frame_sink)
        ckpt = runio.load_checkpoint(checkpoint)
        runio.restore_learner(tr.learner, ckpt)
        side = ckpt["sidecar"]
        tr.train_env.set_state(side["env"])
        tr.episode_index = int(side["episode_index"])
        if side["gate_rng"] is not None:
            tr.gate_rng.bit_generator.state = side["gate_rng"]
        tr._started = True
        tr._last_ckpt_step = int(side["step"])
        if tr.learner.tick_count != side["step"]:
            raise StateError(
                f"sidecar step {side['step']} disagrees with learner tick "
                f"count {tr.learner.tick_count}")
        return tr

    # -- main loop ------------------------------------------------------------

    def request_stop(self) -> None:
        """Ask the training loop to stop after the current tick (any thread).
        Sticky: a stopped trainer stays stopped."""
        self._stop = True

    def train(self, steps: int | None = None) -> int:
        """Run `steps` ticks (default: up to run.total_steps); returns the
        final global step. On any error a checkpoint is flushed first."""
        target = (self.rc.run.total_steps if steps is None
                  else self.learner.tick_count + steps)
        with runio.MetricsWriter(self.run_dir) as mw:
            try:
                while self.learner.tick_count < target and not self._stop:
                    self._tick(mw)
            except BaseException:
                step = self.learner.tick_count
                if self._started and step > 0 and step != self._last_ckpt_step:
                    log.error("aborting at step %d; flushing checkpoint", step)
                    self._save_checkpoint(step)
                raise
        step = self.learner.tick_count
        if self._started and step != self._last_ckpt_step:
            self._save_checkpoint(step)
        return step

    def _tick(self, mw: runio.MetricsWriter) -> None:
        env = self.train_env
        if not self._started:
            env.reset(self.episode_index % self.rc.env.n_train_scenes,
                      episode_seed=self.episode_index)
            self._started = True
        elif env.done:
            runio.write_trajectory(self.run_dir, self.episode_index,
                                   env.trajectory,
                                   scene_index=env.scene_index,
                                   episode_seed=env.episode_seed,
                                   split=env.split)
            self.episode_index += 1
            env.reset(self.episode_index % self.rc.env.n_train_scenes,
                      episode_seed=self.episode_index)
        t0 = time.monotonic()
        now = t0 if self.gate.mode == "human" else None
        report = train_tick(env, self.gate, self.learner,
                            gate_rng=self.gate_rng, now=now)
        if report.losses is not None:
            self.latest_losses = report.losses
        record = {
            "step": report.step,
            "I": int(report.intervened),
            "loss_proxy": None, "loss_td": None, "loss_q_total": None,
            "loss_policy": None, "loss_bc": None,
            "buffer_h": report.buffer_sizes[0],
            "buffer_n": report.buffer_sizes[1],
            "events": list(report.events),
        }
        if report.losses is not None:
            record.update(report.losses)
        mw.write(record)

        step = report.step
        if self.rc.run.eval_every and step % self.rc.run.eval_every == 0:
            self.latest_eval = evaluate(
                self.learner.policy_snapshot(), self.test_env,
                n_episodes=self.rc.run.eval_episodes, eval_seed=step,
                checkpoint_step=step)
            runio.write_eval_report(self.run_dir, self.latest_eval)
        if (self.rc.run.checkpoint_every
                and step % self.rc.run.checkpoint_every == 0):
            self._save_checkpoint(step)
        if self.frame_sink is not None:
            self.frame_sink(self.state_frame(report))
        if self.paced:
            leftover = TICK_SECONDS - (time.monotonic() - t0)
            if leftover > 0:
                time.sleep(leftover)
            else:
                log.warning("tick %d missed the %.1fs deadline by %.3fs",
                            step, TICK_SECONDS, -leftover)

    def _save_checkpoint(self, step: int) -> str:
        path = runio.save_checkpoint(self.run_dir, step, self.learner,
                                     self.train_env, self.gate_rng,
                                     self.episode_index)
        self._last_ckpt_step = step
        return path

    # -- telemetry ------------------------------------------------------------

    def state_frame(self, report=None) -> dict:
        """Outbound bridge frame for the current tick (plain JSON types)."""
        env = self.train_env
        obs = env.current_observation()
        n = len(obs.lidar)
        stride = max(1, n // LIDAR_FRAME_RAYS)
        lidar = obs.lidar[::stride][:LIDAR_FRAME_RAYS]
        return {
            "type": "state",
            "tick": env.tick,
            "ego": {"x": env.ego.x, "y": env.ego.y,
                    "heading": env.ego.heading, "speed": env.ego.speed},
            "traffic": [{"x": v.x, "y": v.y, "heading": v.heading}
                        for v in env.traffic if v.alive],
            "obstacles": [o.to_dict() for o in env.scene.obstacles],
            "lidar": [float(x) for x in lidar],
            "gate": {"mode": self.rc.gate.mode,
                     "I": bool(report.intervened) if report else False},
            "losses": self.latest_losses or {},
            "eval": self.latest_eval.to_dict() if self.latest_eval else {},
            "scene": self._scene_frame_payload(),
        }

    def _scene_frame_payload(self) -> dict:
        """Lane geometry for the UI's road layer, rebuilt only on scene change.

        The frame protocol proper carries no drawable road network, so every
        state frame piggybacks the current scene (a shared reference; clients
        rebuild their road layer only when `id` changes)."""
        env = self.train_env
        key = (env.split, env.scene_index)
        if key != self._scene_key:
            cfg = env.config
            self._scene_payload_cache = {
                "id": f"{env.split}/{env.scene_index}",
                "lanes": [lane.to_dict() for lane in env.scene.lanes.values()],
                "destination": env.scene.destination.to_dict(),
                "destination_radius": cfg.destination_radius,
                "lidar_range": cfg.lidar_range,
                "body_length": cfg.body_length,
                "body_width": cfg.body_width,
            }
            self._scene_key = key
        return self._scene_payload_cache
