"""Command-line entry points.

Subcommands: train, eval, mapgen, serve, replay. Any config field can also
be overridden through HILDRIVE_* environment variables (see config module).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import runio
from .config import RunConfig, apply_env_overrides, build_envs
from .driver import OnlineTrainer
from .errors import HildriveError
from .evaluation import evaluate
from .mapgen import pg_generate
from .nets import load_params

log = logging.getLogger("hildrive.cli")


def _load_config(args) -> RunConfig:
    """Config file (if given) + HILDRIVE_* overrides + explicit CLI flags."""
    if getattr(args, "config", None):
        rc = RunConfig.load(args.config)
    else:
        rc = RunConfig.from_dict(apply_env_overrides({}))
    run = rc.run
    gate = rc.gate
    if getattr(args, "seed", None) is not None:
        run = dataclasses.replace(run, seed=args.seed)
    if getattr(args, "steps", None) is not None:
        run = dataclasses.replace(run, total_steps=args.steps)
    if getattr(args, "out", None):
        run = dataclasses.replace(run, run_dir=args.out)
    if getattr(args, "mode", None):
        gate = dataclasses.replace(gate, mode=args.mode)
    return dataclasses.replace(rc, run=run, gate=gate)


def _require_run_dir(rc: RunConfig) -> str:
    if not rc.run.run_dir:
        raise HildriveError("no run directory: pass --out or set run.run_dir")
    return rc.run.run_dir


def cmd_train(args) -> int:
    rc = _load_config(args)
    run_dir = _require_run_dir(rc)
    if args.resume:
        trainer = OnlineTrainer.resume(rc, run_dir, args.resume)
        log.info("resumed from %s at step %d", args.resume,
                 trainer.learner.tick_count)
    else:
        trainer = OnlineTrainer(rc, run_dir)
    if rc.gate.mode == "live" and trainer.channel is not None:
        log.warning("live mode without a connected client idles on the "
                    "failsafe; start `hildrive serve` for teleoperation")
    final = trainer.train()
    print(f"trained to step {final}; run directory: {run_dir}")
    return 0


def cmd_eval(args) -> int:
    ckpt = runio.load_checkpoint(args.checkpoint)
    if "actor" not in ckpt["nets"]:
        raise HildriveError(
            f"checkpoint {args.checkpoint!r} holds no actor network")
    policy = ckpt["nets"]["actor"]
    if args.config:
        rc = RunConfig.load(args.config)
    else:
        # default to the config snapshot two levels up (run_dir/checkpoints/x)
        run_dir = os.path.dirname(os.path.dirname(os.path.abspath(args.checkpoint)))
        snap = os.path.join(run_dir, runio.CONFIG_FILE)
        if not os.path.exists(snap):
            raise HildriveError(
                "no config snapshot found next to the checkpoint; pass --config")
        rc = RunConfig.load(snap)
    _, test_env = build_envs(rc)
    seed = args.seed if args.seed is not None else rc.run.seed
    report = evaluate(policy, test_env, n_episodes=args.episodes,
                      eval_seed=seed,
                      checkpoint_step=ckpt["sidecar"].get("step", 0))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.out:
        runio.init_run_dir(args.out)
        path = runio.write_eval_report(args.out, report)
        log.info("eval report written to %s", path)
    return 0


def cmd_mapgen(args) -> int:
    if args.n_blocks < 1:
        raise HildriveError("n_blocks must be >= 1")
    scene = pg_generate(args.seed, num_blocks=args.n_blocks)
    out = args.out or f"map_{args.seed}.json"
    scene.save(out)
    print(f"wrote {out} ({len(scene.lanes)} lanes, blocks: {scene.blocks})")
    if args.preview:
        preview = os.path.splitext(out)[0] + ".svg"
        _write_svg(scene, preview)
        print(f"wrote {preview}")
    return 0


def _write_svg(scene, path: str) -> None:
    """Minimal vector preview: lane ribbons, spawn, destination, obstacles."""
    polys = scene.drivable_polygons()
    pts = np.concatenate(polys, axis=0)
    lo, hi = pts.min(axis=0) - 10, pts.max(axis=0) + 10
    w, h = hi - lo

    def sx(x):
        return (x - lo[0]) * 4

    def sy(y):
        return (hi[1] - y) * 4  # svg y grows downward

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{w * 4:.0f}" height="{h * 4:.0f}" '
             f'viewBox="0 0 {w * 4:.0f} {h * 4:.0f}">',
             f'<rect width="100%" height="100%" fill="#1c2330"/>']
    for poly in polys:
        d = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in poly)
        parts.append(f'<polygon points="{d}" fill="#4a5568" stroke="none"/>')
    for lane in scene.lanes.values():
        d = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in lane.points)
        parts.append(f'<polyline points="{d}" fill="none" '
                     f'stroke="#cbd5e0" stroke-width="1" '
                     f'stroke-dasharray="6,6"/>')
    for ob in scene.obstacles:
        parts.append(f'<circle cx="{sx(ob.x):.1f}" cy="{sy(ob.y):.1f}" '
                     f'r="{ob.radius * 4:.1f}" fill="#e53e3e"/>')
    sp = scene.spawns[0]
    parts.append(f'<circle cx="{sx(sp.x):.1f}" cy="{sy(sp.y):.1f}" r="6" '
                 f'fill="#48bb78"/>')
    dd = scene.destination
    parts.append(f'<circle cx="{sx(dd.x):.1f}" cy="{sy(dd.y):.1f}" r="6" '
                 f'fill="#ecc94b"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def cmd_replay(args) -> int:
    """Re-simulate a logged episode and audit determinism tick by tick."""
    doc = runio.read_trajectory(args.run_dir, args.episode)
    snap = os.path.join(args.run_dir, runio.CONFIG_FILE)
    if not os.path.exists(snap):
        raise HildriveError(f"run directory {args.run_dir!r} has no config snapshot")
    rc = RunConfig.load(snap)
    train_env, test_env = build_envs(rc)
    env = train_env if doc["split"] == "train" else test_env
    env.reset(doc["scene_index"], episode_seed=doc["episode_seed"])
    mismatches = 0
    for rec in doc["records"]:
        out = env.step(np.asarray(rec["action"], dtype=np.float64),
                       intervention=bool(rec["intervention"]))
        live = env.trajectory[-1]
        for key in ("x", "y", "heading", "speed", "reward", "cost"):
            if abs(live[key] - rec[key]) > 1e-9:
                mismatches += 1
                print(f"tick {rec['t']}: {key} logged {rec[key]!r} "
                      f"replayed {live[key]!r}")
                break
        if out.done:
            break
    n = len(doc["records"])
    replayed = len(env.trajectory)
    if mismatches or replayed != n:
        print(f"replay FAILED: {mismatches} mismatching ticks, "
              f"{replayed}/{n} ticks replayed")
        return 1
    print(f"replay ok: {n} ticks reproduced exactly "
          f"(episode {args.episode}, scene {doc['scene_index']}, "
          f"termination {env.termination!r})")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    rc = _load_config(args)
    return serve(rc, host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hildrive",
        description="Online human-in-the-loop driving policy learning")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run the online training loop")
    t.add_argument("--config", help="run config JSON file")
    t.add_argument("--seed", type=int)
    t.add_argument("--mode", choices=("threshold", "live", "off"),
                   help="intervention gate mode")
    t.add_argument("--steps", type=int, help="total environment interactions")
    t.add_argument("--resume", help="checkpoint directory to resume from")
    t.add_argument("--out", help="run directory")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpointed policy")
    e.add_argument("checkpoint", help="checkpoint directory")
    e.add_argument("-n", "--episodes", type=int, default=100,
                   help="number of held-out episodes (default 100)")
    e.add_argument("--config", help="run config JSON (default: snapshot "
                                    "found next to the checkpoint)")
    e.add_argument("--seed", type=int, help="evaluation seed")
    e.add_argument("--out", help="directory to persist the report into")
    e.set_defaults(fn=cmd_eval)

    m = sub.add_parser("mapgen", help="generate a procedural scene map")
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--n-blocks", type=int, default=4)
    m.add_argument("--out", help="output map file (default map_<seed>.json)")
    m.add_argument("--preview", action="store_true",
                   help="also write an SVG rendering")
    m.set_defaults(fn=cmd_mapgen)

    s = sub.add_parser("serve", help="host the teleoperation bridge and UI")
    s.add_argument("--config", help="run config JSON file")
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=("threshold", "live", "off"),
                   default="live")
    s.add_argument("--steps", type=int)
    s.add_argument("--out", help="run directory")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8700)
    s.set_defaults(fn=cmd_serve)

    r = sub.add_parser("replay", help="re-simulate and audit a logged episode")
    r.add_argument("run_dir", help="run directory containing trajectories/")
    r.add_argument("--episode", type=int, required=True)
    r.set_defaults(fn=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.fn(args)
    except HildriveError as e:
        print(f"error: {e}", file=sys.stderr)
        if hasattr(e, "seed") and e.seed is not None:
            print(f"seed: {e.seed}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
