"""Procedural scene-map generation from a small library of road blocks.

Maps are grown block by block from a cursor pose. Each block appends one or
more lane fragments; a clearance check against everything already placed
rejects layouts that double back onto themselves, with a bounded number of
parameter re-draws before the whole map is abandoned.
"""

from __future__ import annotations

import numpy as np

from .errors import MapGenerationError
from .geom import arc_points, left_normal, normalize_angle
from .roadmap import LaneFragment, Obstacle, Pose, SceneMap, Spawn

BLOCK_KINDS = ("straight", "curve", "merge", "chicane")

LANE_WIDTH = 7.0
SAMPLE_STEP = 2.0
CLEARANCE = 12.0        # min distance between unrelated stretches of road
CHAIN_EXCLUSION = 25.0  # arclength window within which proximity is fine
MAX_BLOCK_RETRIES = 20


def _resample(points: np.ndarray) -> np.ndarray:
    """Points spaced roughly every 4 m, for clearance checks."""
    return points[::2] if len(points) > 4 else points


class _Growth:
    """Cursor pose plus the placed-point cloud used for overlap rejection."""

    def __init__(self, start: Pose) -> None:
        self.pos = start.xy
        self.heading = start.heading
        self.chain_s = 0.0
        self._pts: list[np.ndarray] = []
        self._chain: list[np.ndarray] = []

    def conflicts(self, points: np.ndarray, chain_coords: np.ndarray) -> bool:
        if not self._pts:
            return False
        placed = np.concatenate(self._pts)
        placed_chain = np.concatenate(self._chain)
        cand = _resample(points)
        cand_chain = _resample(chain_coords)
        diff = cand[:, None, :] - placed[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        far_on_chain = np.abs(cand_chain[:, None] - placed_chain[None, :]) > CHAIN_EXCLUSION
        return bool(np.any((dist < CLEARANCE) & far_on_chain))

    def commit(self, points: np.ndarray, chain_coords: np.ndarray) -> None:
        self._pts.append(_resample(points))
        self._chain.append(_resample(chain_coords))


def _chain_coords(start_s: float, points: np.ndarray) -> np.ndarray:
    step = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return start_s + np.concatenate([[0.0], np.cumsum(step)])


def _gen_straight(growth: _Growth, rng: np.random.Generator):
    length = rng.uniform(40.0, 80.0)
    pts, end_h = arc_points(growth.pos, growth.heading, 0.0, length, SAMPLE_STEP)
    return [pts], end_h, [], []


def _gen_curve(growth: _Growth, rng: np.random.Generator):
    radius = rng.uniform(25.0, 60.0)
    side = float(rng.choice([-1.0, 1.0]))
    sweep = rng.uniform(np.pi / 6.0, np.pi / 2.0)
    kappa = side / radius
    pts, end_h = arc_points(growth.pos, growth.heading, kappa, radius * sweep, SAMPLE_STEP)
    return [pts], end_h, [], []


def _gen_merge(growth: _Growth, rng: np.random.Generator):
    """Straight main road with a side arm feeding its entry point."""
    length = rng.uniform(50.0, 70.0)
    main, end_h = arc_points(growth.pos, growth.heading, 0.0, length, SAMPLE_STEP)
    side = float(rng.choice([-1.0, 1.0]))
    arm_r = rng.uniform(20.0, 35.0)
    arm_sweep = rng.uniform(np.pi / 5.0, np.pi / 3.0)
    # Build the arm backwards from the junction: walk away from the main
    # entry against its heading, then flip so the arm ends at the junction
    # aligned with the main road.
    back, _ = arc_points(growth.pos, normalize_angle(growth.heading + np.pi),
                         side / arm_r, arm_r * arm_sweep, SAMPLE_STEP)
    arm = back[::-1].copy()
    return [main], end_h, [arm], []


def _gen_chicane(growth: _Growth, rng: np.random.Generator):
    """Symmetric S-S bump (right/left/right) with an island off the bulge."""
    radius = rng.uniform(15.0, 25.0)
    alpha = rng.uniform(np.deg2rad(25.0), np.deg2rad(40.0))
    side = float(rng.choice([-1.0, 1.0]))
    kappa = side / radius
    h = growth.heading
    p = growth.pos
    part1, h = arc_points(p, h, -kappa, radius * alpha, SAMPLE_STEP)
    part2, h = arc_points(part1[-1], h, kappa, radius * 2.0 * alpha, SAMPLE_STEP)
    part3, h = arc_points(part2[-1], h, -kappa, radius * alpha, SAMPLE_STEP)
    pts = np.concatenate([part1, part2[1:], part3[1:]], axis=0)
    mid = pts[len(pts) // 2]
    mid_h = np.arctan2(*np.diff(pts[len(pts) // 2:len(pts) // 2 + 2], axis=0)[0][::-1])
    # Island sits on the outside of the bulge, its edge clear of the road.
    radius = rng.uniform(1.5, 3.0)
    island_off = LANE_WIDTH / 2.0 + radius + rng.uniform(1.5, 3.5)
    island = mid - side * island_off * left_normal(mid_h)
    obstacles = [Obstacle(float(island[0]), float(island[1]), float(radius))]
    return [pts], h, [], obstacles


_BLOCK_BUILDERS = {
    "straight": _gen_straight,
    "curve": _gen_curve,
    "merge": _gen_merge,
    "chicane": _gen_chicane,
}


def pg_generate(seed: int, num_blocks: int = 4, obstacle_count: int = 4,
                lane_width: float = LANE_WIDTH) -> SceneMap:
    """Generate a deterministic scene map for a seed.

    The first block is always a straight so the spawn is clean; later blocks
    are drawn from the full library. Raises MapGenerationError when a block
    cannot be placed without folding the road onto itself.
    """
    if num_blocks < 1:
        raise MapGenerationError("num_blocks must be >= 1", seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB10C]))
    growth = _Growth(Pose(0.0, 0.0, 0.0))
    lanes: dict[str, LaneFragment] = {}
    edges: list[tuple[str, str]] = []
    spawns: list[Spawn] = []
    obstacles: list[Obstacle] = []
    blocks: list[str] = []
    main_chain: list[str] = []

    for bi in range(num_blocks):
        if bi == 0:
            kind = "straight"
        else:
            kind = str(rng.choice(BLOCK_KINDS))
        placed = False
        for _ in range(MAX_BLOCK_RETRIES):
            mains, end_h, arms, block_obs = _BLOCK_BUILDERS[kind](growth, rng)
            main = mains[0]
            main_chain_coords = _chain_coords(growth.chain_s, main)
            arm_coords = []
            ok = not growth.conflicts(main, main_chain_coords)
            for arm in arms:
                # Arm points share the junction's chain coordinate at their
                # far end so only genuine cross-overs count as conflicts.
                cc = growth.chain_s - _chain_coords(0.0, arm[::-1])[::-1]
                arm_coords.append(cc)
                ok = ok and not growth.conflicts(arm, cc)
            if not ok:
                continue
            frag_id = f"lane{len(lanes)}"
            lanes[frag_id] = LaneFragment(frag_id, main, width=lane_width)
            if main_chain:
                edges.append((main_chain[-1], frag_id))
            for arm, cc in zip(arms, arm_coords):
                arm_id = f"lane{len(lanes)}"
                lanes[arm_id] = LaneFragment(arm_id, arm, width=lane_width,
                                             boundary_left="white-broken")
                edges.append((arm_id, frag_id))
                h0 = float(np.arctan2(*(arm[1] - arm[0])[::-1]))
                spawns.append(Spawn(float(arm[0, 0]), float(arm[0, 1]), h0, arm_id))
                growth.commit(arm, cc)
            growth.commit(main, main_chain_coords)
            growth.pos = main[-1].copy()
            growth.heading = end_h
            growth.chain_s = float(main_chain_coords[-1])
            main_chain.append(frag_id)
            blocks.append(kind)
            obstacles.extend(block_obs)
            placed = True
            break
        if not placed:
            raise MapGenerationError(
                f"could not place block {bi} ({kind}) without overlap", seed=seed)

    first = lanes[main_chain[0]]
    spawn_pt = first.embed(5.0, 0.0)
    spawns.insert(0, Spawn(float(spawn_pt[0]), float(spawn_pt[1]),
                           first.heading_at(5.0), main_chain[0]))
    last = lanes[main_chain[-1]]
    dest_pt = last.embed(last.length - 5.0, 0.0)
    destination = Pose(float(dest_pt[0]), float(dest_pt[1]),
                       last.heading_at(last.length - 5.0))

    # Block-local clutter (chicane islands) can still end up near a lane
    # added later; keep only pieces that clear every centerline.
    obstacles = [ob for ob in obstacles
                 if _clearance(lanes, ob.x, ob.y, ob.radius) >= 1.5]

    scene = SceneMap(lanes=lanes, edges=edges, spawns=spawns,
                     destination=destination, obstacles=obstacles,
                     seed=int(seed), blocks=blocks)
    _scatter_obstacles(scene, main_chain, rng, obstacle_count)
    return scene


def _clearance(lanes: dict[str, LaneFragment], x: float, y: float,
               radius: float) -> float:
    """Gap between an obstacle's edge and the nearest lane centerline."""
    p = np.array([x, y])
    return min(abs(lane.project(p)[1]) - radius for lane in lanes.values())


def _scatter_obstacles(scene: SceneMap, main_chain: list[str],
                       rng: np.random.Generator, count: int) -> None:
    """Drop small round clutter near (not on) the driving line.

    Each piece is rejection-sampled so its edge clears every centerline in
    the map, merge arms included.
    """
    route_lanes = [scene.lanes[f] for f in main_chain]
    total = sum(lane.length for lane in route_lanes)
    for _ in range(count):
        for _ in range(40):
            s = rng.uniform(30.0, max(31.0, total - 30.0))
            side = float(rng.choice([-1.0, 1.0]))
            d = side * rng.uniform(2.4, 3.2)
            radius = rng.uniform(0.3, 0.6)
            acc = 0.0
            p = None
            for lane in route_lanes:
                if s <= acc + lane.length:
                    p = lane.embed(s - acc, d)
                    break
                acc += lane.length
            if p is None:
                continue
            if _clearance(scene.lanes, float(p[0]), float(p[1]), radius) >= 1.5:
                scene.obstacles.append(Obstacle(float(p[0]), float(p[1]), float(radius)))
                break
    scene._wall_cache = None
