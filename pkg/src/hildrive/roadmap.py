"""Road network model: lane fragments, Frenet frames, routes, map files.

A scene map is a set of polyline lane fragments plus a directed graph of
which fragment feeds which. Lane-relative (Frenet) coordinates are taken
against a fragment's piecewise-linear centerline: s is arclength along it,
d is signed lateral offset (positive to the left of travel).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MapParseError, MapValidationError
from .geom import normalize_angle

MAP_FORMAT = "scenemap-v1"

BOUNDARY_KINDS = ("yellow-solid", "white-broken", "none")


class LaneFragment:
    """One polyline lane with a width and tagged boundaries."""

    def __init__(self, frag_id: str, points: np.ndarray, width: float = 7.0,
                 boundary_left: str = "yellow-solid",
                 boundary_right: str = "white-broken") -> None:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise MapParseError("lane points must be (K,2)", field=f"lanes.{frag_id}.points")
        if points.shape[0] < 2:
            raise MapParseError("lane needs at least 2 points", field=f"lanes.{frag_id}.points")
        seg = np.diff(points, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        if np.any(seg_len < 1e-9):
            raise MapParseError("lane has duplicate consecutive points",
                                field=f"lanes.{frag_id}.points")
        if width <= 0:
            raise MapParseError("lane width must be positive", field=f"lanes.{frag_id}.width")
        if boundary_left not in BOUNDARY_KINDS or boundary_right not in BOUNDARY_KINDS:
            raise MapParseError(f"unknown boundary kind, expected one of {BOUNDARY_KINDS}",
                                field=f"lanes.{frag_id}.boundary")
        self.frag_id = frag_id
        self.points = points
        self.width = float(width)
        self.boundary_left = boundary_left
        self.boundary_right = boundary_right
        self._seg = seg
        self._seg_len = seg_len
        self._dirs = seg / seg_len[:, None]
        self._normals = np.stack([-self._dirs[:, 1], self._dirs[:, 0]], axis=1)
        self._cum_s = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.length = float(self._cum_s[-1])
        self._headings = np.arctan2(seg[:, 1], seg[:, 0])

    def project(self, p: np.ndarray) -> tuple[float, float]:
        """Closest-point projection onto the centerline, returns (s, d)."""
        p = np.asarray(p, dtype=np.float64)
        rel = p[None, :] - self.points[:-1]
        t = np.einsum("ij,ij->i", rel, self._seg) / (self._seg_len ** 2)
        t = np.clip(t, 0.0, 1.0)
        foot = self.points[:-1] + t[:, None] * self._seg
        diff = p[None, :] - foot
        d2 = np.einsum("ij,ij->i", diff, diff)
        i = int(np.argmin(d2))
        s = float(self._cum_s[i] + t[i] * self._seg_len[i])
        side = np.sign(self._dirs[i, 0] * diff[i, 1] - self._dirs[i, 1] * diff[i, 0])
        if side == 0.0:
            side = 1.0
        return s, float(side * np.sqrt(d2[i]))

    def _segment_index(self, s: float) -> int:
        i = int(np.searchsorted(self._cum_s, s, side="right")) - 1
        return min(max(i, 0), len(self._seg_len) - 1)

    def embed(self, s: float, d: float) -> np.ndarray:
        """Map lane coordinates (s, d) back to a world point."""
        s = float(np.clip(s, 0.0, self.length))
        i = self._segment_index(s)
        foot = self.points[i] + (s - self._cum_s[i]) * self._dirs[i]
        return foot + d * self._normals[i]

    def heading_at(self, s: float) -> float:
        return float(self._headings[self._segment_index(s)])

    def direction_at(self, s: float) -> np.ndarray:
        return self._dirs[self._segment_index(s)].copy()

    def offset_polyline(self, offset: float) -> np.ndarray:
        """Centerline shifted laterally by offset (positive left), miter joins."""
        n_pts = np.zeros_like(self.points)
        n_pts[0] = self._normals[0]
        n_pts[-1] = self._normals[-1]
        if len(self._normals) > 1:
            avg = self._normals[:-1] + self._normals[1:]
            norm = np.linalg.norm(avg, axis=1)
            norm = np.where(norm < 1e-9, 1.0, norm)
            n_pts[1:-1] = avg / norm[:, None]
        return self.points + offset * n_pts

    def to_dict(self) -> dict:
        return {
            "id": self.frag_id,
            "width": self.width,
            "boundary_left": self.boundary_left,
            "boundary_right": self.boundary_right,
            "points": [[float(x), float(y)] for x, y in self.points],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LaneFragment":
        try:
            return cls(str(d["id"]), np.asarray(d["points"], dtype=np.float64),
                       width=float(d["width"]),
                       boundary_left=str(d["boundary_left"]),
                       boundary_right=str(d["boundary_right"]))
        except KeyError as e:
            raise MapParseError(f"lane entry missing key {e.args[0]!r}",
                                field=f"lanes.{d.get('id', '?')}") from e
        except (TypeError, ValueError) as e:
            if isinstance(e, MapParseError):
                raise
            raise MapParseError(f"bad lane entry: {e}",
                                field=f"lanes.{d.get('id', '?')}") from e


@dataclass(frozen=True)
class Spawn:
    x: float
    y: float
    heading: float
    lane: str

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading, "lane": self.lane}


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading}

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "radius": self.radius}


@dataclass
class SceneMap:
    """Lane fragments plus connectivity, spawns, destination and clutter."""

    lanes: dict[str, LaneFragment]
    edges: list[tuple[str, str]]
    spawns: list[Spawn]
    destination: Pose
    obstacles: list[Obstacle] = field(default_factory=list)
    seed: int = 0
    blocks: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._wall_cache: np.ndarray | None = None
        self.validate()

    # -- structure ---------------------------------------------------------

    def validate(self) -> None:
        for a, b in self.edges:
            if a not in self.lanes or b not in self.lanes:
                raise MapValidationError(f"edge ({a!r}, {b!r}) references unknown lane")
        for sp in self.spawns:
            if sp.lane not in self.lanes:
                raise MapValidationError(f"spawn references unknown lane {sp.lane!r}")
        if not self.spawns:
            raise MapValidationError("map has no spawn points")
        dest_lane = self._nearest_lane(self.destination.xy)
        for sp in self.spawns:
            if dest_lane not in self._reachable(sp.lane):
                raise MapValidationError(
                    f"no route from spawn lane {sp.lane!r} to destination lane {dest_lane!r}")

    def _reachable(self, start: str) -> set[str]:
        succ: dict[str, list[str]] = {}
        for a, b in self.edges:
            succ.setdefault(a, []).append(b)
        seen = {start}
        queue = [start]
        while queue:
            node = queue.pop()
            for nxt in succ.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen

    def _nearest_lane(self, p: np.ndarray) -> str:
        best, best_d = None, np.inf
        for fid, lane in self.lanes.items():
            s, d = lane.project(p)
            if abs(d) < best_d:
                best, best_d = fid, abs(d)
        assert best is not None
        return best

    def shortest_lane_path(self, start: str, goal: str) -> list[str]:
        """BFS over the fragment graph; raises if no path exists."""
        if start == goal:
            return [start]
        succ: dict[str, list[str]] = {}
        for a, b in self.edges:
            succ.setdefault(a, []).append(b)
        prev: dict[str, str] = {}
        queue = [start]
        seen = {start}
        while queue:
            node = queue.pop(0)
            for nxt in succ.get(node, ()):
                if nxt in seen:
                    continue
                prev[nxt] = node
                if nxt == goal:
                    path = [goal]
                    while path[-1] != start:
                        path.append(prev[path[-1]])
                    return path[::-1]
                seen.add(nxt)
                queue.append(nxt)
        raise MapValidationError(f"no route from {start!r} to {goal!r}")

    def route_for_spawn(self, spawn: Spawn) -> "Route":
        goal = self._nearest_lane(self.destination.xy)
        return Route(self, self.shortest_lane_path(spawn.lane, goal))

    # -- geometry ----------------------------------------------------------

    def wall_segments(self) -> np.ndarray:
        """All boundary polylines as one (S,4) segment array, cached."""
        if self._wall_cache is None:
            chunks = []
            for lane in self.lanes.values():
                for off in (lane.width / 2.0, -lane.width / 2.0):
                    poly = lane.offset_polyline(off)
                    chunks.append(np.concatenate([poly[:-1], poly[1:]], axis=1))
            self._wall_cache = (np.concatenate(chunks, axis=0) if chunks
                                else np.zeros((0, 4)))
        return self._wall_cache

    def drivable_polygons(self) -> list[np.ndarray]:
        """One closed CCW polygon per fragment (left boundary + reversed right)."""
        polys = []
        for lane in self.lanes.values():
            left = lane.offset_polyline(lane.width / 2.0)
            right = lane.offset_polyline(-lane.width / 2.0)
            polys.append(np.concatenate([right, left[::-1]], axis=0))
        return polys

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MAP_FORMAT,
            "seed": int(self.seed),
            "blocks": list(self.blocks),
            "lanes": [lane.to_dict() for lane in self.lanes.values()],
            "edges": [[a, b] for a, b in self.edges],
            "spawns": [sp.to_dict() for sp in self.spawns],
            "destination": self.destination.to_dict(),
            "obstacles": [ob.to_dict() for ob in self.obstacles],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "SceneMap":
        fmt = d.get("format")
        if fmt != MAP_FORMAT:
            raise MapParseError(f"unsupported map format {fmt!r}, expected {MAP_FORMAT!r}",
                                field="format")
        for key in ("lanes", "edges", "spawns", "destination"):
            if key not in d:
                raise MapParseError(f"missing required key {key!r}", field=key)
        lanes: dict[str, LaneFragment] = {}
        for entry in d["lanes"]:
            lane = LaneFragment.from_dict(entry)
            if lane.frag_id in lanes:
                raise MapParseError(f"duplicate lane id {lane.frag_id!r}",
                                    field=f"lanes.{lane.frag_id}")
            lanes[lane.frag_id] = lane
        try:
            edges = [(str(a), str(b)) for a, b in d["edges"]]
        except (TypeError, ValueError) as e:
            raise MapParseError(f"bad edge list: {e}", field="edges") from e
        try:
            spawns = [Spawn(float(s["x"]), float(s["y"]), float(s["heading"]), str(s["lane"]))
                      for s in d["spawns"]]
        except (KeyError, TypeError, ValueError) as e:
            raise MapParseError(f"bad spawn list: {e}", field="spawns") from e
        try:
            dd = d["destination"]
            dest = Pose(float(dd["x"]), float(dd["y"]), float(dd["heading"]))
        except (KeyError, TypeError, ValueError) as e:
            raise MapParseError(f"bad destination: {e}", field="destination") from e
        try:
            obstacles = [Obstacle(float(o["x"]), float(o["y"]), float(o["radius"]))
                         for o in d.get("obstacles", [])]
        except (KeyError, TypeError, ValueError) as e:
            raise MapParseError(f"bad obstacle list: {e}", field="obstacles") from e
        return cls(lanes=lanes, edges=edges, spawns=spawns, destination=dest,
                   obstacles=obstacles, seed=int(d.get("seed", 0)),
                   blocks=[str(b) for b in d.get("blocks", [])])

    @classmethod
    def from_json(cls, text: str) -> "SceneMap":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise MapParseError(f"not valid JSON: {e}", field="<document>") from e
        if not isinstance(d, dict):
            raise MapParseError("map document must be a JSON object", field="<document>")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str | Path) -> "SceneMap":
        return cls.from_json(Path(path).read_text())


class Route:
    """An ordered chain of lane fragments with a glued-together arclength."""

    def __init__(self, scene: SceneMap, frag_ids: list[str]) -> None:
        if not frag_ids:
            raise MapValidationError("route needs at least one fragment")
        self.scene = scene
        self.frag_ids = list(frag_ids)
        self.fragments = [scene.lanes[f] for f in frag_ids]
        lengths = [f.length for f in self.fragments]
        self.offsets = np.concatenate([[0.0], np.cumsum(lengths)])
        self.length = float(self.offsets[-1])

    def project(self, p: np.ndarray, hint: int | None = None) -> tuple[float, float, int]:
        """Project a point onto the route, returns (route_s, d, fragment index).

        With a hint only the neighborhood of that fragment is searched, to
        keep a moving vehicle from snapping to a far-away parallel piece.
        """
        if hint is None:
            candidates = range(len(self.fragments))
        else:
            lo = max(0, hint - 1)
            hi = min(len(self.fragments), hint + 2)
            candidates = range(lo, hi)
        best = None
        for i in candidates:
            s, d = self.fragments[i].project(p)
            # Penalize matches clamped to a fragment end: an interior match
            # on a neighboring fragment is the true one.
            interior = 1e-6 < s < self.fragments[i].length - 1e-6
            key = (abs(d), 0 if interior else 1)
            if best is None or key < best[0]:
                best = (key, i, s, d)
        assert best is not None
        _, i, s, d = best
        return float(self.offsets[i] + s), float(d), i

    def embed(self, route_s: float, d: float) -> np.ndarray:
        i = self._frag_index(route_s)
        return self.fragments[i].embed(route_s - self.offsets[i], d)

    def heading_at(self, route_s: float) -> float:
        i = self._frag_index(route_s)
        return self.fragments[i].heading_at(route_s - self.offsets[i])

    def width_at(self, route_s: float) -> float:
        return self.fragments[self._frag_index(route_s)].width

    def fragment_at(self, route_s: float) -> LaneFragment:
        return self.fragments[self._frag_index(route_s)]

    def _frag_index(self, route_s: float) -> int:
        route_s = float(np.clip(route_s, 0.0, self.length))
        i = int(np.searchsorted(self.offsets, route_s, side="right")) - 1
        return min(max(i, 0), len(self.fragments) - 1)

    def checkpoints(self, spacing: float = 50.0) -> np.ndarray:
        """World positions every `spacing` meters plus the destination, (C,2)."""
        ss = np.arange(spacing, self.length, spacing)
        pts = [self.embed(s, 0.0) for s in ss]
        pts.append(self.scene.destination.xy)
        return np.asarray(pts)


def localize(scene: SceneMap, position: np.ndarray, heading: float,
             max_lateral: float = 5.0, max_angle: float = np.pi / 2.0
             ) -> tuple[str, float, float] | None:
    """Find the lane fragment the pose belongs to, or None if off the network.

    A fragment qualifies when the lateral offset is under max_lateral and the
    pose heading is within max_angle of the local lane direction. Ties go to
    the smallest lateral offset.
    """
    position = np.asarray(position, dtype=np.float64)
    best = None
    for fid, lane in scene.lanes.items():
        s, d = lane.project(position)
        if abs(d) > max_lateral:
            continue
        if abs(normalize_angle(heading - lane.heading_at(s))) > max_angle:
            continue
        if best is None or abs(d) < abs(best[2]):
            best = (fid, s, d)
    return best
