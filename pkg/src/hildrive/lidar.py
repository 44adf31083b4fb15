"""Planar range sensor: evenly spaced rays against segments and circles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .geom import ray_circles_distance, ray_segments_distance


@dataclass(frozen=True)
class LidarSpec:
    num_rays: int = 240
    max_range: float = 50.0
    noise_std: float = 0.0  # std of additive Gaussian noise, normalized units


def ray_directions(heading: float, num_rays: int) -> np.ndarray:
    """Unit direction per ray, (R,2). Ray 0 points along heading, then CCW."""
    angles = heading + 2.0 * np.pi * np.arange(num_rays) / num_rays
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def lidar_scan(origin: np.ndarray, heading: float, spec: LidarSpec,
               segments: np.ndarray | None = None,
               centers: np.ndarray | None = None,
               radii: np.ndarray | None = None,
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Normalized first-hit distances in [0, 1]; misses read 1.0.

    Targets are a segment soup (road boundaries, vehicle box edges) plus
    circles (round obstacles). Noise, when enabled, needs an explicit rng so
    runs stay reproducible.
    """
    origin = np.asarray(origin, dtype=np.float64)
    dirs = ray_directions(heading, spec.num_rays)
    dist = np.full(spec.num_rays, np.inf)
    if segments is not None and len(segments):
        dist = np.minimum(dist, ray_segments_distance(origin, dirs, np.asarray(segments)))
    if centers is not None and len(centers):
        dist = np.minimum(dist, ray_circles_distance(
            origin, dirs, np.asarray(centers), np.asarray(radii)))
    out = np.minimum(dist, spec.max_range) / spec.max_range
    if spec.noise_std > 0.0:
        if rng is None:
            raise ContractError("lidar noise enabled but no rng supplied")
        out = out + rng.normal(0.0, spec.noise_std, size=out.shape)
    return np.clip(out, 0.0, 1.0)
