"""Intelligent-driver-model longitudinal controller for traffic vehicles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IDMParams:
    v0: float = 22.22        # desired speed, m/s
    T: float = 1.5           # desired time headway, s
    a_max: float = 2.0       # comfortable acceleration, m/s^2
    b: float = 3.0           # comfortable deceleration, m/s^2
    delta: float = 4.0       # free-flow exponent
    s0: float = 2.0          # jam distance, m
    brake_max: float = 5.0   # emergency deceleration when the gap is gone


def desired_gap(p: IDMParams, v: float, leader_v: float) -> float:
    dynamic = v * p.T + v * (v - leader_v) / (2.0 * np.sqrt(p.a_max * p.b))
    return p.s0 + max(0.0, dynamic)


def idm_accel(p: IDMParams, v: float,
              leader_v: float | None = None,
              gap: float | None = None) -> float:
    """Acceleration command; leader_v/gap omitted means free road ahead."""
    free = 1.0 - (v / p.v0) ** p.delta
    if gap is None or leader_v is None:
        return p.a_max * free
    if gap <= 0.0:
        return -p.brake_max
    s_star = desired_gap(p, v, leader_v)
    return p.a_max * (free - (s_star / gap) ** 2)
