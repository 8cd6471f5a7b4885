"""Obstacle geometry, ultrasonic ray casting, and sensor-fusion decisions.

Bots carry five ultrasonic sensors fanned over the front semicircle at
bot-frame angles -pi/2, -pi/4, 0, +pi/4, +pi/2.  Rays see environment
obstacles, the arena walls, and other bot bodies alike; telling bots apart
from obstacles is the job of the azimuth masking done by the controller,
not of the sensor model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .forces import SENSOR_OFFSETS, ForceParams
from .geometry import Vec2, add, norm, unit


@dataclass(frozen=True)
class Circle:
    center: Vec2
    radius: float


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box given by min/max corners."""

    lo: Vec2
    hi: Vec2


Obstacle = Circle | Rect


class Classification(Enum):
    NONE = "none"
    LARGE = "large"
    SMALL = "small"


def ray_circle(origin: Vec2, direction: Vec2, c: Circle) -> float | None:
    """Distance along the ray to the circle boundary, or None if missed."""
    ox = origin[0] - c.center[0]
    oy = origin[1] - c.center[1]
    b = ox * direction[0] + oy * direction[1]
    q = ox * ox + oy * oy - c.radius * c.radius
    disc = b * b - q
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    t = -b - root
    if t < 0.0:
        t = -b + root
    return t if t >= 0.0 else None


def ray_rect(origin: Vec2, direction: Vec2, r: Rect) -> float | None:
    """Distance along the ray to the box, or None; from inside, the exit distance."""
    tmin, tmax = -math.inf, math.inf
    for axis in (0, 1):
        o, d = origin[axis], direction[axis]
        lo, hi = r.lo[axis], r.hi[axis]
        if abs(d) < 1e-12:
            if o < lo or o > hi:
                return None
            continue
        t1 = (lo - o) / d
        t2 = (hi - o) / d
        if t1 > t2:
            t1, t2 = t2, t1
        tmin = max(tmin, t1)
        tmax = min(tmax, t2)
    if tmax < max(tmin, 0.0):
        return None
    return tmin if tmin >= 0.0 else tmax


def obstacle_distance(p: Vec2, obs: Obstacle) -> float:
    """Euclidean distance from a point to the obstacle surface (0 inside)."""
    if isinstance(obs, Circle):
        return max(0.0, norm((p[0] - obs.center[0], p[1] - obs.center[1])) - obs.radius)
    dx = max(obs.lo[0] - p[0], 0.0, p[0] - obs.hi[0])
    dy = max(obs.lo[1] - p[1], 0.0, p[1] - obs.hi[1])
    return math.hypot(dx, dy)


def sense_ultrasonic(
    pose: tuple[float, float, float],
    obstacles: list[Obstacle],
    bodies: list[Circle],
    arena: Rect | None,
    p: ForceParams,
) -> list[tuple[float, float]]:
    """Five (bot-frame angle, distance) readings for the given pose.

    Each reading is the nearest intersection along its ray, clipped to
    sensor_max when nothing is in range.  ``bodies`` are the other bots'
    disks; the arena boundary, when given, is sensed like any wall.
    """
    x, y, heading = pose
    origin = (x, y)
    out = []
    for offset in SENSOR_OFFSETS:
        d = unit(heading + offset)
        best = p.sensor_max
        for obs in obstacles:
            if isinstance(obs, Circle):
                if _too_far(origin, obs.center, best + obs.radius):
                    continue
                t = ray_circle(origin, d, obs)
            else:
                if _rect_too_far(origin, obs, best):
                    continue
                t = ray_rect(origin, d, obs)
            if t is not None and t < best:
                best = t
        for body in bodies:
            if _too_far(origin, body.center, best + body.radius):
                continue
            t = ray_circle(origin, d, body)
            if t is not None and t < best:
                best = t
        if arena is not None:
            t = ray_rect(origin, d, arena)
            if t is not None and t < best:
                best = t
        out.append((offset, best))
    return out


def _too_far(a: Vec2, b: Vec2, reach: float) -> bool:
    return abs(a[0] - b[0]) > reach or abs(a[1] - b[1]) > reach


def _rect_too_far(p: Vec2, r: Rect, reach: float) -> bool:
    return (
        p[0] < r.lo[0] - reach
        or p[0] > r.hi[0] + reach
        or p[1] < r.lo[1] - reach
        or p[1] > r.hi[1] + reach
    )


def classify_obstacle(readings: list[tuple[float, float]], p: ForceParams) -> Classification:
    """Size discrimination from the sensor fan.

    Three or more detecting sensors means the obstruction spans at least a
    quarter turn and is treated as large; one or two as small.
    """
    detecting = sum(1 for _, r in readings if r < p.sensor_max)
    if detecting == 0:
        return Classification.NONE
    return Classification.LARGE if detecting >= 3 else Classification.SMALL


def wall_follow(
    readings: list[tuple[float, float]],
    latched_dir: int | None,
    p: ForceParams,
    v_max: float,
    wall_distance: float,
    wall_band: float,
) -> tuple[Vec2, int | None]:
    """Bot-frame wall-following command and the (possibly newly latched) side.

    Drives along the tangent perpendicular to the nearest detection ray.
    The turning side is picked once per episode, toward the freer half of
    the sensor fan, and kept until the episode ends.  A radial term
    regulates the standoff into [wall_distance - band, wall_distance + band].
    The command is scaled to v_max; all-clear readings give a zero command.
    """
    detections = [(r, a) for a, r in readings if r < p.sensor_max]
    if not detections:
        return (0.0, 0.0), latched_dir
    r_near, a_near = min(detections)
    if latched_dir is None:
        free = [a for a, r in readings if r >= p.sensor_max]
        fx = sum(math.cos(a) for a in free)
        fy = sum(math.sin(a) for a in free)
        t_plus = a_near + math.pi / 2
        score = fx * math.cos(t_plus) + fy * math.sin(t_plus)
        latched_dir = 1 if score >= 0 else -1
    tangent = unit(a_near + latched_dir * math.pi / 2)
    radial = (0.0, 0.0)
    if r_near < wall_distance - wall_band:
        radial = unit(a_near + math.pi)
    elif r_near > wall_distance + wall_band:
        radial = unit(a_near)
    cmd = add(tangent, radial)
    mag = norm(cmd)
    if mag == 0.0:
        return (0.0, 0.0), latched_dir
    return (cmd[0] / mag * v_max, cmd[1] / mag * v_max), latched_dir
