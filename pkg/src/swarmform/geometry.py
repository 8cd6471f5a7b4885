"""2D vector and angle helpers.

Vectors are plain ``(x, y)`` tuples so the per-tick loops stay cheap; the
helpers here are the only place the conventions (angle wrapping, frames)
are spelled out.
"""
from __future__ import annotations

import math

Vec2 = tuple[float, float]

TWO_PI = 2.0 * math.pi
ZERO: Vec2 = (0.0, 0.0)


def wrap_angle(a: float) -> float:
    """Normalize an angle to the interval (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def add(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] + b[0], a[1] + b[1])


def sub(a: Vec2, b: Vec2) -> Vec2:
    return (a[0] - b[0], a[1] - b[1])


def scale(a: Vec2, k: float) -> Vec2:
    return (a[0] * k, a[1] * k)


def neg(a: Vec2) -> Vec2:
    return (-a[0], -a[1])


def norm(a: Vec2) -> float:
    return math.hypot(a[0], a[1])


def dist(a: Vec2, b: Vec2) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def dot(a: Vec2, b: Vec2) -> float:
    return a[0] * b[0] + a[1] * b[1]


def unit(angle: float) -> Vec2:
    """Unit vector pointing along ``angle``."""
    return (math.cos(angle), math.sin(angle))


def angle_of(a: Vec2) -> float:
    return math.atan2(a[1], a[0])


def rotate(a: Vec2, angle: float) -> Vec2:
    c, s = math.cos(angle), math.sin(angle)
    return (c * a[0] - s * a[1], s * a[0] + c * a[1])


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x
