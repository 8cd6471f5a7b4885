"""Force laws and their composition into one command force per bot per tick.

All forces are commanded-velocity precursors: the integrator treats the
composed vector as a desired velocity, capped at v_max.  Bearings follow the
world-frame convention of :mod:`swarmform.geometry`; sensor work happens in
the bot frame and is rotated out at the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .comms import BotState
from .geometry import Vec2, ZERO, add, norm, rotate, wrap_angle

SENSOR_OFFSETS: tuple[float, ...] = (-math.pi / 2, -math.pi / 4, 0.0, math.pi / 4, math.pi / 2)


@dataclass(frozen=True)
class ForceParams:
    k_collision: float = 0.05    # collision gain, force * m^2
    r_o: float = 0.25            # collision activation distance, m
    k_o: float = 1.0             # parent attraction gain, force / m^2
    k_goal: float = 1.0          # leader goal gain, force / m
    c_obs: float = 0.5           # obstacle gain relative to driving force
    m_floor: float = 0.2         # lower bound on the driving magnitude fed to repulsion
    sensor_max: float = 1.0      # ultrasonic range, m
    c_ang: float = math.pi / 8   # angular clearance for neighbor masking
    r_sensor_min: float = 0.01   # clamp for near-zero sensor returns
    sing_clamp: float = 1e-3     # |r_ij - r_o| lower bound in the collision law

    def validate(self) -> None:
        for name in ("k_collision", "r_o", "k_o", "k_goal", "c_obs", "m_floor",
                     "sensor_max", "c_ang", "r_sensor_min", "sing_clamp"):
            if getattr(self, name) <= 0:
                raise ValueError(f"force parameter {name} must be strictly positive")


def collision_force(r_ij: float, alpha_ij: float, p: ForceParams) -> Vec2:
    """Repulsion from one neighbor closer than the activation distance r_o.

    Returns zero at or beyond r_o; inside, the magnitude grows as
    1/(r_ij - r_o)^2 with the denominator clamped away from the singularity.
    """
    if r_ij >= p.r_o:
        return ZERO
    gap = r_ij - p.r_o
    if abs(gap) < p.sing_clamp:
        gap = -p.sing_clamp
    mag = -p.k_collision / (gap * gap)
    return (mag * math.cos(alpha_ij), mag * math.sin(alpha_ij))


def reference_force(r0: float, alpha0: float, p: ForceParams) -> Vec2:
    """Parent-relative force at the reference offset (stored at Ready time)."""
    mag = p.k_o * r0 * r0
    return (mag * math.cos(alpha0), mag * math.sin(alpha0))


def goal_force(goal: Vec2, position: Vec2, p: ForceParams) -> Vec2:
    """Attraction of the leader toward the goal point."""
    return (p.k_goal * (goal[0] - position[0]), p.k_goal * (goal[1] - position[1]))


def attract_force(r_t: float, alpha_t: float, p: ForceParams) -> Vec2:
    """Current parent attraction; same law as the reference force."""
    mag = p.k_o * r_t * r_t
    return (mag * math.cos(alpha_t), mag * math.sin(alpha_t))


def net_formation_force(f_a: Vec2, f_ref: Vec2) -> Vec2:
    """Residual drive toward the stored parent offset; zero at the reference."""
    return (f_a[0] - f_ref[0], f_a[1] - f_ref[1])


def obstacle_force(
    readings: list[tuple[float, float]],
    neighbor_azimuths: list[float],
    driving_force_mag: float,
    p: ForceParams,
    heading: float = 0.0,
) -> Vec2:
    """Summed sensor repulsion with neighboring bots masked out.

    ``readings`` are (sensor angle, distance) pairs in the bot frame;
    ``neighbor_azimuths`` are bot-frame bearings of heard neighbors.  A
    sensor whose angle lies within the angular clearance of any neighbor
    bearing contributes nothing.  The per-sensor magnitude is m/r with
    m proportional to the bot's own driving force (floored so repulsion
    survives at formation equilibrium); the sum is rotated by ``heading``
    into the world frame.
    """
    m = p.c_obs * max(driving_force_mag, p.m_floor)
    fx = fy = 0.0
    for alpha_s, r_s in readings:
        if r_s >= p.sensor_max:
            continue
        if any(abs(wrap_angle(az - alpha_s)) <= p.c_ang for az in neighbor_azimuths):
            continue
        r = max(r_s, p.r_sensor_min)
        mag = -m / r
        fx += mag * math.cos(alpha_s)
        fy += mag * math.sin(alpha_s)
    if heading == 0.0:
        return (fx, fy)
    return rotate((fx, fy), heading)


@dataclass(frozen=True)
class ComposedForce:
    total: Vec2
    f_net: float    # driving force magnitude (formation residual / goal pull)
    f_obs: float
    f_coll: float


def compose_total(
    state: BotState,
    collision: Vec2,
    neighbor_inside_ro: bool,
    drive: Vec2,
    obstacle: Vec2,
) -> ComposedForce:
    """Combine the per-tick components under the collision-override rule.

    Whenever any neighbor sits inside r_o the collision sum replaces every
    other component; a combined force could otherwise trap the bot at an
    equilibrium point.  Done bots command nothing.
    """
    f_net = norm(drive)
    f_obs = norm(obstacle)
    f_coll = norm(collision)
    if state is BotState.DONE:
        return ComposedForce(ZERO, 0.0, 0.0, f_coll)
    if neighbor_inside_ro:
        return ComposedForce(collision, f_net, f_obs, f_coll)
    return ComposedForce(add(drive, obstacle), f_net, f_obs, f_coll)


def mask_bot_readings(
    readings: list[tuple[float, float]],
    neighbor_azimuths: list[float],
    p: ForceParams,
) -> list[tuple[float, float]]:
    """Readings with sensors that are looking at a heard neighbor set to clear.

    Used for obstacle classification and wall following, so that only true
    environment obstacles drive the avoidance behavior.
    """
    out = []
    for alpha_s, r_s in readings:
        if r_s < p.sensor_max and any(
            abs(wrap_angle(az - alpha_s)) <= p.c_ang for az in neighbor_azimuths
        ):
            out.append((alpha_s, p.sensor_max))
        else:
            out.append((alpha_s, r_s))
    return out
