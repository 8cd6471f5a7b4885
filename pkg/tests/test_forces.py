import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmform.comms import BotState
from swarmform.forces import (
    SENSOR_OFFSETS,
    ForceParams,
    attract_force,
    collision_force,
    compose_total,
    goal_force,
    mask_bot_readings,
    net_formation_force,
    obstacle_force,
    reference_force,
)
from swarmform.geometry import norm, rotate, sub

P = ForceParams()


def test_collision_direct_evaluation():
    p = ForceParams(k_collision=1.0, r_o=1.0)
    f = collision_force(0.5, 0.0, p)
    assert f == pytest.approx((-4.0, 0.0))


def test_collision_inactive_at_threshold():
    p = ForceParams(k_collision=1.0, r_o=1.0)
    assert collision_force(1.0, 0.3, p) == (0.0, 0.0)
    assert collision_force(2.5, 0.3, p) == (0.0, 0.0)


def test_collision_rotates_with_azimuth():
    p = ForceParams(k_collision=1.0, r_o=1.0)
    f = collision_force(0.5, math.pi / 2, p)
    assert f == pytest.approx((0.0, -4.0), abs=1e-12)


def test_collision_singularity_clamped():
    p = ForceParams(k_collision=1.0, r_o=1.0, sing_clamp=1e-3)
    f = collision_force(1.0 - 1e-9, 0.0, p)
    assert norm(f) <= 1.0 / 1e-6 + 1e-6


def test_reference_force_and_pi_shift():
    p = ForceParams(k_o=1.0)
    f = reference_force(1.0, 0.0, p)
    assert f == pytest.approx((1.0, 0.0))
    counter = (-f[0], -f[1])
    assert counter == pytest.approx((-1.0, 0.0))


def test_reference_force_quadratic_scaling():
    p = ForceParams(k_o=1.0)
    assert reference_force(2.0, 0.0, p) == pytest.approx((4.0, 0.0))


def test_reference_force_back_azimuth():
    p = ForceParams(k_o=1.0)
    assert reference_force(1.0, math.pi, p) == pytest.approx((-1.0, 0.0), abs=1e-12)


def test_goal_force_cases():
    p = ForceParams(k_goal=2.0)
    assert goal_force((1.0, 0.0), (1.0, 0.0), p) == (0.0, 0.0)
    assert goal_force((1.0, 0.0), (0.0, 0.0), p) == pytest.approx((2.0, 0.0))
    fwd = goal_force((1.0, 2.0), (3.0, -1.0), p)
    back = goal_force((3.0, -1.0), (1.0, 2.0), p)
    assert fwd == pytest.approx((-back[0], -back[1]))


def test_attract_force_matches_reference_at_reference():
    p = ForceParams(k_o=1.7)
    assert attract_force(1.3, 0.4, p) == reference_force(1.3, 0.4, p)
    assert attract_force(0.0, 1.0, p) == pytest.approx((0.0, 0.0))
    f = attract_force(1.5, math.pi / 4, ForceParams(k_o=1.0))
    assert f == pytest.approx((2.25 / math.sqrt(2), 2.25 / math.sqrt(2)))


def test_net_formation_zero_at_reference():
    p = ForceParams(k_o=1.0)
    f_ref = reference_force(1.0, 0.0, p)
    assert net_formation_force(attract_force(1.0, 0.0, p), f_ref) == pytest.approx((0.0, 0.0))


def test_net_formation_parent_drift():
    # Parent drifts +0.1 m along the zero bearing: 1.1^2 - 1.0^2 = 0.21.
    p = ForceParams(k_o=1.0)
    f_ref = reference_force(1.0, 0.0, p)
    f = net_formation_force(attract_force(1.1, 0.0, p), f_ref)
    assert f == pytest.approx((0.21, 0.0))


def test_net_formation_opposite_azimuth():
    p = ForceParams(k_o=1.0)
    f_ref = reference_force(1.0, 0.0, p)
    f = net_formation_force(attract_force(1.0, math.pi, p), f_ref)
    assert norm(f) == pytest.approx(2.0)


def _clear_readings():
    return [(a, P.sensor_max) for a in SENSOR_OFFSETS]


def test_obstacle_force_no_detections():
    assert obstacle_force(_clear_readings(), [], 1.0, P) == (0.0, 0.0)


def test_obstacle_force_head_on():
    p = ForceParams(c_obs=1.0, m_floor=1.0)
    readings = _clear_readings()
    readings[2] = (0.0, 0.5)
    f = obstacle_force(readings, [], 1.0, p)
    assert f == pytest.approx((-2.0, 0.0))


def test_obstacle_force_neighbor_masks_sensor():
    p = ForceParams(c_obs=1.0, m_floor=1.0)
    readings = _clear_readings()
    readings[3] = (math.pi / 4, 0.5)
    assert obstacle_force(readings, [math.pi / 4], 1.0, p) == (0.0, 0.0)


def test_zero_range_clamped():
    p = ForceParams(c_obs=1.0, m_floor=1.0, r_sensor_min=0.01)
    readings = _clear_readings()
    readings[2] = (0.0, 0.0)
    f = obstacle_force(readings, [], 1.0, p)
    assert norm(f) == pytest.approx(100.0)


def test_compose_collision_override():
    out = compose_total(
        BotState.TRANSIT,
        collision=(-3.0, 0.0),
        neighbor_inside_ro=True,
        drive=(1.0, 1.0),
        obstacle=(0.5, 0.0),
    )
    assert out.total == (-3.0, 0.0)
    assert out.f_coll == pytest.approx(3.0)


def test_compose_done_is_zero():
    out = compose_total(BotState.DONE, (0.1, 0.0), False, (1.0, 0.0), (1.0, 0.0))
    assert out.total == (0.0, 0.0)


def test_compose_sums_drive_and_obstacle():
    out = compose_total(BotState.TRANSIT, (0.0, 0.0), False, (1.0, 0.0), (0.0, 2.0))
    assert out.total == pytest.approx((1.0, 2.0))
    assert out.f_net == pytest.approx(1.0)
    assert out.f_obs == pytest.approx(2.0)


# --- randomized properties -------------------------------------------------


@given(st.floats(0.01, 0.24), st.floats(-math.pi, math.pi))
@settings(max_examples=300, deadline=None)
def test_repulsion_points_away(r_ij, alpha):
    f = collision_force(r_ij, alpha, P)
    assert f[0] * math.cos(alpha) + f[1] * math.sin(alpha) < 0


@given(st.floats(0.1, 5.0), st.floats(-math.pi, math.pi), st.floats(0.1, 4.0))
@settings(max_examples=300, deadline=None)
def test_zero_at_reference_property(r0, alpha0, k_o):
    p = ForceParams(k_o=k_o)
    f_ref = reference_force(r0, alpha0, p)
    f = net_formation_force(attract_force(r0, alpha0, p), f_ref)
    assert norm(f) < 1e-12


@given(st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_masking_exactness(rnd):
    """Masking a sensor removes exactly its term from the unmasked sum."""
    rng = random.Random(rnd.getrandbits(32))
    readings = [
        (a, rng.uniform(0.1, P.sensor_max * 1.2)) for a in SENSOR_OFFSETS
    ]
    detecting = [i for i, (_, r) in enumerate(readings) if r < P.sensor_max]
    if not detecting:
        return
    idx = rng.choice(detecting)
    alpha_s, r_s = readings[idx]
    full = obstacle_force(readings, [], 2.0, P)
    masked = obstacle_force(readings, [alpha_s], 2.0, P)
    m = P.c_obs * max(2.0, P.m_floor)
    term = (-m / r_s * math.cos(alpha_s), -m / r_s * math.sin(alpha_s))
    assert sub(full, masked) == pytest.approx(term, abs=1e-12)
    # removing a masked sensor's reading changes nothing
    without = [rd for i, rd in enumerate(readings) if i != idx]
    assert obstacle_force(without, [alpha_s], 2.0, P) == pytest.approx(masked, abs=1e-12)


@given(st.floats(0.3, 5.0), st.floats(0.1, 4.0))
@settings(max_examples=200, deadline=None)
def test_obstacle_scaling_linear_in_m(drive, scale):
    readings = _clear_readings()
    readings[1] = (SENSOR_OFFSETS[1], 0.4)
    readings[2] = (0.0, 0.7)
    base = obstacle_force(readings, [], drive, ForceParams(c_obs=0.5))
    scaled = obstacle_force(readings, [], drive, ForceParams(c_obs=0.5 * scale))
    assert scaled == pytest.approx((base[0] * scale, base[1] * scale), rel=1e-12)


@given(st.floats(0.1, 4.0))
@settings(max_examples=100, deadline=None)
def test_goal_force_linear_in_gain(k):
    base = goal_force((2.0, -1.0), (0.5, 0.5), ForceParams(k_goal=1.0))
    scaled = goal_force((2.0, -1.0), (0.5, 0.5), ForceParams(k_goal=k))
    assert scaled == pytest.approx((base[0] * k, base[1] * k), rel=1e-12)


@given(st.floats(-math.pi, math.pi), st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_frame_consistency(heading, rnd):
    """Bot-frame sum rotated by heading equals asking for world frame directly."""
    rng = random.Random(rnd.getrandbits(32))
    readings = [(a, rng.uniform(0.1, 1.2)) for a in SENSOR_OFFSETS]
    azimuths = [rng.uniform(-math.pi, math.pi)]
    bot = obstacle_force(readings, azimuths, 1.5, P, heading=0.0)
    world = obstacle_force(readings, azimuths, 1.5, P, heading=heading)
    assert rotate(bot, heading) == pytest.approx(world, abs=1e-12)


def test_mask_bot_readings_clears_only_matched():
    readings = _clear_readings()
    readings[0] = (SENSOR_OFFSETS[0], 0.4)
    readings[2] = (0.0, 0.6)
    out = mask_bot_readings(readings, [0.0], P)
    assert out[2][1] == P.sensor_max
    assert out[0][1] == 0.4
