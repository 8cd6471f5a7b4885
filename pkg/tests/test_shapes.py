import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmform.shapes import (
    ShapeError,
    build_shape_table,
    dump_shape_table,
    matrix_to_text,
    parse_shape_matrix,
    shape_layout,
)
from swarmform.geometry import wrap_angle

from conftest import TRIANGLE

SQRT2 = math.sqrt(2.0)


def test_parse_triangle():
    m = parse_shape_matrix(TRIANGLE)
    assert (m.rows, m.cols, m.n) == (3, 3, 4)
    assert m.label_cells() == {2: (0, 1), 0: (1, 1), 1: (2, 0), 3: (2, 2)}


def test_parse_single_cell():
    m = parse_shape_matrix("0")
    assert m.n == 1 and m.cells == ((0,),)


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("0 0", "duplicate"),
        ("0 1\n2", "ragged"),
        ("1 2", "label 0"),
        ("0 2", "missing"),
        ("0 -1 -1\n-1 -1 -1\n-1 -1 1", "8-connected"),
        ("", "empty"),
        ("0 x", "non-integer"),
        ("0 -2", "below -1"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ShapeError, match=fragment):
        parse_shape_matrix(text)


def test_table_triangle_row_exact_values():
    # Label 0 of the triangle: neighbors 1,2,3 at -3pi/4, pi/2, -pi/4 and
    # distances sqrt(2), 1, sqrt(2) (1.4, 1.0, 1.4 at one decimal).
    t = build_shape_table(parse_shape_matrix(TRIANGLE), 1.0)
    row = t.rows[0]
    assert [r.label for r in row] == [1, 2, 3]
    angles = [r.angle for r in row]
    assert angles == pytest.approx([-3 * math.pi / 4, math.pi / 2, -math.pi / 4], abs=1e-12)
    assert [r.distance for r in row] == pytest.approx([SQRT2, 1.0, SQRT2], abs=1e-12)
    assert [round(r.distance, 1) for r in row] == [1.4, 1.0, 1.4]


def test_table_two_cell_column():
    # Hand evaluation: label 1 sits one row below label 0, so it lies at
    # -pi/2 from label 0 and +pi/2 the other way, at one spacing.
    t = build_shape_table(parse_shape_matrix("0\n1"), 2.0)
    (ref01,) = t.rows[0]
    (ref10,) = t.rows[1]
    assert (ref01.label, ref10.label) == (1, 0)
    assert ref01.angle == pytest.approx(-math.pi / 2)
    assert ref10.angle == pytest.approx(math.pi / 2)
    assert ref01.distance == ref10.distance == 2.0


def test_table_single_cell_has_no_neighbors():
    t = build_shape_table(parse_shape_matrix("0"), 3.0)
    assert t.rows == {0: ()}


def test_dump_contains_full_precision_rows():
    t = build_shape_table(parse_shape_matrix(TRIANGLE), 1.0)
    text = dump_shape_table(t)
    lines = text.splitlines()
    assert lines[0] == "label,neighbor,angle_rad,distance_m"
    assert "0,2,1.570796327,1.0" in lines
    assert len(lines) == 1 + 6  # three symmetric pairs


def test_dump_single_cell_is_header_only():
    t = build_shape_table(parse_shape_matrix("0"), 1.0)
    assert dump_shape_table(t) == "label,neighbor,angle_rad,distance_m\n"


def test_dump_pair_has_two_rows():
    t = build_shape_table(parse_shape_matrix("0\n1"), 2.0)
    assert len(dump_shape_table(t).splitlines()) == 3


def random_connected_matrix(rng: random.Random, n: int, size: int = 6):
    """Grow a connected blob of n cells, then label them in random order."""
    cells = {(size // 2, size // 2)}
    while len(cells) < n:
        r, c = rng.choice(sorted(cells))
        dr, dc = rng.choice([(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)])
        rr, cc = r + dr, c + dc
        if 0 <= rr < size and 0 <= cc < size:
            cells.add((rr, cc))
    order = sorted(cells)
    rng.shuffle(order)
    grid = [[-1] * size for _ in range(size)]
    for label, (r, c) in enumerate(order):
        grid[r][c] = label
    return "\n".join(" ".join(str(v) for v in row) for row in grid)


@given(st.integers(min_value=2, max_value=14), st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_symmetry_and_quantization_properties(n, rnd):
    rng = random.Random(rnd.getrandbits(32))
    text = random_connected_matrix(rng, n)
    m = parse_shape_matrix(text)
    spacing = rng.uniform(0.2, 3.0)
    t = build_shape_table(m, spacing)
    assert sorted(t.rows) == list(range(m.n))
    for label, row in t.rows.items():
        if m.n >= 2:
            assert 1 <= len(row) <= 8
        for ref in row:
            # distance quantization
            assert min(abs(ref.distance - spacing), abs(ref.distance - spacing * SQRT2)) < 1e-12
            # symmetry: the reverse entry exists at the opposite bearing
            back = t.entry(ref.label, label)
            assert back.distance == pytest.approx(ref.distance, abs=1e-12)
            assert wrap_angle(back.angle - ref.angle - math.pi) == pytest.approx(0.0, abs=1e-12)


@given(st.integers(min_value=1, max_value=12), st.randoms(use_true_random=False))
@settings(max_examples=40, deadline=None)
def test_parse_dump_round_trip(n, rnd):
    rng = random.Random(rnd.getrandbits(32))
    text = random_connected_matrix(rng, n)
    m = parse_shape_matrix(text)
    assert parse_shape_matrix(matrix_to_text(m)) == m


def test_layout_anchors_seed_at_origin():
    layout = shape_layout(parse_shape_matrix(TRIANGLE), 1.0)
    assert layout[0] == (0.0, 0.0)
    assert layout[2] == (0.0, 1.0)
    assert layout[1] == (-1.0, -1.0)
    assert layout[3] == (1.0, -1.0)
