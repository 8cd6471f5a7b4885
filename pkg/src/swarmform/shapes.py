"""Shape matrix parsing and shape-table compilation.

A formation is described by an integer grid: ``-1`` marks an empty cell and
the labels ``0..n-1`` each mark the cell one bot will occupy.  The grid is
compiled into a table that maps every label to the relative bearing and
distance of each of its eight surrounding grid neighbors.  Bearings use the
convention +x = increasing column, +y = decreasing row (screen up), so a
cell one row above its neighbor sits at +pi/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Vec2, wrap_angle

SQRT2 = math.sqrt(2.0)

SHAPE_TABLE_HEADER = "label,neighbor,angle_rad,distance_m"


class ShapeError(ValueError):
    """Raised for malformed or invalid shape matrices."""


@dataclass(frozen=True)
class ShapeMatrix:
    """Validated integer shape grid."""

    rows: int
    cols: int
    cells: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return sum(1 for row in self.cells for v in row if v >= 0)

    def label_cells(self) -> dict[int, tuple[int, int]]:
        """Map label -> (row, col)."""
        out: dict[int, tuple[int, int]] = {}
        for r, row in enumerate(self.cells):
            for c, v in enumerate(row):
                if v >= 0:
                    out[v] = (r, c)
        return out


@dataclass(frozen=True)
class NeighborRef:
    """One neighbor entry in a shape-table row."""

    label: int
    angle: float
    distance: float


@dataclass(frozen=True)
class ShapeTable:
    """Per-label neighbor bearings and distances, keyed by label."""

    spacing: float
    rows: dict[int, tuple[NeighborRef, ...]]

    @property
    def n(self) -> int:
        return len(self.rows)

    def entry(self, label: int, neighbor: int) -> NeighborRef:
        """The row entry of ``label`` describing ``neighbor``."""
        for ref in self.rows[label]:
            if ref.label == neighbor:
                return ref
        raise KeyError(f"label {neighbor} is not a grid neighbor of {label}")


def parse_shape_matrix(text: str) -> ShapeMatrix:
    """Parse a whitespace-separated integer grid into a validated matrix.

    Raises ShapeError on ragged rows, non-integer tokens, values below -1,
    duplicate or missing labels, a missing label 0, or a shape that is not
    8-connected from the label-0 cell.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ShapeError("empty shape matrix")
    grid: list[tuple[int, ...]] = []
    for ln in lines:
        row = []
        for tok in ln.split():
            try:
                v = int(tok)
            except ValueError:
                raise ShapeError(f"non-integer token {tok!r}") from None
            if v < -1:
                raise ShapeError(f"label {v} below -1")
            row.append(v)
        grid.append(tuple(row))
    cols = len(grid[0])
    if any(len(row) != cols for row in grid):
        raise ShapeError("ragged rows: all rows must have the same column count")

    matrix = ShapeMatrix(rows=len(grid), cols=cols, cells=tuple(grid))
    _validate_labels(matrix)
    _validate_connectivity(matrix)
    return matrix


def _validate_labels(m: ShapeMatrix) -> None:
    seen: set[int] = set()
    for row in m.cells:
        for v in row:
            if v < 0:
                continue
            if v in seen:
                raise ShapeError(f"duplicate label {v}")
            seen.add(v)
    if not seen:
        raise ShapeError("no labeled cells")
    if 0 not in seen:
        raise ShapeError("label 0 (the seed cell) is missing")
    expected = set(range(len(seen)))
    if seen != expected:
        missing = sorted(expected - seen)
        raise ShapeError(f"labels must cover 0..{len(seen) - 1}; missing {missing}")


def _validate_connectivity(m: ShapeMatrix) -> None:
    cells = m.label_cells()
    start = cells[0]
    occupied = set(cells.values())
    stack = [start]
    reached = {start}
    while stack:
        r, c = stack.pop()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nb = (r + dr, c + dc)
                if nb in occupied and nb not in reached:
                    reached.add(nb)
                    stack.append(nb)
    if reached != occupied:
        stranded = sorted(lbl for lbl, cell in cells.items() if cell not in reached)
        raise ShapeError(f"shape is not 8-connected from label 0; unreachable labels {stranded}")


def build_shape_table(m: ShapeMatrix, spacing: float) -> ShapeTable:
    """Compile the per-label neighbor table by scanning each 3x3 local grid."""
    if spacing <= 0:
        raise ShapeError("spacing must be positive")
    cells = m.label_cells()
    grid = m.cells
    rows: dict[int, tuple[NeighborRef, ...]] = {}
    for label in sorted(cells):
        r, c = cells[label]
        refs = []
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                rr, cc = r + dr, c + dc
                if not (0 <= rr < m.rows and 0 <= cc < m.cols):
                    continue
                v = grid[rr][cc]
                if v < 0:
                    continue
                # +x = column increase, +y = row decrease
                angle = wrap_angle(math.atan2(-dr, dc))
                distance = spacing * (SQRT2 if dr != 0 and dc != 0 else 1.0)
                refs.append(NeighborRef(label=v, angle=angle, distance=distance))
        refs.sort(key=lambda ref: ref.label)
        rows[label] = tuple(refs)
    return ShapeTable(spacing=spacing, rows=rows)


def shape_layout(m: ShapeMatrix, spacing: float) -> dict[int, Vec2]:
    """Ideal world offsets of every label, with the label-0 cell at the origin."""
    cells = m.label_cells()
    r0, c0 = cells[0]
    return {
        label: ((c - c0) * spacing, (r0 - r) * spacing)
        for label, (r, c) in sorted(cells.items())
    }


def _fmt(x: float) -> str:
    s = f"{x:.10g}"
    if "." not in s and "e" not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def dump_shape_table(t: ShapeTable) -> str:
    """Render the table as CSV, one line per (label, neighbor) pair."""
    lines = [SHAPE_TABLE_HEADER]
    for label in sorted(t.rows):
        for ref in t.rows[label]:
            lines.append(f"{label},{ref.label},{_fmt(ref.angle)},{_fmt(ref.distance)}")
    return "\n".join(lines) + "\n"


def matrix_to_text(m: ShapeMatrix) -> str:
    """Inverse of parse_shape_matrix for round-tripping."""
    return "\n".join(" ".join(str(v) for v in row) for row in m.cells) + "\n"
