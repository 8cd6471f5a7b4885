"""Trace post-processing: force and formation-error series, run summaries.

The residual-force series is the swarm's force-versus-position profile:
for every transit tick it sums each bot's driving-force magnitude and keys
the sample by the swarm centroid's projection onto the goal direction, so
obstacle encounters show up as spikes over an otherwise decaying baseline.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

from .geometry import Vec2
from .world import RunResult, TraceRow

METRICS_HEADER = "kind,abscissa,value"

TRANSIT_STATES = ("transit", "done")


class SeriesKind(Enum):
    RESIDUAL_FORCE = "ResidualForce"
    FORMATION_ERROR = "FormationError"
    STIGMERGY_SIZE = "StigmergySize"


@dataclass(frozen=True)
class MetricsSeries:
    kind: SeriesKind
    points: list[tuple[float, float]]


def _rows_by_tick(rows: list[TraceRow]) -> dict[int, list[TraceRow]]:
    out: dict[int, list[TraceRow]] = {}
    for r in rows:
        out.setdefault(r.tick, []).append(r)
    return out


def _transit_ticks(by_tick: dict[int, list[TraceRow]]) -> list[int]:
    return [
        t for t in sorted(by_tick)
        if any(r.state in TRANSIT_STATES for r in by_tick[t])
    ]


def _centroid_lon(rows: list[TraceRow], goal_azimuth: float) -> float:
    ux, uy = math.cos(goal_azimuth), math.sin(goal_azimuth)
    cx = sum(r.x for r in rows) / len(rows)
    cy = sum(r.y for r in rows) / len(rows)
    return cx * ux + cy * uy


def residual_force_series(rows: list[TraceRow], goal_azimuth: float) -> MetricsSeries:
    """Sum of per-bot driving-force magnitudes over the transit phase.

    The abscissa is the swarm's progress along the goal direction: the
    running maximum of the centroid projection, so obstacle struggles that
    momentarily drag the centroid backward cannot fold the series over.
    """
    by_tick = _rows_by_tick(rows)
    points = []
    progress = -math.inf
    for t in _transit_ticks(by_tick):
        tick_rows = by_tick[t]
        progress = max(progress, _centroid_lon(tick_rows, goal_azimuth))
        points.append((progress, sum(r.f_net for r in tick_rows)))
    return MetricsSeries(SeriesKind.RESIDUAL_FORCE, points)


def formation_error(
    rows: list[TraceRow],
    parents: dict[int, int],
    ref_offsets: dict[int, Vec2],
    goal_azimuth: float,
) -> MetricsSeries:
    """Mean deviation of child-parent offsets from their stored references."""
    by_tick = _rows_by_tick(rows)
    points = []
    progress = -math.inf
    for t in _transit_ticks(by_tick):
        tick_rows = by_tick[t]
        positions = {r.bot: (r.x, r.y) for r in tick_rows}
        errors = []
        for child, parent in sorted(parents.items()):
            ref = ref_offsets.get(child)
            if ref is None or child not in positions or parent not in positions:
                continue
            px, py = positions[parent]
            cx, cy = positions[child]
            errors.append(math.hypot(px - cx - ref[0], py - cy - ref[1]))
        if errors:
            progress = max(progress, _centroid_lon(tick_rows, goal_azimuth))
            points.append((progress, sum(errors) / len(errors)))
    return MetricsSeries(SeriesKind.FORMATION_ERROR, points)


def per_bot_formation_error(
    rows: list[TraceRow],
    parents: dict[int, int],
    ref_offsets: dict[int, Vec2],
) -> dict[int, list[tuple[int, float]]]:
    """Each child's (tick, offset error) series over the transit phase."""
    by_tick = _rows_by_tick(rows)
    out: dict[int, list[tuple[int, float]]] = {c: [] for c in parents}
    for t in _transit_ticks(by_tick):
        positions = {r.bot: (r.x, r.y) for r in by_tick[t]}
        for child, parent in parents.items():
            ref = ref_offsets.get(child)
            if ref is None:
                continue
            px, py = positions[parent]
            cx, cy = positions[child]
            out[child].append((t, math.hypot(px - cx - ref[0], py - cy - ref[1])))
    return out


def stigmergy_size_series(done_counts: list[int]) -> MetricsSeries:
    """Completion-set size per tick (abscissa is the tick index)."""
    points = [(float(t), float(c)) for t, c in enumerate(done_counts)]
    return MetricsSeries(SeriesKind.STIGMERGY_SIZE, points)


def compute_series(
    rows: list[TraceRow],
    goal_azimuth: float,
    parents: dict[int, int] | None = None,
    ref_offsets: dict[int, Vec2] | None = None,
    done_counts: list[int] | None = None,
) -> list[MetricsSeries]:
    series = [residual_force_series(rows, goal_azimuth)]
    if parents and ref_offsets:
        series.append(formation_error(rows, parents, ref_offsets, goal_azimuth))
    if done_counts is not None:
        series.append(stigmergy_size_series(done_counts))
    return series


def _f(x: float) -> str:
    return f"{x:.9g}"


def metrics_to_csv(series: list[MetricsSeries]) -> str:
    lines = [METRICS_HEADER]
    for s in series:
        for abscissa, value in s.points:
            lines.append(f"{s.kind.value},{_f(abscissa)},{_f(value)}")
    return "\n".join(lines) + "\n"


def build_summary(result: RunResult, rows: list[TraceRow] | None = None) -> dict:
    """Run summary, including the context needed to recompute metrics later.

    Pass the rows parsed back from the written trace so the reported peak
    matches the exported metrics exactly.
    """
    residual = residual_force_series(
        result.rows if rows is None else rows, result.scenario.goal_azimuth
    )
    peak = max((v for _, v in residual.points), default=0.0)
    r_bot = result.scenario.kinematics.r_bot
    min_bot_clearance = (
        result.min_bot_distance - 2.0 * r_bot
        if math.isfinite(result.min_bot_distance)
        else None
    )
    min_obstacle_clearance = (
        result.min_obstacle_clearance
        if math.isfinite(result.min_obstacle_clearance)
        else None
    )
    return {
        "final_states": [m.state.value for m in result.memories],
        "ticks_to_formation": result.ticks_to_formation,
        "ticks_total": result.ticks_total,
        "min_bot_clearance": min_bot_clearance,
        "min_obstacle_clearance": min_obstacle_clearance,
        "peak_residual_force": peak,
        "recompute": {
            "goal_azimuth": result.scenario.goal_azimuth,
            "parents": {str(c): p for c, p in sorted(result.parents.items())},
            "ref_offsets": {
                str(c): list(v) for c, v in sorted(result.ref_offsets.items())
            },
            "stigmergy_counts": result.done_counts,
        },
    }


def summary_to_json(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def series_from_trace(rows: list[TraceRow], summary: dict | None) -> list[MetricsSeries]:
    """Recompute the exported series from a trace plus an optional summary.

    With the summary's recompute block present this reproduces the
    run-emitted metrics byte for byte; without it only the residual-force
    series (relative to a zero goal azimuth) can be derived.
    """
    if not summary:
        return compute_series(rows, 0.0)
    ctx = summary.get("recompute", {})
    parents = {int(k): int(v) for k, v in ctx.get("parents", {}).items()}
    ref_offsets = {
        int(k): (float(v[0]), float(v[1])) for k, v in ctx.get("ref_offsets", {}).items()
    }
    return compute_series(
        rows,
        float(ctx.get("goal_azimuth", 0.0)),
        parents=parents,
        ref_offsets=ref_offsets,
        done_counts=list(ctx.get("stigmergy_counts", [])),
    )
