"""Deterministic lockstep world.

Every tick runs fixed phases: snapshot poses, cast sensor rays, deliver the
previous tick's broadcasts (radius-limited, inboxes sorted by sender id),
step every controller in ascending id order, then integrate motion and
append trace records.  Nothing reads the wall clock or unordered
collections, so a scenario plus seed fully determines the trace.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .comms import BotState, DONE_PREFIX, LabelOffer, Status, StigmergyDelta
from .controller import (
    BotMemory,
    LocalObservation,
    MotionCommand,
    ProtocolParams,
    RunContext,
    Timeouts,
    make_memory,
    step,
)
from .forces import ForceParams
from .geometry import Vec2, clamp, dist, wrap_angle
from .sensing import Circle, Obstacle, Rect, obstacle_distance, sense_ultrasonic
from .shapes import ShapeMatrix, build_shape_table, parse_shape_matrix

TRACE_HEADER = "tick,bot,x,y,heading,state,label,role,f_net,f_obs,f_coll,mode"


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario documents."""


@dataclass(frozen=True)
class Kinematics:
    v_max: float = 0.5
    omega_max: float = math.pi
    dt: float = 0.1
    r_bot: float = 0.07

    def validate(self) -> None:
        for name in ("v_max", "omega_max", "dt", "r_bot"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"kinematics parameter {name} must be strictly positive")


@dataclass(frozen=True)
class SpawnRegion:
    lo: Vec2
    hi: Vec2
    min_separation: float = 0.3


@dataclass
class Scenario:
    name: str
    arena: Rect
    shape_text: str
    spacing: float
    goal: Vec2
    poses: list[tuple[float, float, float]] | None
    spawn_region: SpawnRegion | None
    obstacles: list[Obstacle]
    forces: ForceParams
    kinematics: Kinematics
    timeouts: Timeouts
    protocol: ProtocolParams
    comm_radius: float
    max_ticks: int
    seed: int
    stop_at_ready: bool = False

    @property
    def goal_azimuth(self) -> float:
        return math.atan2(self.goal[1], self.goal[0])

    def validate(self) -> ShapeMatrix:
        """Full validation; returns the parsed shape matrix."""
        matrix = parse_shape_matrix(self.shape_text)
        self.forces.validate()
        self.kinematics.validate()
        self.timeouts.validate()
        self.protocol.validate()
        if self.spacing <= 0:
            raise ScenarioError("spacing must be strictly positive")
        if self.comm_radius <= 0:
            raise ScenarioError("comm_radius must be strictly positive")
        if self.max_ticks < 1:
            raise ScenarioError("max_ticks must be at least 1")
        if not (self.arena.lo[0] < self.arena.hi[0] and self.arena.lo[1] < self.arena.hi[1]):
            raise ScenarioError("arena min must be strictly below max componentwise")
        if (self.poses is None) == (self.spawn_region is None):
            raise ScenarioError("exactly one of spawn poses or spawn region is required")
        if self.poses is not None and len(self.poses) != matrix.n:
            raise ScenarioError(
                f"scenario provides {len(self.poses)} poses but the shape needs {matrix.n} bots"
            )
        for obs in self.obstacles:
            if isinstance(obs, Circle) and obs.radius <= 0:
                raise ScenarioError("obstacle radius must be strictly positive")
            if isinstance(obs, Rect) and not (
                obs.lo[0] < obs.hi[0] and obs.lo[1] < obs.hi[1]
            ):
                raise ScenarioError("rect obstacle min must be strictly below max")
        return matrix


def _reject_unknown(d: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ScenarioError(f"unknown keys {unknown} in {where}")


def _vec(value, where: str) -> Vec2:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ScenarioError(f"{where} must be a [x, y] pair")
    return (float(value[0]), float(value[1]))


def _build(cls, data: dict, where: str):
    fields = {f: data[f] for f in data}
    _reject_unknown(data, set(cls.__dataclass_fields__), where)
    try:
        return cls(**fields)
    except TypeError as exc:
        raise ScenarioError(f"bad {where}: {exc}") from None


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> Scenario:
    """Build and validate a Scenario from a parsed JSON document.

    Unknown keys anywhere in the document are rejected.  The shape may be
    given inline under ``shape.matrix`` or as a file path under
    ``shape.path`` (resolved against ``base_dir``).
    """
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")
    allowed = {
        "name", "arena", "shape", "spacing", "spawn", "goal", "obstacles",
        "forces", "kinematics", "timeouts", "protocol", "comm_radius",
        "max_ticks", "seed", "stop_at_ready",
    }
    _reject_unknown(data, allowed, "scenario")
    for key in ("arena", "shape", "goal"):
        if key not in data:
            raise ScenarioError(f"scenario is missing required key {key!r}")

    arena_doc = data["arena"]
    _reject_unknown(arena_doc, {"min", "max"}, "arena")
    arena = Rect(_vec(arena_doc["min"], "arena.min"), _vec(arena_doc["max"], "arena.max"))

    shape_doc = data["shape"]
    _reject_unknown(shape_doc, {"matrix", "path"}, "shape")
    if ("matrix" in shape_doc) == ("path" in shape_doc):
        raise ScenarioError("shape needs exactly one of 'matrix' or 'path'")
    if "matrix" in shape_doc:
        shape_text = str(shape_doc["matrix"])
    else:
        path = Path(shape_doc["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            shape_text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read shape file {path}: {exc}") from None

    spawn_doc = data.get("spawn", {})
    _reject_unknown(spawn_doc, {"poses", "region"}, "spawn")
    poses = None
    region = None
    if "poses" in spawn_doc:
        poses = []
        for i, p in enumerate(spawn_doc["poses"]):
            if not (isinstance(p, (list, tuple)) and len(p) == 3):
                raise ScenarioError(f"spawn.poses[{i}] must be [x, y, heading]")
            poses.append((float(p[0]), float(p[1]), float(p[2])))
    if "region" in spawn_doc:
        reg = spawn_doc["region"]
        _reject_unknown(reg, {"min", "max", "min_separation"}, "spawn.region")
        region = SpawnRegion(
            _vec(reg["min"], "spawn.region.min"),
            _vec(reg["max"], "spawn.region.max"),
            float(reg.get("min_separation", 0.3)),
        )
    if (poses is None) == (region is None):
        raise ScenarioError("spawn needs exactly one of 'poses' or 'region'")

    obstacles: list[Obstacle] = []
    for i, doc in enumerate(data.get("obstacles", [])):
        kind = doc.get("kind")
        if kind == "circle":
            _reject_unknown(doc, {"kind", "center", "radius"}, f"obstacles[{i}]")
            obstacles.append(Circle(_vec(doc["center"], "center"), float(doc["radius"])))
        elif kind == "rect":
            _reject_unknown(doc, {"kind", "min", "max"}, f"obstacles[{i}]")
            obstacles.append(Rect(_vec(doc["min"], "min"), _vec(doc["max"], "max")))
        else:
            raise ScenarioError(f"obstacles[{i}].kind must be 'circle' or 'rect'")

    scenario = Scenario(
        name=str(data.get("name", "scenario")),
        arena=arena,
        shape_text=shape_text,
        spacing=float(data.get("spacing", 1.0)),
        goal=_vec(data["goal"], "goal"),
        poses=poses,
        spawn_region=region,
        obstacles=obstacles,
        forces=_build(ForceParams, data.get("forces", {}), "forces"),
        kinematics=_build(Kinematics, data.get("kinematics", {}), "kinematics"),
        timeouts=_build(Timeouts, data.get("timeouts", {}), "timeouts"),
        protocol=_build(ProtocolParams, data.get("protocol", {}), "protocol"),
        comm_radius=float(data.get("comm_radius", 3.0)),
        max_ticks=int(data.get("max_ticks", 5000)),
        seed=int(data.get("seed", 0)),
        stop_at_ready=bool(data.get("stop_at_ready", False)),
    )
    scenario.validate()
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from None
    return scenario_from_dict(data, base_dir=path.parent)


def sample_poses(scenario: Scenario, n: int) -> list[tuple[float, float, float]]:
    """Seeded uniform spawn sampling with a minimum pairwise separation."""
    region = scenario.spawn_region
    assert region is not None
    rng = random.Random(scenario.seed)
    poses: list[tuple[float, float, float]] = []
    attempts = 0
    while len(poses) < n:
        attempts += 1
        if attempts > 20000:
            raise ScenarioError("spawn region too crowded for the requested separation")
        x = rng.uniform(region.lo[0], region.hi[0])
        y = rng.uniform(region.lo[1], region.hi[1])
        if any(dist((x, y), (px, py)) < region.min_separation for px, py, _ in poses):
            continue
        heading = rng.uniform(-math.pi, math.pi)
        poses.append((x, y, heading))
    return poses


def integrate(
    pose: tuple[float, float, float], command: MotionCommand, kin: Kinematics
) -> tuple[float, float, float]:
    """Heading-slew point kinematics with alignment-gated speed.

    The commanded force acts as a desired velocity: heading turns toward it
    by at most omega_max*dt, speed is min(|force|, v_max) scaled by
    max(0, cos(heading error before the turn)), so a badly misaligned bot
    rotates first and translates later.  Rotation-only commands never
    translate.
    """
    x, y, heading = pose
    max_turn = kin.omega_max * kin.dt
    if command.rotate_to is not None:
        err = wrap_angle(command.rotate_to - heading)
        return (x, y, wrap_angle(heading + clamp(err, -max_turn, max_turn)))
    f = command.force
    if f is None or (f[0] == 0.0 and f[1] == 0.0):
        return pose
    desired = math.atan2(f[1], f[0])
    err = wrap_angle(desired - heading)
    new_heading = wrap_angle(heading + clamp(err, -max_turn, max_turn))
    speed = min(math.hypot(f[0], f[1]), kin.v_max) * max(0.0, math.cos(err))
    if speed > 0.0:
        x += speed * kin.dt * math.cos(new_heading)
        y += speed * kin.dt * math.sin(new_heading)
    return (x, y, new_heading)


@dataclass(frozen=True)
class TraceRow:
    tick: int
    bot: int
    x: float
    y: float
    heading: float
    state: str
    label: int
    role: str
    f_net: float
    f_obs: float
    f_coll: float
    mode: str


@dataclass
class RunResult:
    scenario: Scenario
    rows: list[TraceRow]
    done_counts: list[int]            # per tick, most advanced replica's completion size
    events: list[tuple[int, int, str, str]]  # (tick, bot, from_state, to_state)
    ready_barrier_sizes: list[tuple[int, int, int]]  # (tick, bot, own replica done-size at Ready)
    memories: list[BotMemory]
    poses: list[tuple[float, float, float]]
    ticks_total: int
    ticks_to_formation: int | None
    min_bot_distance: float
    min_obstacle_clearance: float

    @property
    def parents(self) -> dict[int, int]:
        return {m.id: m.parent for m in self.memories if m.parent is not None}

    @property
    def ref_offsets(self) -> dict[int, Vec2]:
        return {m.id: m.ref_offset for m in self.memories if m.ref_offset is not None}


def run(scenario: Scenario) -> RunResult:
    """Execute the scenario to completion (all Done), stop flag, or max_ticks."""
    matrix = scenario.validate()
    table = build_shape_table(matrix, scenario.spacing)
    n = table.n
    poses = list(scenario.poses) if scenario.poses is not None else sample_poses(scenario, n)

    ctx = RunContext(
        table=table,
        params=scenario.forces,
        protocol=scenario.protocol,
        timeouts=scenario.timeouts,
        v_max=scenario.kinematics.v_max,
        goal=scenario.goal,
        goal_azimuth=scenario.goal_azimuth,
        n=n,
    )
    memories = [make_memory(i, (poses[i][0], poses[i][1]), ctx.goal_azimuth) for i in range(n)]
    kin = scenario.kinematics
    r_bot = kin.r_bot

    rows: list[TraceRow] = []
    done_counts: list[int] = []
    events: list[tuple[int, int, str, str]] = []
    ready_barrier_sizes: list[tuple[int, int, int]] = []
    outboxes: list[list] = [[] for _ in range(n)]
    ticks_to_formation: int | None = None
    min_bot_distance = math.inf
    min_obstacle_clearance = math.inf
    ticks_total = 0

    for tick in range(scenario.max_ticks):
        ticks_total = tick + 1
        snapshot = list(poses)
        bodies = [Circle((x, y), r_bot) for x, y, _ in snapshot]

        all_readings = []
        for i in range(n):
            others = bodies[:i] + bodies[i + 1 :]
            all_readings.append(
                sense_ultrasonic(snapshot[i], scenario.obstacles, others, scenario.arena, scenario.forces)
            )

        inboxes: list[list] = [[] for _ in range(n)]
        for j in range(n):
            if not outboxes[j]:
                continue
            for i in range(n):
                if i == j:
                    continue
                if dist(snapshot[i][:2], snapshot[j][:2]) <= scenario.comm_radius:
                    inboxes[i].extend(outboxes[j])

        new_outboxes: list[list] = [[] for _ in range(n)]
        decisions = []
        for i in range(n):
            mem = memories[i]
            inbox = inboxes[i]
            obs = LocalObservation(
                pose=snapshot[i],
                readings=all_readings[i],
                statuses=[m for m in inbox if isinstance(m, Status)],
                offers=[m for m in inbox if isinstance(m, LabelOffer)],
                deltas=[m for m in inbox if isinstance(m, StigmergyDelta)],
                tick=tick,
            )
            before = mem.state
            decision = step(mem, obs, ctx)
            if mem.state is not before:
                events.append((tick, i, before.value, mem.state.value))
                if mem.state is BotState.READY:
                    ready_barrier_sizes.append((tick, i, mem.store.size(DONE_PREFIX)))
            new_outboxes[i] = decision.outbox
            decisions.append(decision)
        outboxes = new_outboxes

        for i in range(n):
            new_pose = integrate(snapshot[i], decisions[i].command, kin)
            x = clamp(new_pose[0], scenario.arena.lo[0] + r_bot, scenario.arena.hi[0] - r_bot)
            y = clamp(new_pose[1], scenario.arena.lo[1] + r_bot, scenario.arena.hi[1] - r_bot)
            poses[i] = (x, y, new_pose[2])

        for i in range(n):
            for j in range(i + 1, n):
                d = dist(poses[i][:2], poses[j][:2])
                if d < min_bot_distance:
                    min_bot_distance = d
        for i in range(n):
            for obs_shape in scenario.obstacles:
                c = obstacle_distance(poses[i][:2], obs_shape) - r_bot
                if c < min_obstacle_clearance:
                    min_obstacle_clearance = c

        done_counts.append(max(m.store.size(DONE_PREFIX) for m in memories))
        for i in range(n):
            mem = memories[i]
            d = decisions[i]
            x, y, heading = poses[i]
            rows.append(
                TraceRow(
                    tick=tick, bot=i, x=x, y=y, heading=heading,
                    state=mem.state.value, label=mem.label, role=mem.role.value,
                    f_net=d.f_net, f_obs=d.f_obs, f_coll=d.f_coll,
                    mode=mem.mode.value,
                )
            )

        states = [m.state for m in memories]
        formed = all(
            s in (BotState.READY, BotState.TRANSIT, BotState.DONE) for s in states
        )
        if formed and ticks_to_formation is None:
            ticks_to_formation = tick
        if all(s is BotState.DONE for s in states):
            break
        if scenario.stop_at_ready and formed:
            break

    return RunResult(
        scenario=scenario,
        rows=rows,
        done_counts=done_counts,
        events=events,
        ready_barrier_sizes=ready_barrier_sizes,
        memories=memories,
        poses=poses,
        ticks_total=ticks_total,
        ticks_to_formation=ticks_to_formation,
        min_bot_distance=min_bot_distance if n > 1 else math.inf,
        min_obstacle_clearance=min_obstacle_clearance,
    )


def _f(x: float) -> str:
    return f"{x:.9g}"


def trace_to_csv(rows: list[TraceRow]) -> str:
    """Render trace rows in the canonical CSV layout (LF endings)."""
    lines = [TRACE_HEADER]
    for r in rows:
        lines.append(
            f"{r.tick},{r.bot},{_f(r.x)},{_f(r.y)},{_f(r.heading)},{r.state},"
            f"{r.label},{r.role},{_f(r.f_net)},{_f(r.f_obs)},{_f(r.f_coll)},{r.mode}"
        )
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str) -> list[TraceRow]:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != TRACE_HEADER:
        raise ScenarioError("trace CSV is missing the canonical header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 12:
            raise ScenarioError(f"trace row has {len(parts)} fields, expected 12")
        rows.append(
            TraceRow(
                tick=int(parts[0]), bot=int(parts[1]),
                x=float(parts[2]), y=float(parts[3]), heading=float(parts[4]),
                state=parts[5], label=int(parts[6]), role=parts[7],
                f_net=float(parts[8]), f_obs=float(parts[9]), f_coll=float(parts[10]),
                mode=parts[11],
            )
        )
    return rows
