"""Per-bot protocol state machine.

Each bot walks Searching -> Moving -> Reached -> Ready -> Transit -> Done,
with the single allowed regression Moving -> Searching when it loses a
label conflict.  The controller is a pure per-tick transition over the
bot's own memory, its local observation, and the messages delivered this
tick; it never touches another bot's state, so controllers can run in any
order (or in parallel) within a tick.

Protocol outline:

* Searching bots broadcast their distance to the arena origin; after a
  settle window the strict minimum (ties to the lower id) becomes the seed
  and takes label 0.  Everyone else collects offered labels into a list,
  crossing out entries they hear claimed, and adopts the last surviving
  entry.
* Moving bots head for the grid slot next to the bot holding their parent
  label, yield the label to a higher id on conflict, and switch to Reached
  on arrival.
* Reached bots rotate to the seed's heading, then add their id to the
  shared completion set; when the set holds all n ids the barrier opens
  and they become Ready.
* Ready bots publish lateral/longitudinal coordinates along the goal
  azimuth, elect roles and the Leader, pick parents (forming a tree rooted
  at the Leader), and snapshot the parent-relative reference force.
* In Transit the Leader chases the goal while followers hold their
  parent offsets; obstacle avoidance switches between shrinking the
  formation and per-bot wall following depending on obstacle size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from . import forces
from .comms import (
    AT_GOAL_KEY,
    BotState,
    DONE_PREFIX,
    GOAL_AZIMUTH_KEY,
    LAT_PREFIX,
    LON_PREFIX,
    PARENT_PREFIX,
    LabelOffer,
    Status,
    StigmergyDelta,
    StigmergyStore,
)
from .forces import ForceParams, compose_total, mask_bot_readings
from .geometry import Vec2, angle_of, dist, norm, rotate, sub, unit, wrap_angle
from .sensing import Classification, classify_obstacle, wall_follow
from .shapes import ShapeTable


class Role(Enum):
    NONE = "none"
    LEFTMOST = "leftmost"
    RIGHTMOST = "rightmost"
    LEADER = "leader"


class TransitMode(Enum):
    NONE = "none"
    FORMATION_HOLD = "hold"
    SHRINK_AVOID = "shrink"
    WALL_FOLLOW = "wall"
    STOPPED = "stopped"


# Indices of the forward-facing sensors (-pi/4, 0, +pi/4) in the fan; an
# avoidance episode ends only after these stay clear, because a convex
# obstacle sliding along the +-pi/2 edge of the fan never clears all five.
FRONT_SENSORS = (1, 2, 3)


@dataclass(frozen=True)
class Timeouts:
    settle_ticks: int = 10
    ready_ticks: int = 100
    clear_ticks: int = 20

    def validate(self) -> None:
        if self.settle_ticks < 1 or self.ready_ticks < 0 or self.clear_ticks < 1:
            raise ValueError("timeouts must be positive (settle >= 1, clear >= 1)")


@dataclass(frozen=True)
class ProtocolParams:
    k_form: float = 1.0          # attraction gain while seeking a grid slot
    eps_pos: float = 0.02        # arrival tolerance, m
    eps_hold: float = 0.006      # position-hold deadband, m
    eps_heading: float = 0.05    # alignment tolerance, rad
    goal_radius: float = 0.2     # leader arrival tolerance, m
    wall_distance: float = 0.4   # wall-follow standoff, m
    wall_band: float = 0.1       # standoff tolerance band, m
    mask_slack: float = 0.25     # extra range when deciding a reading is a neighbor, m

    def validate(self) -> None:
        for name in ("k_form", "eps_pos", "eps_hold", "eps_heading", "goal_radius",
                     "wall_distance", "wall_band", "mask_slack"):
            if getattr(self, name) <= 0:
                raise ValueError(f"protocol parameter {name} must be strictly positive")


@dataclass(frozen=True)
class RunContext:
    """Shared, read-only configuration every controller sees."""

    table: ShapeTable
    params: ForceParams
    protocol: ProtocolParams
    timeouts: Timeouts
    v_max: float
    goal: Vec2
    goal_azimuth: float
    n: int


@dataclass(frozen=True)
class LocalObservation:
    pose: tuple[float, float, float]
    readings: list[tuple[float, float]]
    statuses: list[Status]        # sorted by sender id
    offers: list[LabelOffer]      # sorted by sender id
    deltas: list[StigmergyDelta]  # sorted by (sender id, key)
    tick: int


@dataclass
class MotionCommand:
    force: Vec2 | None = None
    rotate_to: float | None = None


@dataclass
class TickDecision:
    command: MotionCommand
    outbox: list
    f_net: float
    f_obs: float
    f_coll: float


@dataclass
class BotMemory:
    """Everything one bot remembers between ticks."""

    id: int
    store: StigmergyStore
    state: BotState = BotState.SEARCHING
    label: int = -1
    label_list: list[int] = field(default_factory=list)
    offer_parent_labels: list[int] = field(default_factory=list)
    parent_label: int | None = None   # label of the offerer followed while Moving
    parent: int | None = None         # bot id of the parent chosen at Ready
    role: Role = Role.NONE
    f_ref: Vec2 | None = None
    ref_offset: Vec2 | None = None    # parent position minus own at reference time
    mode: TransitMode = TransitMode.NONE
    target: Vec2 | None = None
    parent_pos: Vec2 | None = None    # last heard position of the chosen parent
    ref_heading: float | None = None
    goal: Vec2 | None = None          # delivered only to the elected Leader
    heard_dists: dict[int, float] = field(default_factory=dict)
    ready_entry_tick: int | None = None
    done_put: bool = False
    roles_assigned: bool = False
    clear_count: int = 0
    wall_dir: int | None = None
    in_episode: bool = False
    _live_offers: dict[int, int] = field(default_factory=dict)

    def transition(self, new_state: BotState) -> None:
        self.state = new_state


def make_memory(bot_id: int, position: Vec2, goal_azimuth: float) -> BotMemory:
    store = StigmergyStore(bot_id)
    store.seed(GOAL_AZIMUTH_KEY, goal_azimuth)
    mem = BotMemory(id=bot_id, store=store)
    mem.heard_dists[bot_id] = norm(position)
    return mem


# ---------------------------------------------------------------------------
# Label allotment


def elect_seed(
    mem: BotMemory, obs: LocalObservation, ctx: RunContext, seed_claimed: bool = False
) -> bool:
    """Adopt label 0 when this bot's broadcast origin distance is the minimum.

    Distances heard in Status broadcasts accumulate over the settle window;
    ties break toward the lower id.  Non-minimal bots simply keep searching.
    A bot that already hears someone claiming label 0 never self-elects (a
    conflict loser re-entering Searching must not found a second seed).
    """
    if obs.tick < ctx.timeouts.settle_ticks or seed_claimed:
        return False
    best = min((d, i) for i, d in mem.heard_dists.items())
    if best[1] != mem.id:
        return False
    mem.label = 0
    mem.parent_label = None
    mem.transition(BotState.MOVING)
    return True


def collect_labels(
    mem: BotMemory,
    offers: list[LabelOffer],
    statuses: list[Status],
    claimed: set[int],
) -> bool:
    """Append heard offers, cross out claimed entries, adopt the last survivor.

    Offer entries arrive in sender-id order; an entry whose label is already
    claimed by a heard neighbor is overwritten with -1 (permanently, matching
    first-claim-wins bookkeeping).  Repeat offers of a still-live entry are
    collapsed so the list stays bounded.  Returns True when a label was taken.
    """
    sender_labels = {s.sender: s.label for s in statuses}
    for offer in offers:
        src_label = sender_labels.get(offer.sender, -1)
        if src_label < 0:
            continue
        for lbl in offer.labels:
            if lbl in mem._live_offers:
                continue
            mem.label_list.append(lbl)
            mem.offer_parent_labels.append(src_label)
            mem._live_offers[lbl] = len(mem.label_list) - 1
    for lbl in claimed:
        idx = mem._live_offers.pop(lbl, None)
        if idx is not None:
            mem.label_list[idx] = -1
    for idx in range(len(mem.label_list) - 1, -1, -1):
        lbl = mem.label_list[idx]
        if lbl >= 0:
            mem.label = lbl
            mem.parent_label = mem.offer_parent_labels[idx]
            mem.label_list[idx] = -1
            mem._live_offers.pop(lbl, None)
            mem.transition(BotState.MOVING)
            return True
    return False


def offer_labels(mem: BotMemory, ctx: RunContext, claimed: set[int]) -> tuple[int, ...]:
    """Labels in this bot's grid neighborhood not observed as claimed."""
    row = ctx.table.rows.get(mem.label, ())
    return tuple(ref.label for ref in row if ref.label not in claimed)


def resolve_conflict(mem: BotMemory, claimant_ids: list[int]) -> bool:
    """Keep the label iff this bot has the highest id among the claimants.

    Losing reverts the bot to Searching and crosses the lost label out of
    its offer list.  Returns True when the label was kept.
    """
    if not claimant_ids or max(claimant_ids) < mem.id:
        return True
    lost = mem.label
    for idx, lbl in enumerate(mem.label_list):
        if lbl == lost:
            mem.label_list[idx] = -1
    mem._live_offers.pop(lost, None)
    mem.label = -1
    mem.parent_label = None
    mem.target = None
    mem.transition(BotState.SEARCHING)
    return False


def target_position(mem: BotMemory, statuses: list[Status], ctx: RunContext) -> Vec2 | None:
    """Grid slot relative to the current holder of the parent label.

    The parent label's shape-table row carries this bot's bearing and
    distance as seen from the parent; the world-frame target is the parent's
    broadcast position plus that offset.  The seed (no parent label) targets
    the arena origin.  When the parent label is not heard this tick the last
    target is kept.
    """
    if mem.parent_label is None:
        return (0.0, 0.0)
    holder = None
    for s in statuses:
        if s.label == mem.parent_label and s.state is not BotState.SEARCHING:
            holder = s
            break
    if holder is None:
        return mem.target
    try:
        ref = ctx.table.entry(mem.parent_label, mem.label)
    except KeyError:
        return mem.target
    return (
        holder.position[0] + ref.distance * math.cos(ref.angle),
        holder.position[1] + ref.distance * math.sin(ref.angle),
    )


# ---------------------------------------------------------------------------
# Completion, roles, parents


def align_and_complete(
    mem: BotMemory, obs: LocalObservation, ctx: RunContext
) -> MotionCommand | None:
    """Rotate to the seed's heading, join the completion set, pass the barrier.

    Returns a rotation command while misaligned, otherwise None.  Once
    aligned the bot writes its completion key; when its replica holds all n
    keys it becomes Ready and publishes its goal-frame coordinates.
    """
    x, y, heading = obs.pose
    reference = mem.ref_heading if mem.ref_heading is not None else heading
    err = wrap_angle(heading - reference)
    if abs(err) > ctx.protocol.eps_heading:
        return MotionCommand(rotate_to=reference)
    if not mem.done_put:
        mem.store.put(f"{DONE_PREFIX}{mem.id}", 1.0)
        mem.done_put = True
    if mem.store.size(DONE_PREFIX) == ctx.n:
        mem.transition(BotState.READY)
        mem.ready_entry_tick = obs.tick
        u = unit(ctx.goal_azimuth)
        lon = x * u[0] + y * u[1]
        lat = -x * u[1] + y * u[0]
        mem.store.put(f"{LON_PREFIX}{mem.id}", lon)
        mem.store.put(f"{LAT_PREFIX}{mem.id}", lat)
    return None


def assign_roles_and_leader(mem: BotMemory, ctx: RunContext) -> bool:
    """Derive roles from the converged coordinate tables.

    Minimum lateral coordinate takes Leftmost, maximum takes Rightmost, and
    the maximum longitudinal coordinate takes Leader; every tie breaks to
    the higher id.  All replicas hold identical tables by the time n entries
    exist, so every bot derives the same assignment.  The Leader is handed
    the goal coordinates; nobody else learns them.
    """
    lats = [(v, int(k[len(LAT_PREFIX):])) for k, v in mem.store.items(LAT_PREFIX)]
    lons = [(v, int(k[len(LON_PREFIX):])) for k, v in mem.store.items(LON_PREFIX)]
    if len(lats) < ctx.n or len(lons) < ctx.n:
        return False
    leftmost = min(lats, key=lambda e: (e[0], -e[1]))[1]
    rightmost = max(lats, key=lambda e: (e[0], e[1]))[1]
    leader = max(lons, key=lambda e: (e[0], e[1]))[1]
    if mem.id == leader:
        mem.role = Role.LEADER
        mem.goal = ctx.goal
    elif mem.id == leftmost:
        mem.role = Role.LEFTMOST
    elif mem.id == rightmost:
        mem.role = Role.RIGHTMOST
    else:
        mem.role = Role.NONE
    mem.roles_assigned = True
    return True


def _ancestor_chain_contains(store: StigmergyStore, start: int, needle: int, n: int) -> bool:
    cur = start
    for _ in range(n + 1):
        nxt = store.get(f"{PARENT_PREFIX}{cur}")
        if nxt is None:
            return False
        cur = int(nxt)
        if cur == needle:
            return True
    return False


def choose_parent(mem: BotMemory, obs: LocalObservation, ctx: RunContext) -> bool:
    """Pick the formation parent among heard Ready neighbors.

    Candidates sort by (longitudinal coordinate descending, distance
    ascending, id ascending); the first one strictly ahead of this bot in
    (lon, id) order whose ancestor chain does not loop back here wins.
    Ordering by the strict (lon, id) total order makes the published parent
    table a forest rooted at the Leader.  The parent-relative reference
    force is snapshotted at the same moment.  Returns True once chosen.
    """
    x, y, _ = obs.pose
    my_lon = mem.store.get(f"{LON_PREFIX}{mem.id}")
    if my_lon is None:
        return False
    candidates = []
    for s in obs.statuses:
        if s.state is not BotState.READY:
            continue
        lon = mem.store.get(f"{LON_PREFIX}{s.sender}")
        if lon is None or (lon, s.sender) <= (my_lon, mem.id):
            continue
        candidates.append((-lon, dist((x, y), s.position), s.sender, s))
    candidates.sort(key=lambda c: c[:3])
    for _, r0, sender, s in candidates:
        if _ancestor_chain_contains(mem.store, sender, mem.id, ctx.n):
            continue
        alpha0 = angle_of(sub(s.position, (x, y)))
        mem.parent = sender
        mem.f_ref = forces.reference_force(r0, alpha0, ctx.params)
        mem.ref_offset = sub(s.position, (x, y))
        mem.store.put(f"{PARENT_PREFIX}{mem.id}", float(sender))
        return True
    return False


# ---------------------------------------------------------------------------
# Transit

def transit_mode(
    mem: BotMemory,
    masked_readings: list[tuple[float, float]],
    classification: Classification,
    ctx: RunContext,
) -> TransitMode:
    """Update the avoidance mode from this tick's obstacle classification.

    An avoidance episode begins when a forward sensor is obstructed: a large
    classification latches ShrinkAvoid for the rest of the episode (obstacle
    force on top of the formation force), a small one starts per-bot wall
    following with the formation force suppressed.  Side-only contact never
    opens an episode; the obstacle force alone handles it.  The episode
    ends, and the mode falls back to FormationHold, once the three forward
    sensors stay clear for the configured number of consecutive ticks (a
    convex obstacle sliding along the fan edge would otherwise hold the bot
    in orbit forever).
    """
    if mem.store.has(AT_GOAL_KEY):
        mem.mode = TransitMode.STOPPED
        return mem.mode
    front_clear = all(
        masked_readings[i][1] >= ctx.params.sensor_max for i in FRONT_SENSORS
    )
    if classification is Classification.LARGE and not front_clear:
        mem.mode = TransitMode.SHRINK_AVOID
        mem.in_episode = True
        mem.clear_count = 0
        mem.wall_dir = None
    elif classification is Classification.SMALL and not front_clear and not mem.in_episode:
        mem.mode = TransitMode.WALL_FOLLOW
        mem.in_episode = True
        mem.clear_count = 0
    elif mem.in_episode:
        if front_clear:
            mem.clear_count += 1
        else:
            mem.clear_count = 0
    if mem.in_episode and mem.clear_count >= ctx.timeouts.clear_ticks:
        mem.mode = TransitMode.FORMATION_HOLD
        mem.in_episode = False
        mem.clear_count = 0
        mem.wall_dir = None
    elif not mem.in_episode:
        mem.mode = TransitMode.FORMATION_HOLD
    return mem.mode


# ---------------------------------------------------------------------------
# The per-tick transition


def step(mem: BotMemory, obs: LocalObservation, ctx: RunContext) -> TickDecision:
    """One tick of the protocol: returns the motion command and broadcasts."""
    x, y, heading = obs.pose
    pos = (x, y)

    for delta in obs.deltas:
        mem.store.merge(delta)

    statuses = obs.statuses
    claimed = {s.label for s in statuses if s.label >= 0 and s.state is not BotState.SEARCHING}
    if mem.label >= 0:
        claimed.add(mem.label)

    # The seed orients itself along the goal azimuth (public knowledge); every
    # other bot aligns to the seed's broadcast heading, so the whole formation
    # ends up facing the travel direction before transit begins.
    if mem.label == 0:
        mem.ref_heading = ctx.goal_azimuth
    else:
        seed_status = next(
            (s for s in statuses if s.label == 0 and s.state is not BotState.SEARCHING), None
        )
        if seed_status is not None:
            mem.ref_heading = seed_status.heading

    command = MotionCommand()
    drive: Vec2 = (0.0, 0.0)
    obstacle: Vec2 = (0.0, 0.0)

    if mem.state is BotState.SEARCHING:
        mem.heard_dists[mem.id] = norm(pos)
        for s in statuses:
            mem.heard_dists[s.sender] = s.dist_origin
        seed_claimed = any(
            s.label == 0 and s.state is not BotState.SEARCHING for s in statuses
        )
        if not elect_seed(mem, obs, ctx, seed_claimed):
            collect_labels(mem, obs.offers, statuses, claimed)
        if mem.state is BotState.MOVING:
            claimed.add(mem.label)

    elif mem.state is BotState.MOVING:
        claimants = [
            s.sender
            for s in statuses
            if s.label == mem.label and s.state is not BotState.SEARCHING
        ]
        resolve_conflict(mem, claimants)

    if mem.state is BotState.MOVING:
        tgt = target_position(mem, statuses, ctx)
        mem.target = tgt
        if tgt is not None:
            if dist(pos, tgt) <= ctx.protocol.eps_pos:
                mem.transition(BotState.REACHED)
            else:
                drive = (
                    ctx.protocol.k_form * (tgt[0] - x),
                    ctx.protocol.k_form * (tgt[1] - y),
                )

    if mem.state is BotState.REACHED:
        tgt = target_position(mem, statuses, ctx)
        if tgt is not None:
            mem.target = tgt
        if mem.target is not None and dist(pos, mem.target) > ctx.protocol.eps_hold:
            drive = (
                ctx.protocol.k_form * (mem.target[0] - x),
                ctx.protocol.k_form * (mem.target[1] - y),
            )
        else:
            rot = align_and_complete(mem, obs, ctx)
            if rot is not None:
                command = rot

    if mem.state is BotState.READY:
        if mem.target is not None and dist(pos, mem.target) > ctx.protocol.eps_hold:
            drive = (
                ctx.protocol.k_form * (mem.target[0] - x),
                ctx.protocol.k_form * (mem.target[1] - y),
            )
        if not mem.roles_assigned:
            assign_roles_and_leader(mem, ctx)
        if mem.roles_assigned and mem.role is not Role.LEADER and mem.parent is None:
            choose_parent(mem, obs, ctx)
        ready_for_transit = mem.roles_assigned and (
            mem.role is Role.LEADER or mem.parent is not None
        )
        if (
            ready_for_transit
            and mem.ready_entry_tick is not None
            and obs.tick - mem.ready_entry_tick >= ctx.timeouts.ready_ticks
        ):
            mem.transition(BotState.TRANSIT)
            mem.mode = TransitMode.FORMATION_HOLD

    f_net_record: float | None = None
    if mem.state is BotState.TRANSIT:
        drive, obstacle, command, f_net_record = _transit_step(mem, obs, ctx, statuses)

    # Collision override from heard neighbor positions.
    collision: Vec2 = (0.0, 0.0)
    inside = False
    if mem.state not in (BotState.SEARCHING, BotState.DONE):
        for s in statuses:
            r_ij = dist(pos, s.position)
            if 0.0 < r_ij < ctx.params.r_o:
                inside = True
                alpha_ij = angle_of(sub(s.position, pos))
                fc = forces.collision_force(r_ij, alpha_ij, ctx.params)
                collision = (collision[0] + fc[0], collision[1] + fc[1])

    composed = compose_total(mem.state, collision, inside, drive, obstacle)
    if inside:
        # Collision avoidance preempts in-place rotation as well.
        command = MotionCommand(force=composed.total)
    elif command.rotate_to is None:
        command.force = composed.total

    outbox: list = [
        Status(
            sender=mem.id,
            position=pos,
            heading=heading,
            label=mem.label,
            state=mem.state,
            dist_origin=norm(pos),
        )
    ]
    if mem.state in (BotState.MOVING, BotState.REACHED, BotState.READY) and mem.label >= 0:
        available = offer_labels(mem, ctx, claimed)
        if available:
            outbox.append(LabelOffer(sender=mem.id, labels=available))
    outbox.extend(mem.store.digest())

    return TickDecision(
        command=command,
        outbox=outbox,
        f_net=composed.f_net if f_net_record is None else f_net_record,
        f_obs=composed.f_obs,
        f_coll=composed.f_coll,
    )


def _transit_step(
    mem: BotMemory,
    obs: LocalObservation,
    ctx: RunContext,
    statuses: list[Status],
) -> tuple[Vec2, Vec2, MotionCommand, float]:
    """Transit-phase applied drive, obstacle component, and traced residual.

    The traced residual is the formation force magnitude (the goal pull for
    the Leader) even while wall following suppresses it, so the exported
    force series always reflects positional error.
    """
    x, y, heading = obs.pose
    pos = (x, y)
    command = MotionCommand()

    neighbor_azimuths = [
        wrap_angle(angle_of(sub(s.position, pos)) - heading)
        for s in statuses
        if dist(pos, s.position) <= ctx.params.sensor_max + ctx.protocol.mask_slack
    ]
    masked = mask_bot_readings(obs.readings, neighbor_azimuths, ctx.params)
    classification = classify_obstacle(masked, ctx.params)
    mode = transit_mode(mem, masked, classification, ctx)

    if mode is TransitMode.STOPPED:
        if mem.state is not BotState.DONE:
            mem.transition(BotState.DONE)
        return (0.0, 0.0), (0.0, 0.0), command, 0.0

    formation: Vec2 = (0.0, 0.0)
    if mem.role is Role.LEADER:
        assert mem.goal is not None
        formation = forces.goal_force(mem.goal, pos, ctx.params)
        if dist(pos, mem.goal) <= ctx.protocol.goal_radius:
            mem.store.put(AT_GOAL_KEY, 1.0)
            mem.mode = TransitMode.STOPPED
            mem.transition(BotState.DONE)
            return (0.0, 0.0), (0.0, 0.0), command, 0.0
    else:
        parent_status = next((s for s in statuses if s.sender == mem.parent), None)
        if parent_status is not None:
            mem.parent_pos = parent_status.position
        if mem.parent_pos is not None and mem.f_ref is not None:
            r_t = dist(pos, mem.parent_pos)
            alpha_t = angle_of(sub(mem.parent_pos, pos))
            f_a = forces.attract_force(r_t, alpha_t, ctx.params)
            formation = forces.net_formation_force(f_a, mem.f_ref)

    drive = formation
    if mode is TransitMode.WALL_FOLLOW:
        cmd_bot, mem.wall_dir = wall_follow(
            masked,
            mem.wall_dir,
            ctx.params,
            ctx.v_max,
            ctx.protocol.wall_distance,
            ctx.protocol.wall_band,
        )
        drive = rotate(cmd_bot, heading)

    obstacle = forces.obstacle_force(
        obs.readings, neighbor_azimuths, norm(drive), ctx.params, heading
    )
    return drive, obstacle, command, norm(formation)
