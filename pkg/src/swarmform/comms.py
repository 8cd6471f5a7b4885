"""Broadcast messages and the replicated key-value store.

Every bot owns one ``StigmergyStore`` replica.  Writes are stamped with a
Lamport counter and the writer's id; a delta wins a merge iff its
``(lamport, origin)`` pair is lexicographically greater than the local one,
which makes merging commutative, idempotent and order-independent.  Entries
changed since the last broadcast are re-gossiped every tick until the whole
neighborhood has absorbed them, so on a connected comm graph all replicas
agree within graph-diameter ticks of the last write.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class BotState(Enum):
    SEARCHING = "searching"
    MOVING = "moving"
    REACHED = "reached"
    READY = "ready"
    TRANSIT = "transit"
    DONE = "done"


@dataclass(frozen=True)
class Status:
    """Per-tick presence broadcast."""

    sender: int
    position: tuple[float, float]
    heading: float
    label: int
    state: BotState
    dist_origin: float


@dataclass(frozen=True)
class LabelOffer:
    """Labels the sender considers free in its own grid neighborhood."""

    sender: int
    labels: tuple[int, ...]


@dataclass(frozen=True)
class StigmergyDelta:
    sender: int
    key: str
    value: float
    lamport: int
    origin: int


# Well-known key prefixes / keys.
DONE_PREFIX = "done/"
LAT_PREFIX = "lat/"
LON_PREFIX = "lon/"
PARENT_PREFIX = "parent/"
GOAL_AZIMUTH_KEY = "goal_azimuth"
AT_GOAL_KEY = "at_goal"


class StigmergyStore:
    """One bot's replica of the swarm-shared key-value structure."""

    __slots__ = ("owner", "entries", "local_clock", "_dirty")

    def __init__(self, owner: int):
        self.owner = owner
        self.entries: dict[str, tuple[float, int, int]] = {}
        self.local_clock = 0
        self._dirty: set[str] = set()

    def put(self, key: str, value: float) -> StigmergyDelta:
        """Write locally and queue the entry for broadcast."""
        self.local_clock += 1
        self.entries[key] = (value, self.local_clock, self.owner)
        self._dirty.add(key)
        return StigmergyDelta(self.owner, key, value, self.local_clock, self.owner)

    def merge(self, delta: StigmergyDelta) -> bool:
        """Apply a remote delta; returns True when it superseded the local entry."""
        if delta.lamport > self.local_clock:
            self.local_clock = delta.lamport
        local = self.entries.get(delta.key)
        if local is not None and (delta.lamport, delta.origin) <= (local[1], local[2]):
            return False
        self.entries[delta.key] = (delta.value, delta.lamport, delta.origin)
        self._dirty.add(delta.key)
        return True

    def get(self, key: str, default: float | None = None) -> float | None:
        entry = self.entries.get(key)
        return default if entry is None else entry[0]

    def has(self, key: str) -> bool:
        return key in self.entries

    def size(self, prefix: str) -> int:
        return sum(1 for k in self.entries if k.startswith(prefix))

    def items(self, prefix: str) -> list[tuple[str, float]]:
        """(key, value) pairs under a prefix, sorted by key."""
        return sorted((k, v[0]) for k, v in self.entries.items() if k.startswith(prefix))

    def seed(self, key: str, value: float) -> None:
        """Install a pre-shared entry identically on every replica (clock 0, system origin)."""
        self.entries[key] = (value, 0, -1)

    def digest(self, full: bool = False) -> list[StigmergyDelta]:
        """Deltas to broadcast this tick.

        Gossips only entries that changed since the previous call unless
        ``full`` is set; either way the result is sorted by key so message
        order is deterministic.
        """
        keys = sorted(self.entries) if full else sorted(self._dirty)
        out = [
            StigmergyDelta(self.owner, k, *self.entries[k])
            for k in keys
            if k in self.entries
        ]
        self._dirty.clear()
        return out


def stig_size(store: StigmergyStore, prefix: str) -> int:
    return store.size(prefix)


def barrier_reached(store: StigmergyStore, threshold: int, prefix: str = DONE_PREFIX) -> bool:
    """True once the completion set holds exactly ``threshold`` member keys."""
    return store.size(prefix) == threshold
