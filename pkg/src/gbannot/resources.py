"""Content-addressed identity for rendering resources.

A resource (mesh, texture or shader) is identified within one session by
a volatile 32-bit id the application chose, and across sessions by the
128-bit hash of its content.  This module provides the hash, the
lifecycle event types a recorded session is made of, and the table that
maps live volatile ids to persistent keys.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

from .murmur3 import murmur3_x64_128

HASH_SEED = 0

# Volatile ids live strictly below the sentinel used for "no geometry"
# pixels in id images.
MAX_VOLATILE_ID = 0xFFFFFFFE
ID_SENTINEL = 0xFFFFFFFF


class ResourceKind(enum.IntEnum):
    MESH = 1
    TEXTURE = 2
    SHADER = 3


@dataclass(frozen=True)
class ResourceBlob:
    """Opaque resource memory plus its session-scoped handle."""

    kind: ResourceKind
    content: bytes
    volatile_id: int


def hash_resource(kind: ResourceKind, content: bytes) -> bytes:
    """128-bit persistent key for a resource's memory content.

    The single kind-tag byte is prepended so equal bytes of different
    kinds never alias.  Pure function of (kind, content); never depends
    on volatile ids, session or time.
    """
    return _hash_cached(int(kind), bytes(content))


@lru_cache(maxsize=65536)
def _hash_cached(kind: int, content: bytes) -> bytes:
    return murmur3_x64_128(bytes([kind]) + content, HASH_SEED)


def key_hex(key: bytes) -> str:
    """Render a persistent key as 32 lowercase hex digits."""
    return key.hex()


# --- session lifecycle events -------------------------------------------

@dataclass(frozen=True)
class Create:
    volatile_id: int
    kind: ResourceKind
    content: bytes


@dataclass(frozen=True)
class Modify:
    volatile_id: int
    content: bytes


@dataclass(frozen=True)
class Delete:
    volatile_id: int


Event = Create | Modify | Delete


class MalformedEventLog(Exception):
    """Raised when an event log violates lifecycle rules.

    Carries the index of the offending event.
    """

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"event {index}: {reason}")


class UnknownVolatileId(KeyError):
    def __init__(self, volatile_id: int):
        self.volatile_id = volatile_id
        super().__init__(f"volatile id {volatile_id} is not live")


@dataclass
class SessionResourceTable:
    """Live volatile id -> (kind, persistent key), for one session.

    ``generation`` counts applied events, so snapshots taken after
    different event prefixes are distinguishable.
    """

    entries: dict[int, tuple[ResourceKind, bytes]] = field(default_factory=dict)
    generation: int = 0

    def apply(self, event: Event, index: int = -1) -> None:
        if isinstance(event, Create):
            if event.volatile_id in self.entries:
                raise MalformedEventLog(index, f"Create of live id {event.volatile_id}")
            if not 0 <= event.volatile_id <= MAX_VOLATILE_ID:
                raise MalformedEventLog(index, f"volatile id {event.volatile_id} out of range")
            self.entries[event.volatile_id] = (
                event.kind,
                hash_resource(event.kind, event.content),
            )
        elif isinstance(event, Modify):
            if event.volatile_id not in self.entries:
                raise MalformedEventLog(index, f"Modify of unknown id {event.volatile_id}")
            kind = self.entries[event.volatile_id][0]
            self.entries[event.volatile_id] = (kind, hash_resource(kind, event.content))
        elif isinstance(event, Delete):
            if event.volatile_id not in self.entries:
                raise MalformedEventLog(index, f"Delete of unknown id {event.volatile_id}")
            del self.entries[event.volatile_id]
        else:
            raise MalformedEventLog(index, f"unknown event type {type(event).__name__}")
        self.generation += 1

    def resolve(self, volatile_id: int) -> bytes:
        try:
            return self.entries[volatile_id][1]
        except KeyError:
            raise UnknownVolatileId(volatile_id) from None

    def kind_of(self, volatile_id: int) -> ResourceKind:
        try:
            return self.entries[volatile_id][0]
        except KeyError:
            raise UnknownVolatileId(volatile_id) from None

    def copy(self) -> "SessionResourceTable":
        return SessionResourceTable(dict(self.entries), self.generation)


def build_session_table(
    events: list[Event], base: SessionResourceTable | None = None
) -> SessionResourceTable:
    """Fold lifecycle events into a resource table.

    A ``Modify`` rehashes, so modified content acquires a new persistent
    key.  With ``base`` given, events extend a copy of an existing
    session state (used when frame records carry incremental preambles).
    """
    table = base.copy() if base is not None else SessionResourceTable()
    for i, event in enumerate(events):
        table.apply(event, i)
    return table
