"""Recorded command streams and their binary container format.

One ``CommandStream`` is the record of a single frame: the resource
lifecycle events that occurred since the previous recorded frame (the
preamble) followed by the frame's draw calls.  A session capture file
holds many frames in one versioned container:

    magic   6s   "GBCAP1"
    version u16  (currently 1)
    count   u32  number of frame records
    per frame:
        frameIndex u32, width u16, height u16
        event block:  u32 count, then per event
            u8 type (1=Create 2=Modify 3=Delete), u32 volatileId,
            Create: u8 kind, u32 len, content bytes
            Modify: u32 len, content bytes
        draw block:   u32 count, then per draw
            u32 meshId, u32 textureId, u32 shaderId
            u8 nTargets, nTargets x u8 target code
            u8 flags (bit0: samples the scene image)
            u32 nTriangles
            nTriangles*3 vertices as i32 x, i32 y   (24.8 fixed point)
            nTriangles*3 depths as f32              (in [0, 1])
            nTriangles   albedo as 3 x u8 RGB

All integers little-endian.  Vertex coordinates use 8 fractional bits.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .resources import Create, Delete, Event, Modify, ResourceKind

MAGIC = b"GBCAP1"
VERSION = 1

FP_SHIFT = 8
FP_ONE = 1 << FP_SHIFT


class Target(enum.IntEnum):
    ALBEDO = 1
    DEPTH = 2
    BACKBUFFER = 3


GBUFFER_TARGETS: tuple[Target, ...] = (Target.ALBEDO, Target.DEPTH)
BACKBUFFER_TARGETS: tuple[Target, ...] = (Target.BACKBUFFER,)


class BadMagic(Exception):
    pass


class VersionMismatch(Exception):
    def __init__(self, found: int):
        self.found = found
        super().__init__(f"container version {found}, expected {VERSION}")


class TruncatedStream(Exception):
    """The byte sequence ended inside a record."""

    def __init__(self, offset: int):
        self.offset = offset
        super().__init__(f"stream truncated at offset {offset}")


@dataclass(eq=False)
class DrawCall:
    """One draw: resource bindings plus screen-space triangles.

    ``verts_fp`` has shape (T, 3, 2) in 24.8 fixed point, ``depths``
    (T, 3) in [0, 1], ``albedo`` (T, 3) as 8-bit RGB per triangle.
    """

    mesh_id: int
    texture_id: int
    shader_id: int
    targets: tuple[Target, ...]
    samples_scene: bool
    verts_fp: np.ndarray
    depths: np.ndarray
    albedo: np.ndarray

    def __post_init__(self) -> None:
        self.verts_fp = np.ascontiguousarray(self.verts_fp, dtype=np.int32)
        self.depths = np.ascontiguousarray(self.depths, dtype=np.float32)
        self.albedo = np.ascontiguousarray(self.albedo, dtype=np.uint8)

    @property
    def triangle_count(self) -> int:
        return self.verts_fp.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DrawCall):
            return NotImplemented
        return (
            self.mesh_id == other.mesh_id
            and self.texture_id == other.texture_id
            and self.shader_id == other.shader_id
            and self.targets == other.targets
            and self.samples_scene == other.samples_scene
            and np.array_equal(self.verts_fp, other.verts_fp)
            and np.array_equal(self.depths, other.depths)
            and np.array_equal(self.albedo, other.albedo)
        )


@dataclass
class CommandStream:
    frame_index: int
    width: int
    height: int
    events: list[Event] = field(default_factory=list)
    draws: list[DrawCall] = field(default_factory=list)


# --- serialization --------------------------------------------------------

class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def pack(self, fmt: str, *values) -> None:
        self.parts.append(struct.pack(fmt, *values))

    def raw(self, data: bytes) -> None:
        self.parts.append(data)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.offset = 0

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise TruncatedStream(self.offset)
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def raw(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise TruncatedStream(self.offset)
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk


_EV_CREATE, _EV_MODIFY, _EV_DELETE = 1, 2, 3


def _write_frame(w: _Writer, stream: CommandStream) -> None:
    w.pack("<IHH", stream.frame_index, stream.width, stream.height)
    w.pack("<I", len(stream.events))
    for ev in stream.events:
        if isinstance(ev, Create):
            w.pack("<BIBI", _EV_CREATE, ev.volatile_id, int(ev.kind), len(ev.content))
            w.raw(ev.content)
        elif isinstance(ev, Modify):
            w.pack("<BII", _EV_MODIFY, ev.volatile_id, len(ev.content))
            w.raw(ev.content)
        elif isinstance(ev, Delete):
            w.pack("<BI", _EV_DELETE, ev.volatile_id)
        else:
            raise TypeError(f"unknown event type {type(ev).__name__}")
    w.pack("<I", len(stream.draws))
    for d in stream.draws:
        w.pack("<III", d.mesh_id, d.texture_id, d.shader_id)
        w.pack("<B", len(d.targets))
        for t in d.targets:
            w.pack("<B", int(t))
        w.pack("<B", 1 if d.samples_scene else 0)
        w.pack("<I", d.triangle_count)
        w.raw(d.verts_fp.astype("<i4", copy=False).tobytes())
        w.raw(d.depths.astype("<f4", copy=False).tobytes())
        w.raw(d.albedo.tobytes())


def _read_frame(r: _Reader) -> CommandStream:
    frame_index, width, height = r.unpack("<IHH")
    n_events, = r.unpack("<I")
    events: list[Event] = []
    for _ in range(n_events):
        etype, vid = r.unpack("<BI")
        if etype == _EV_CREATE:
            kind, length = r.unpack("<BI")
            events.append(Create(vid, ResourceKind(kind), r.raw(length)))
        elif etype == _EV_MODIFY:
            length, = r.unpack("<I")
            events.append(Modify(vid, r.raw(length)))
        elif etype == _EV_DELETE:
            events.append(Delete(vid))
        else:
            raise TruncatedStream(r.offset)
    n_draws, = r.unpack("<I")
    draws: list[DrawCall] = []
    for _ in range(n_draws):
        mesh_id, texture_id, shader_id = r.unpack("<III")
        n_targets, = r.unpack("<B")
        targets = tuple(Target(r.unpack("<B")[0]) for _ in range(n_targets))
        flags, = r.unpack("<B")
        n_tris, = r.unpack("<I")
        verts = np.frombuffer(r.raw(n_tris * 24), dtype="<i4").reshape(n_tris, 3, 2)
        depths = np.frombuffer(r.raw(n_tris * 12), dtype="<f4").reshape(n_tris, 3)
        albedo = np.frombuffer(r.raw(n_tris * 3), dtype=np.uint8).reshape(n_tris, 3)
        draws.append(
            DrawCall(
                mesh_id,
                texture_id,
                shader_id,
                targets,
                bool(flags & 1),
                verts,
                depths,
                albedo,
            )
        )
    return CommandStream(frame_index, width, height, events, draws)


def serialize_session(streams: list[CommandStream]) -> bytes:
    w = _Writer()
    w.raw(MAGIC)
    w.pack("<HI", VERSION, len(streams))
    for stream in streams:
        _write_frame(w, stream)
    return w.getvalue()


def parse_session(data: bytes) -> list[CommandStream]:
    r = _Reader(data)
    if r.raw(len(MAGIC)) != MAGIC:
        raise BadMagic("missing GBCAP1 magic")
    version, count = r.unpack("<HI")
    if version != VERSION:
        raise VersionMismatch(version)
    streams = [_read_frame(r) for _ in range(count)]
    if r.offset != len(data):
        raise TruncatedStream(r.offset)
    return streams


def serialize_stream(stream: CommandStream) -> bytes:
    """Single-frame container; inverse of parse_stream."""
    return serialize_session([stream])


def parse_stream(data: bytes) -> CommandStream:
    streams = parse_session(data)
    if len(streams) != 1:
        raise ValueError(f"expected a single-frame container, found {len(streams)} frames")
    return streams[0]


def write_session(path, streams: list[CommandStream]) -> None:
    with open(path, "wb") as f:
        f.write(serialize_session(streams))


def read_session(path) -> list[CommandStream]:
    with open(path, "rb") as f:
        return parse_session(f.read())
