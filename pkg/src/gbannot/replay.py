"""Frame replay: conventional color pass and the id-encoding pass.

Both replays rasterize only the main geometry draws, with identical
depth resolution, so the visible surface agrees pixel-for-pixel between
the two outputs.  Post-processing and HUD groups are skipped by
contract.  The id pass routes every visible draw's three volatile ids
through the 12-channel encoding (four RGB render targets) and decodes
them back into three 32-bit planes, mirroring the capture mechanism it
reproduces.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .passes import PassPartition, identify_passes
from .raster import rasterize_draws
from .resources import ID_SENTINEL, SessionResourceTable, build_session_table
from .stream import CommandStream

# Background pixels of the color replay.
CLEAR_COLOR = (0, 0, 0)

IDPLANE_MAGIC = b"GBIDP1\0\0"
TABLE_MAGIC = b"GBTBL1"


def encode_ids(mesh32: int, texture32: int, shader32: int) -> tuple[int, ...]:
    """Pack three 32-bit ids into twelve 8-bit channels.

    Big-endian mesh, texture, shader concatenated, filling T0.r, T0.g,
    T0.b, T1.r, ... T3.b in order.
    """
    raw = (
        mesh32.to_bytes(4, "big")
        + texture32.to_bytes(4, "big")
        + shader32.to_bytes(4, "big")
    )
    return tuple(raw)


def decode_ids(channels: tuple[int, ...]) -> tuple[int, int, int]:
    raw = bytes(channels)
    if len(raw) != 12:
        raise ValueError(f"expected 12 channel values, got {len(raw)}")
    return (
        int.from_bytes(raw[0:4], "big"),
        int.from_bytes(raw[4:8], "big"),
        int.from_bytes(raw[8:12], "big"),
    )


def _encode_id_targets(id_planes: np.ndarray) -> np.ndarray:
    """Vector form of encode_ids over an (H, W, 3) uint32 image.

    Returns the four RGB render targets as (4, H, W, 3) uint8.
    """
    h, w, _ = id_planes.shape
    be = id_planes.astype(">u4").view(np.uint8).reshape(h, w, 12)
    return np.moveaxis(be.reshape(h, w, 4, 3), 2, 0)


def _decode_id_targets(targets: np.ndarray) -> np.ndarray:
    """Inverse of _encode_id_targets: (4, H, W, 3) uint8 -> (H, W, 3) uint32."""
    _, h, w, _ = targets.shape
    be = np.moveaxis(targets, 0, 2).reshape(h, w, 12)
    return be.view(">u4").astype(np.uint32).reshape(h, w, 3)


def replay_color(stream: CommandStream, partition: PassPartition) -> np.ndarray:
    """Depth-tested flat-albedo render of the main geometry draws."""
    draws = [stream.draws[i] for i in partition.main_draw_indices()]
    winner, _, _ = rasterize_draws(draws, stream.width, stream.height)
    image = np.empty((stream.height, stream.width, 3), dtype=np.uint8)
    image[:] = CLEAR_COLOR
    covered = winner >= 0
    if covered.any():
        albedo = np.concatenate([d.albedo for d in draws]) if draws else np.zeros((0, 3), np.uint8)
        image[covered] = albedo[winner[covered]]
    return image


def replay_ids(stream: CommandStream, partition: PassPartition) -> np.ndarray:
    """Id-encoding render: (H, W, 3) uint32 of (mesh, texture, shader).

    Uncovered pixels hold the sentinel in all three planes.
    """
    draws = [stream.draws[i] for i in partition.main_draw_indices()]
    winner, _, tri_to_draw = rasterize_draws(draws, stream.width, stream.height)
    planes = np.full((stream.height, stream.width, 3), ID_SENTINEL, dtype=np.uint32)
    covered = winner >= 0
    if covered.any():
        triples = np.array(
            [[d.mesh_id, d.texture_id, d.shader_id] for d in draws], dtype=np.uint32
        )
        planes[covered] = triples[tri_to_draw[winner[covered]]]
    # Round-trip through the four 8-bit render targets the capture
    # mechanism actually writes.
    return _decode_id_targets(_encode_id_targets(planes))


@dataclass(eq=False)
class FrameCapture:
    frame_index: int
    color: np.ndarray  # (H, W, 3) uint8
    ids: np.ndarray  # (H, W, 3) uint32, ID_SENTINEL where no geometry
    table: SessionResourceTable

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrameCapture):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and np.array_equal(self.color, other.color)
            and np.array_equal(self.ids, other.ids)
            and self.table.entries == other.table.entries
            and self.table.generation == other.table.generation
        )


def make_frame_capture(
    stream: CommandStream, base_table: SessionResourceTable | None = None
) -> FrameCapture:
    """Replay one recorded frame into a capture.

    ``base_table`` carries session state into frames whose event
    preamble is incremental; the capture stores the post-preamble
    snapshot.
    """
    table = build_session_table(stream.events, base_table)
    partition = identify_passes(stream)
    color = replay_color(stream, partition)
    ids = replay_ids(stream, partition)
    for vid in np.unique(ids):
        if vid != ID_SENTINEL:
            table.resolve(int(vid))
    return FrameCapture(stream.frame_index, color, ids, table)


# --- on-disk form ----------------------------------------------------------

class CorruptCapture(Exception):
    pass


def _paths(directory, frame_index: int) -> tuple[Path, Path, Path]:
    d = Path(directory)
    stem = f"frame_{frame_index:05d}"
    return d / f"{stem}.ppm", d / f"{stem}.gbid", d / f"{stem}.tbl"


def write_ppm(path, image: np.ndarray) -> None:
    h, w, _ = image.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(image.astype(np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise CorruptCapture(f"{path}: not a P6 capture image")
    w, h = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != w * h * 3:
        raise CorruptCapture(f"{path}: pixel payload size mismatch")
    return pixels.reshape(h, w, 3).copy()


def write_id_planes(path, ids: np.ndarray) -> None:
    h, w, _ = ids.shape
    with open(path, "wb") as f:
        f.write(IDPLANE_MAGIC)
        f.write(np.array([w, h], dtype="<u2").tobytes())
        # mesh, texture, shader planes in order, row-major u32le
        f.write(np.ascontiguousarray(np.moveaxis(ids, 2, 0)).astype("<u4").tobytes())


def read_id_planes(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(IDPLANE_MAGIC):
        raise CorruptCapture(f"{path}: missing id-plane magic")
    w, h = np.frombuffer(data, dtype="<u2", count=2, offset=len(IDPLANE_MAGIC))
    expected = len(IDPLANE_MAGIC) + 4 + 3 * int(w) * int(h) * 4
    if len(data) != expected:
        raise CorruptCapture(f"{path}: truncated id planes")
    planes = np.frombuffer(data, dtype="<u4", offset=len(IDPLANE_MAGIC) + 4)
    return np.moveaxis(planes.reshape(3, int(h), int(w)), 0, 2).astype(np.uint32)


def write_table(path, table: SessionResourceTable) -> None:
    with open(path, "wb") as f:
        f.write(TABLE_MAGIC)
        f.write(np.array([table.generation, len(table.entries)], dtype="<u4").tobytes())
        for vid in sorted(table.entries):
            kind, key = table.entries[vid]
            f.write(np.array([vid], dtype="<u4").tobytes())
            f.write(bytes([int(kind)]))
            f.write(key)


def read_table(path) -> SessionResourceTable:
    from .resources import ResourceKind

    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(TABLE_MAGIC):
        raise CorruptCapture(f"{path}: missing table magic")
    generation, count = np.frombuffer(data, dtype="<u4", count=2, offset=len(TABLE_MAGIC))
    entries: dict[int, tuple[ResourceKind, bytes]] = {}
    off = len(TABLE_MAGIC) + 8
    for _ in range(int(count)):
        if off + 21 > len(data):
            raise CorruptCapture(f"{path}: truncated table entry")
        vid = int(np.frombuffer(data, dtype="<u4", count=1, offset=off)[0])
        kind = ResourceKind(data[off + 4])
        key = data[off + 5 : off + 21]
        entries[vid] = (kind, key)
        off += 21
    return SessionResourceTable(entries, int(generation))


def write_capture(directory, capture: FrameCapture) -> None:
    ppm, gbid, tbl = _paths(directory, capture.frame_index)
    write_ppm(ppm, capture.color)
    write_id_planes(gbid, capture.ids)
    write_table(tbl, capture.table)


def read_capture(directory, frame_index: int) -> FrameCapture:
    ppm, gbid, tbl = _paths(directory, frame_index)
    try:
        color = read_ppm(ppm)
        ids = read_id_planes(gbid)
        table = read_table(tbl)
    except FileNotFoundError as e:
        raise CorruptCapture(f"missing capture file: {e.filename}") from e
    return FrameCapture(frame_index, color, ids, table)
