"""MTS patch decomposition and the corpus index.

A patch is the set of *all* pixels of one frame whose visible surface
carries one mesh/texture/shader key triple; it is not split into
connected components (labels attach to the triple, so splitting would
only add clicks).  Pixel sets are run-length encoded over row-major
flat indices, which is canonical and cheap to diff.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .replay import FrameCapture
from .resources import ID_SENTINEL, ResourceKind, UnknownVolatileId

PATCH_MAGIC = b"GBPAT1"
PATCH_VERSION = 1


class MtsKey(NamedTuple):
    """Ordered triple of persistent keys identifying a surface."""

    mesh: bytes
    texture: bytes
    shader: bytes

    def hex(self) -> str:
        return (self.mesh + self.texture + self.shader).hex()

    @staticmethod
    def from_hex(text: str) -> "MtsKey":
        raw = bytes.fromhex(text)
        if len(raw) != 48:
            raise ValueError(f"MTS hex must encode 48 bytes, got {len(raw)}")
        return MtsKey(raw[0:16], raw[16:32], raw[32:48])

    def items(self) -> tuple[tuple[int, bytes], ...]:
        """The patch's resource items for rule mining."""
        return (
            (int(ResourceKind.MESH), self.mesh),
            (int(ResourceKind.TEXTURE), self.texture),
            (int(ResourceKind.SHADER), self.shader),
        )


def encode_runs(flat_indices: np.ndarray) -> np.ndarray:
    """Run-length encode sorted row-major flat pixel indices -> (N, 2)."""
    idx = np.asarray(flat_indices, dtype=np.int64)
    if idx.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    return np.stack([idx[starts], ends - starts + 1], axis=1)


def decode_runs(runs: np.ndarray) -> np.ndarray:
    """Inverse of encode_runs: (N, 2) -> sorted flat indices."""
    runs = np.asarray(runs, dtype=np.int64)
    if runs.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([np.arange(s, s + n) for s, n in runs])


@dataclass(eq=False)
class Patch:
    frame_index: int
    key: MtsKey
    runs: np.ndarray  # (N, 2) int64 (start, length) over row-major flat indices
    area: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Patch):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.key == other.key
            and self.area == other.area
            and np.array_equal(self.runs, other.runs)
        )


class UnresolvableId(Exception):
    def __init__(self, frame_index: int, pixel: tuple[int, int], volatile_id: int):
        self.frame_index = frame_index
        self.pixel = pixel
        self.volatile_id = volatile_id
        super().__init__(
            f"frame {frame_index}: id {volatile_id} at pixel {pixel} is not in the table"
        )


def decompose(capture: FrameCapture) -> list[Patch]:
    """Split a frame into its MTS patches.

    Sentinel pixels belong to no patch; the returned patches partition
    the non-sentinel pixel set and are sorted by key for deterministic
    iteration.
    """
    h, w, _ = capture.ids.shape
    flat = np.ascontiguousarray(capture.ids).reshape(-1, 3)
    view = flat.view([("m", "<u4"), ("t", "<u4"), ("s", "<u4")]).reshape(-1)
    uniq, inverse = np.unique(view, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    counts = np.bincount(inverse, minlength=len(uniq))
    bounds = np.concatenate(([0], np.cumsum(counts)))

    patches: list[Patch] = []
    for u in range(len(uniq)):
        m, t, s = (int(uniq[u]["m"]), int(uniq[u]["t"]), int(uniq[u]["s"]))
        pixels = order[bounds[u] : bounds[u + 1]]
        if m == ID_SENTINEL and t == ID_SENTINEL and s == ID_SENTINEL:
            continue
        first = int(pixels[0])
        try:
            key = MtsKey(
                capture.table.resolve(m),
                capture.table.resolve(t),
                capture.table.resolve(s),
            )
        except UnknownVolatileId as e:
            raise UnresolvableId(
                capture.frame_index, (first // w, first % w), e.volatile_id
            ) from None
        pixels = np.sort(pixels)
        patches.append(
            Patch(capture.frame_index, key, encode_runs(pixels), int(len(pixels)))
        )
    patches.sort(key=lambda p: p.key)
    return patches


@dataclass
class MtsIndex:
    """Corpus-wide occurrence index of patches."""

    by_mts: dict[MtsKey, list[tuple[int, int]]] = field(default_factory=dict)
    by_resource: dict[bytes, set[MtsKey]] = field(default_factory=dict)
    frame_count: int = 0

    def keys_sorted(self) -> list[MtsKey]:
        return sorted(self.by_mts)


def build_corpus_index(patches: Iterable[Patch], frame_count: int | None = None) -> MtsIndex:
    index = MtsIndex()
    frames: set[int] = set()
    for patch in patches:
        index.by_mts.setdefault(patch.key, []).append((patch.frame_index, patch.area))
        for component in patch.key:
            index.by_resource.setdefault(component, set()).add(patch.key)
        frames.add(patch.frame_index)
    for occurrences in index.by_mts.values():
        occurrences.sort()
    index.frame_count = frame_count if frame_count is not None else len(frames)
    return index


# --- persistence ------------------------------------------------------------

def write_patches(path, patches: list[Patch], width: int, height: int) -> None:
    ordered = sorted(patches, key=lambda p: (p.frame_index, p.key))
    with open(path, "wb") as f:
        f.write(PATCH_MAGIC)
        f.write(struct.pack("<HHHI", PATCH_VERSION, width, height, len(ordered)))
        for p in ordered:
            f.write(struct.pack("<I", p.frame_index))
            f.write(p.key.mesh + p.key.texture + p.key.shader)
            f.write(struct.pack("<II", p.area, len(p.runs)))
            f.write(p.runs.astype("<i8").tobytes())


def read_patches(path) -> tuple[list[Patch], int, int]:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(PATCH_MAGIC):
        raise ValueError(f"{path}: missing patch magic")
    version, width, height, count = struct.unpack_from("<HHHI", data, len(PATCH_MAGIC))
    if version != PATCH_VERSION:
        raise ValueError(f"{path}: patch table version {version}")
    off = len(PATCH_MAGIC) + struct.calcsize("<HHHI")
    patches: list[Patch] = []
    for _ in range(count):
        frame_index, = struct.unpack_from("<I", data, off)
        off += 4
        key = MtsKey(data[off : off + 16], data[off + 16 : off + 32], data[off + 32 : off + 48])
        off += 48
        area, n_runs = struct.unpack_from("<II", data, off)
        off += 8
        runs = np.frombuffer(data, dtype="<i8", count=n_runs * 2, offset=off).reshape(n_runs, 2)
        off += n_runs * 16
        patches.append(Patch(int(frame_index), key, runs.copy(), int(area)))
    return patches, int(width), int(height)


def patches_by_frame(patches: Iterable[Patch]) -> dict[int, list[Patch]]:
    out: dict[int, list[Patch]] = {}
    for p in patches:
        out.setdefault(p.frame_index, []).append(p)
    for group in out.values():
        group.sort(key=lambda p: p.key)
    return out


def dump_patches(patches: Iterable[Patch]) -> str:
    """Greppable text dump for debugging."""
    lines = []
    for p in sorted(patches, key=lambda q: (q.frame_index, q.key)):
        runs = ",".join(f"{int(s)}+{int(n)}" for s, n in p.runs)
        lines.append(f"{p.frame_index} {p.key.hex()} {p.area} {runs}")
    return "\n".join(lines) + "\n"
