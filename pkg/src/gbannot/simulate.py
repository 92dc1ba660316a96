"""Procedural stand-in for the game: seeded worlds of classed billboard
objects built from shared resource pools, camera sessions over them, and
the recorded command streams plus withheld ground truth they produce.

Geometry is deliberately flat: objects are depth-layered screen-space
billboards, each object split into per-part strips, so visibility and
identity mechanics are fully exercised without 3-D projection.  Every
session assigns fresh random volatile ids to the same underlying
resource contents, which is exactly what downstream identity hashing
must undo.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .passes import PassRole
from .raster import rasterize_draws
from .resources import MAX_VOLATILE_ID, ResourceKind, hash_resource
from .stream import (
    BACKBUFFER_TARGETS,
    FP_ONE,
    GBUFFER_TARGETS,
    CommandStream,
    Create,
    Delete,
    DrawCall,
    Modify,
)

CLASS_SENTINEL = 255  # background / no geometry in oracle class images

ORACLE_MAGIC = b"GBORC1"
_PAYLOAD_WORLD = 1
_PAYLOAD_FRAMES = 2


class InfeasibleConfig(Exception):
    pass


@dataclass(frozen=True)
class WorldConfig:
    object_count: int = 150
    resource_count: int = 230
    class_ids: tuple[int, ...] = ()  # labeling palette ids; () = caller fills in
    ambiguity: float = 0.0
    backdrop_class: int | None = None  # drawn behind everything when set


@dataclass
class WorldObject:
    class_id: int
    parts: list[tuple[int, int, int]]  # (mesh, texture, shader) pool indices
    center: tuple[float, float]
    half_size: tuple[float, float]
    depth: float


@dataclass
class World:
    objects: list[WorldObject]
    resources: list[tuple[ResourceKind, bytes]]
    ambiguity: float
    seed: int
    # effect/hud resources drawn outside the main pass
    aux_resources: list[tuple[ResourceKind, bytes]] = field(default_factory=list)


def _distinct_blob(rng: np.random.Generator, index: int, size: int) -> bytes:
    # index prefix keeps contents pairwise distinct by construction
    return struct.pack("<I", index) + rng.bytes(size)


def generate_world(config: WorldConfig, seed: int) -> World:
    """Deterministic world from (config, seed).

    Resources are split per kind and assigned to classes exclusively;
    a configured ambiguity fraction of the textures is additionally
    referenced by a second class.
    """
    if config.object_count < 1 or config.resource_count < 3:
        raise InfeasibleConfig("need at least one object and three resources")
    if not 0.0 <= config.ambiguity <= 1.0:
        raise InfeasibleConfig(f"ambiguity {config.ambiguity} outside [0, 1]")
    if not config.class_ids:
        raise InfeasibleConfig("empty class palette")

    rng = np.random.default_rng(seed)

    # Textures dominate the pool so distinct triples per mesh and per
    # shader are plentiful; that is what lets sub-MTS rules generalize.
    n_mesh = max(1, round(config.resource_count * 0.2))
    n_shader = max(1, round(config.resource_count * 0.1))
    n_texture = config.resource_count - n_mesh - n_shader
    if n_texture < 1:
        raise InfeasibleConfig("resource count too small to cover all kinds")

    resources: list[tuple[ResourceKind, bytes]] = []
    for i in range(n_mesh):
        resources.append((ResourceKind.MESH, _distinct_blob(rng, len(resources), 96)))
    for i in range(n_texture):
        resources.append((ResourceKind.TEXTURE, _distinct_blob(rng, len(resources), 64)))
    for i in range(n_shader):
        resources.append((ResourceKind.SHADER, _distinct_blob(rng, len(resources), 48)))
    mesh_ids = list(range(n_mesh))
    texture_ids = list(range(n_mesh, n_mesh + n_texture))
    shader_ids = list(range(n_mesh + n_texture, len(resources)))

    # Only as many classes as have objects participate; resources are
    # partitioned across exactly those.
    palette = list(config.class_ids)
    backdrop_extra = 1 if config.backdrop_class is not None else 0
    used_count = min(len(palette), config.object_count + backdrop_extra)
    order = rng.permutation(len(palette))
    used_classes = [palette[i] for i in order[:used_count]]
    if config.backdrop_class is not None and config.backdrop_class not in used_classes:
        used_classes[-1] = config.backdrop_class
    n_classes = len(used_classes)
    if min(n_mesh, n_texture, n_shader) < n_classes:
        raise InfeasibleConfig(
            f"{n_classes} classes need at least that many resources of every kind"
        )

    def split(ids: list[int]) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {c: [] for c in used_classes}
        for i, rid in enumerate(ids):
            out[used_classes[i % n_classes]].append(rid)
        return out

    class_meshes = split(mesh_ids)
    class_textures = split(texture_ids)
    class_shaders = split(shader_ids)

    # mark shared textures and the class pair each one bridges
    n_shared = round(config.ambiguity * n_texture)
    shared: list[tuple[int, int, int]] = []  # (texture, owner class, partner class)
    if n_shared:
        object_classes = [c for c in used_classes if c != config.backdrop_class]
        if len(object_classes) < 2:
            raise InfeasibleConfig("ambiguity needs at least two non-backdrop classes")
        owners = {t: c for c, ts in class_textures.items() for t in ts}
        eligible = [t for t in texture_ids if owners[t] != config.backdrop_class]
        if len(eligible) < n_shared:
            raise InfeasibleConfig("not enough non-backdrop textures to share")
        candidates = rng.permutation(eligible)[:n_shared]
        for t in candidates:
            owner = owners[int(t)]
            others = [c for c in object_classes if c != owner]
            partner = others[int(rng.integers(len(others)))]
            shared.append((int(t), owner, partner))

    objects: list[WorldObject] = []
    depth_slots = rng.permutation(config.object_count)

    def sample_parts(class_id: int, count: int) -> list[tuple[int, int, int]]:
        out = []
        for _ in range(count):
            m = class_meshes[class_id][int(rng.integers(len(class_meshes[class_id])))]
            t = class_textures[class_id][int(rng.integers(len(class_textures[class_id])))]
            s = class_shaders[class_id][int(rng.integers(len(class_shaders[class_id])))]
            out.append((m, t, s))
        return out

    if config.backdrop_class is not None:
        objects.append(
            WorldObject(
                class_id=config.backdrop_class,
                parts=sample_parts(config.backdrop_class, 1),
                center=(0.5, 0.5),
                half_size=(2.0, 2.0),
                depth=0.9995,
            )
        )

    body_classes = [c for c in used_classes if c != config.backdrop_class] or used_classes
    for i in range(config.object_count):
        class_id = body_classes[i % len(body_classes)]
        n_parts = int(rng.integers(1, 6))
        objects.append(
            WorldObject(
                class_id=class_id,
                parts=sample_parts(class_id, n_parts),
                center=(float(rng.uniform(0.02, 0.98)), float(rng.uniform(0.02, 0.98))),
                half_size=(
                    float(rng.uniform(0.01, 0.07)),
                    float(rng.uniform(0.01, 0.07)),
                ),
                depth=0.05 + 0.9 * (float(depth_slots[i]) + 0.5) / config.object_count,
            )
        )

    # force every shared texture to be referenced from both its classes
    for t, owner, partner in shared:
        for cls in (owner, partner):
            hosts = [o for o in objects if o.class_id == cls and o.half_size[0] < 1.0]
            if not hosts:
                raise InfeasibleConfig(f"class {cls} has no object to host a shared texture")
            host = hosts[int(rng.integers(len(hosts)))]
            m = class_meshes[cls][int(rng.integers(len(class_meshes[cls])))]
            s = class_shaders[cls][int(rng.integers(len(class_shaders[cls])))]
            host.parts.append((m, t, s))

    aux = [
        (ResourceKind.MESH, _distinct_blob(rng, len(resources) + 0, 32)),
        (ResourceKind.TEXTURE, _distinct_blob(rng, len(resources) + 1, 32)),
        (ResourceKind.SHADER, _distinct_blob(rng, len(resources) + 2, 32)),
        (ResourceKind.MESH, _distinct_blob(rng, len(resources) + 3, 32)),
        (ResourceKind.TEXTURE, _distinct_blob(rng, len(resources) + 4, 32)),
        (ResourceKind.SHADER, _distinct_blob(rng, len(resources) + 5, 32)),
    ]
    return World(objects, resources, config.ambiguity, seed, aux)


def world_mts_classes(world: World) -> dict[tuple[bytes, bytes, bytes], int]:
    """Ground-truth class per full mesh/texture/shader key triple."""
    out: dict[tuple[bytes, bytes, bytes], int] = {}
    for obj in world.objects:
        for m, t, s in obj.parts:
            key = (
                hash_resource(*world.resources[m]),
                hash_resource(*world.resources[t]),
                hash_resource(*world.resources[s]),
            )
            prev = out.setdefault(key, obj.class_id)
            if prev != obj.class_id:
                raise AssertionError("full MTS triple spans two classes")
    return out


# --- camera ---------------------------------------------------------------

@dataclass(frozen=True)
class CameraPath:
    """Smooth pan/zoom loop: pose(step) -> (cx, cy, half_width)."""

    steps: int
    fx: float = 1.0
    fy: float = 2.0
    fz: float = 3.0
    px: float = 0.0
    py: float = 0.7
    pz: float = 0.3
    zoom_base: float = 0.17
    zoom_amp: float = 0.10

    @staticmethod
    def generate(seed: int, steps: int) -> "CameraPath":
        rng = np.random.default_rng(seed)
        return CameraPath(
            steps=steps,
            fx=float(rng.uniform(0.8, 1.4)),
            fy=float(rng.uniform(1.6, 2.4)),
            fz=float(rng.uniform(2.5, 3.5)),
            px=float(rng.uniform(0, 1)),
            py=float(rng.uniform(0, 1)),
            pz=float(rng.uniform(0, 1)),
        )

    def pose(self, step: int) -> tuple[float, float, float]:
        t = step / self.steps
        cx = 0.5 + 0.3 * math.sin(2 * math.pi * (self.fx * t + self.px))
        cy = 0.5 + 0.3 * math.sin(2 * math.pi * (self.fy * t + self.py))
        hw = self.zoom_base + self.zoom_amp * math.sin(2 * math.pi * (self.fz * t + self.pz))
        return cx, cy, hw


@dataclass
class OracleFrame:
    """Withheld ground truth for one recorded frame."""

    frame_index: int
    class_image: np.ndarray  # (H, W) uint8, CLASS_SENTINEL where empty
    pass_tags: list[PassRole]  # ground-truth role per draw


# --- session simulation ----------------------------------------------------

def _assign_volatile_ids(rng: np.random.Generator, count: int) -> list[int]:
    ids: set[int] = set()
    out: list[int] = []
    while len(out) < count:
        vid = int(rng.integers(0, MAX_VOLATILE_ID))
        if vid not in ids:
            ids.add(vid)
            out.append(vid)
    return out


def _part_quad(
    obj: WorldObject, part_index: int, pose: tuple[float, float, float],
    width: int, height: int,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Screen-space strip for one object part, or None when off-screen."""
    cx, cy, hw = pose
    hh = hw * height / width
    n = len(obj.parts)
    x0 = obj.center[0] - obj.half_size[0]
    x1 = obj.center[0] + obj.half_size[0]
    band = 2 * obj.half_size[1] / n
    y0 = obj.center[1] - obj.half_size[1] + part_index * band
    y1 = y0 + band

    def to_screen(wx: float, wy: float) -> tuple[int, int]:
        sx = (wx - (cx - hw)) / (2 * hw) * width
        sy = (wy - (cy - hh)) / (2 * hh) * height
        return round(sx * FP_ONE), round(sy * FP_ONE)

    ax, ay = to_screen(x0, y0)
    bx, by = to_screen(x1, y1)
    if bx <= 0 or by <= 0 or ax >= width * FP_ONE or ay >= height * FP_ONE:
        return None
    if bx - ax < FP_ONE // 2 or by - ay < FP_ONE // 2:
        return None  # sub-half-pixel strip: the game would cull it
    verts = np.array(
        [
            [[ax, ay], [bx, ay], [ax, by]],
            [[bx, ay], [bx, by], [ax, by]],
        ],
        dtype=np.int32,
    )
    depths = np.full((2, 3), obj.depth, dtype=np.float32)
    return verts, depths


def _full_rect(x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
    return np.array(
        [
            [[x0, y0], [x1, y0], [x0, y1]],
            [[x1, y0], [x1, y1], [x0, y1]],
        ],
        dtype=np.int32,
    )


def simulate_session(
    world: World,
    camera_path: CameraPath,
    frame_stride: int,
    session_seed: int,
    width: int = 320,
    height: int = 180,
    frame_index_base: int = 0,
) -> tuple[list[CommandStream], list[OracleFrame]]:
    """Author the recorded streams and oracle frames for one session.

    Every ``frame_stride``-th step of the camera path is recorded.
    Volatile ids are freshly randomized from ``session_seed``; event
    preambles are incremental (a resource is created when first
    referenced), with periodic scratch-resource churn to exercise
    modification and deletion.
    """
    if frame_stride < 1:
        raise ValueError("frame stride must be >= 1")
    rng = np.random.default_rng(session_seed)
    n_recorded = len(range(0, camera_path.steps, frame_stride))
    n_pool = len(world.resources) + len(world.aux_resources)
    vids = _assign_volatile_ids(rng, n_pool + n_recorded)
    resource_vid = vids[: len(world.resources)]
    aux_vid = vids[len(world.resources) : n_pool]
    scratch_vid = vids[n_pool:]

    all_resources = world.resources + world.aux_resources
    vid_of = {i: v for i, v in enumerate(resource_vid)}

    streams: list[CommandStream] = []
    oracles: list[OracleFrame] = []
    created: set[int] = set()

    post_mesh, post_texture, post_shader = aux_vid[0], aux_vid[1], aux_vid[2]
    hud_mesh, hud_texture, hud_shader = aux_vid[3], aux_vid[4], aux_vid[5]

    for rec, step in enumerate(range(0, camera_path.steps, frame_stride)):
        pose = camera_path.pose(step)
        draws: list[DrawCall] = []
        tags: list[PassRole] = []
        draw_class: list[int] = []
        referenced: list[int] = []

        for obj in world.objects:
            for pi, (m, t, s) in enumerate(obj.parts):
                quad = _part_quad(obj, pi, pose, width, height)
                if quad is None:
                    continue
                verts, depths = quad
                albedo_seed = hash_resource(*world.resources[t])
                albedo = np.tile(np.frombuffer(albedo_seed[:3], np.uint8), (2, 1))
                draws.append(
                    DrawCall(
                        vid_of[m], vid_of[t], vid_of[s],
                        GBUFFER_TARGETS, False, verts, depths, albedo,
                    )
                )
                tags.append(PassRole.MAIN_GEOMETRY)
                draw_class.append(obj.class_id)
                referenced.extend((m, t, s))

        main_draw_count = len(draws)

        # full-screen distortion over the scene, then a HUD band on top
        post_quad = _full_rect(0, 0, width * FP_ONE, height * FP_ONE)
        draws.append(
            DrawCall(
                post_mesh, post_texture, post_shader, BACKBUFFER_TARGETS, True,
                post_quad, np.full((2, 3), 0.5, np.float32),
                np.full((2, 3), 200, np.uint8),
            )
        )
        tags.append(PassRole.POST_PROCESS)
        hud_quad = _full_rect(0, 0, width * FP_ONE, (height // 8) * FP_ONE)
        draws.append(
            DrawCall(
                hud_mesh, hud_texture, hud_shader, BACKBUFFER_TARGETS, False,
                hud_quad, np.full((2, 3), 0.0, np.float32),
                np.full((2, 3), 30, np.uint8),
            )
        )
        tags.append(PassRole.HUD)

        events = []
        new_pool_ids = [i for i in dict.fromkeys(referenced) if vid_of[i] not in created]
        order = rng.permutation(len(new_pool_ids))
        for j in order:
            pool_id = new_pool_ids[int(j)]
            kind, content = all_resources[pool_id]
            events.append(Create(vid_of[pool_id], kind, content))
            created.add(vid_of[pool_id])
        if rec == 0:
            for k, vid in enumerate(aux_vid):
                kind, content = world.aux_resources[k]
                events.append(Create(vid, kind, content))
                created.add(vid)
        if rec % 7 == 3:
            # transient scratch texture: create, modify, delete
            scratch = scratch_vid[rec]
            events.append(Create(scratch, ResourceKind.TEXTURE, rng.bytes(24)))
            events.append(Modify(scratch, rng.bytes(24)))
            events.append(Delete(scratch))

        stream = CommandStream(frame_index_base + rec, width, height, events, draws)
        streams.append(stream)

        winner, _, tri_to_draw = rasterize_draws(draws[:main_draw_count], width, height)
        class_image = np.full((height, width), CLASS_SENTINEL, dtype=np.uint8)
        covered = winner >= 0
        if covered.any():
            classes = np.array(draw_class, dtype=np.uint8)
            class_image[covered] = classes[tri_to_draw[winner[covered]]]
        oracles.append(OracleFrame(frame_index_base + rec, class_image, tags))

    return streams, oracles


# --- oracle / world sidecars ------------------------------------------------

def write_world(path, world: World) -> None:
    with open(path, "wb") as f:
        f.write(ORACLE_MAGIC)
        f.write(struct.pack("<BQd", _PAYLOAD_WORLD, world.seed, world.ambiguity))
        f.write(struct.pack("<I", len(world.resources)))
        for kind, content in world.resources:
            f.write(struct.pack("<BI", int(kind), len(content)))
            f.write(content)
        f.write(struct.pack("<I", len(world.aux_resources)))
        for kind, content in world.aux_resources:
            f.write(struct.pack("<BI", int(kind), len(content)))
            f.write(content)
        f.write(struct.pack("<I", len(world.objects)))
        for obj in world.objects:
            f.write(
                struct.pack(
                    "<BIddddd",
                    obj.class_id,
                    len(obj.parts),
                    obj.center[0],
                    obj.center[1],
                    obj.half_size[0],
                    obj.half_size[1],
                    obj.depth,
                )
            )
            for part in obj.parts:
                f.write(struct.pack("<III", *part))


def read_world(path) -> World:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(ORACLE_MAGIC):
        raise ValueError(f"{path}: missing oracle magic")
    off = len(ORACLE_MAGIC)
    payload, seed, ambiguity = struct.unpack_from("<BQd", data, off)
    if payload != _PAYLOAD_WORLD:
        raise ValueError(f"{path}: not a world sidecar")
    off += struct.calcsize("<BQd")

    def read_blobs(off: int) -> tuple[list[tuple[ResourceKind, bytes]], int]:
        count, = struct.unpack_from("<I", data, off)
        off += 4
        blobs = []
        for _ in range(count):
            kind, length = struct.unpack_from("<BI", data, off)
            off += 5
            blobs.append((ResourceKind(kind), data[off : off + length]))
            off += length
        return blobs, off

    resources, off = read_blobs(off)
    aux, off = read_blobs(off)
    n_objects, = struct.unpack_from("<I", data, off)
    off += 4
    objects = []
    for _ in range(n_objects):
        class_id, n_parts, cx, cy, hx, hy, depth = struct.unpack_from("<BIddddd", data, off)
        off += struct.calcsize("<BIddddd")
        parts = []
        for _ in range(n_parts):
            parts.append(struct.unpack_from("<III", data, off))
            off += 12
        objects.append(WorldObject(class_id, parts, (cx, cy), (hx, hy), depth))
    return World(objects, resources, ambiguity, seed, aux)


def write_oracle_frames(path, frames: list[OracleFrame]) -> None:
    with open(path, "wb") as f:
        f.write(ORACLE_MAGIC)
        f.write(struct.pack("<BI", _PAYLOAD_FRAMES, len(frames)))
        for fr in frames:
            h, w = fr.class_image.shape
            f.write(struct.pack("<IHH", fr.frame_index, w, h))
            f.write(fr.class_image.tobytes())
            f.write(struct.pack("<I", len(fr.pass_tags)))
            f.write(bytes(int(t) for t in fr.pass_tags))


def read_oracle_frames(path) -> list[OracleFrame]:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(ORACLE_MAGIC):
        raise ValueError(f"{path}: missing oracle magic")
    off = len(ORACLE_MAGIC)
    payload, count = struct.unpack_from("<BI", data, off)
    if payload != _PAYLOAD_FRAMES:
        raise ValueError(f"{path}: not an oracle-frame sidecar")
    off += struct.calcsize("<BI")
    frames = []
    for _ in range(count):
        frame_index, w, h = struct.unpack_from("<IHH", data, off)
        off += 8
        img = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off).reshape(h, w)
        off += w * h
        n_tags, = struct.unpack_from("<I", data, off)
        off += 4
        tags = [PassRole(b) for b in data[off : off + n_tags]]
        off += n_tags
        frames.append(OracleFrame(frame_index, img.copy(), tags))
    return frames
