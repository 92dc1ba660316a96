"""Independent reference implementations used as test oracles.

Everything in this module is deliberately written from scratch, without
importing the corresponding production code paths, so that agreement
between the two sides is meaningful.  Keep it slow and obvious.
"""

from __future__ import annotations

import struct

M64 = (1 << 64) - 1


def _rot(x, r):
    x &= M64
    return ((x << r) & M64) | (x >> (64 - r))


def _mix(k):
    k ^= k >> 33
    k = (k * 0xFF51AFD7ED558CCD) & M64
    k ^= k >> 33
    k = (k * 0xC4CEB9FE1A85EC53) & M64
    k ^= k >> 33
    return k


def murmur128_reference(key: bytes, seed: int = 0) -> bytes:
    """MurmurHash3_x64_128, transcribed step for step from the canonical
    C++ source (block loop, explicit fall-through tail switch)."""
    c1 = 0x87C37B91114253D5
    c2 = 0x4CF5AD432745937F
    h1 = h2 = seed & M64
    n = len(key) // 16

    for i in range(n):
        k1, k2 = struct.unpack_from("<QQ", key, i * 16)
        k1 = _rot((k1 * c1) & M64, 31)
        k1 = (k1 * c2) & M64
        h1 ^= k1
        h1 = _rot(h1, 27)
        h1 = (h1 + h2) & M64
        h1 = (h1 * 5 + 0x52DCE729) & M64
        k2 = _rot((k2 * c2) & M64, 33)
        k2 = (k2 * c1) & M64
        h2 ^= k2
        h2 = _rot(h2, 31)
        h2 = (h2 + h1) & M64
        h2 = (h2 * 5 + 0x38495AB5) & M64

    tail = key[n * 16 :]
    k1 = k2 = 0
    # mirrors the C++ switch with fall-through, cases 15 down to 1
    for b in range(len(tail) - 1, 7, -1):
        k2 |= tail[b] << ((b - 8) * 8)
    for b in range(min(len(tail), 8) - 1, -1, -1):
        k1 |= tail[b] << (b * 8)
    if len(tail) > 8:
        k2 = _rot((k2 * c2) & M64, 33)
        k2 = (k2 * c1) & M64
        h2 ^= k2
    if len(tail) > 0:
        k1 = _rot((k1 * c1) & M64, 31)
        k1 = (k1 * c2) & M64
        h1 ^= k1

    h1 ^= len(key)
    h2 ^= len(key)
    h1 = (h1 + h2) & M64
    h2 = (h2 + h1) & M64
    h1 = _mix(h1)
    h2 = _mix(h2)
    h1 = (h1 + h2) & M64
    h2 = (h2 + h1) & M64
    return struct.pack("<QQ", h1, h2)


def murmur128_smhasher_verification() -> int:
    """The smhasher VerificationTest value for a 128-bit hash function.

    Hashes the keys 0..i-1 (i = 0..255) with seed 256-i, concatenates the
    digests, hashes that with seed 0, and returns the first four bytes as
    a little-endian integer.  The canonical MurmurHash3_x64_128 value is
    0x6384BA69.
    """
    digests = b"".join(
        murmur128_reference(bytes(range(i)), 256 - i) for i in range(256)
    )
    return struct.unpack_from("<I", murmur128_reference(digests, 0))[0]


# --- brute-force rasterizer -------------------------------------------------
#
# Same stated fill convention as the engine (24.8 fixed point, pixel
# centers at +128, top-left rule, positive-area normalization, depth
# interpolated as (w12*z0 + w20*z1 + w01*z2)/area2 in float64, later
# triangle wins depth ties), evaluated for every pixel of the frame with
# no bounding box or coverage shortcuts.

import numpy as np


def rasterize_reference(verts_fp, depths, width: int, height: int):
    """Full-frame per-pixel point-in-triangle + depth test."""
    winner = np.full((height, width), -1, dtype=np.int64)
    zbuf = np.full((height, width), np.inf, dtype=np.float64)
    px = (np.arange(width, dtype=np.int64) * 256 + 128)[None, :]
    py = (np.arange(height, dtype=np.int64) * 256 + 128)[:, None]

    for t in range(len(verts_fp)):
        (x0, y0), (x1, y1), (x2, y2) = (
            (int(verts_fp[t][i][0]), int(verts_fp[t][i][1])) for i in range(3)
        )
        z0, z1, z2 = (float(depths[t][i]) for i in range(3))
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0:
            continue
        if area2 < 0:
            x1, y1, x2, y2 = x2, y2, x1, y1
            z1, z2 = z2, z1
            area2 = -area2

        def edge(ax, ay, bx, by):
            w = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            top_left = (ay == by and bx > ax) or (by < ay)
            return w, (w >= 0 if top_left else w > 0)

        w01, in01 = edge(x0, y0, x1, y1)
        w12, in12 = edge(x1, y1, x2, y2)
        w20, in20 = edge(x2, y2, x0, y0)
        inside = in01 & in12 & in20
        z = (
            w12.astype(np.float64) * z0
            + w20.astype(np.float64) * z1
            + w01.astype(np.float64) * z2
        ) / float(area2)
        take = inside & (z <= zbuf)
        zbuf[take] = z[take]
        winner[take] = t
    return winner, zbuf


def rasterize_reference_scalar(tris, width: int, height: int):
    """Pure-scalar variant for tiny cases (tris: [((v0,v1,v2), (z0,z1,z2))])."""
    winner = [[-1] * width for _ in range(height)]
    zbuf = [[float("inf")] * width for _ in range(height)]
    for t, (vs, zs) in enumerate(tris):
        (x0, y0), (x1, y1), (x2, y2) = vs
        z0, z1, z2 = zs
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0:
            continue
        if area2 < 0:
            x1, y1, x2, y2 = x2, y2, x1, y1
            z1, z2 = z2, z1
            area2 = -area2
        for pyi in range(height):
            for pxi in range(width):
                cx, cy = pxi * 256 + 128, pyi * 256 + 128
                covered = True
                weights = []
                for (ax, ay, bx, by) in (
                    (x0, y0, x1, y1),
                    (x1, y1, x2, y2),
                    (x2, y2, x0, y0),
                ):
                    w = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
                    top_left = (ay == by and bx > ax) or (by < ay)
                    if not (w >= 0 if top_left else w > 0):
                        covered = False
                        break
                    weights.append(w)
                if not covered:
                    continue
                w01, w12, w20 = weights
                z = (float(w12) * z0 + float(w20) * z1 + float(w01) * z2) / float(area2)
                if z <= zbuf[pyi][pxi]:
                    zbuf[pyi][pxi] = z
                    winner[pyi][pxi] = t
    return winner, zbuf


# --- brute-force patch grouping ----------------------------------------------

def group_pixels_reference(ids, table_entries):
    """Per-pixel hash-map scan: resolved key triple -> sorted flat pixels.

    ``table_entries``: volatile id -> (kind, persistent key).
    """
    h, w, _ = ids.shape
    groups = {}
    sentinel = 0xFFFFFFFF
    for y in range(h):
        for x in range(w):
            m, t, s = (int(v) for v in ids[y, x])
            if m == sentinel and t == sentinel and s == sentinel:
                continue
            key = (table_entries[m][1], table_entries[t][1], table_entries[s][1])
            groups.setdefault(key, []).append(y * w + x)
    return groups


# --- brute-force rule statistics ----------------------------------------------

def rule_stats_reference(labels, antecedent):
    """(support, majority class, confidence) for one antecedent over
    labeled full-key triples.

    ``labels``: {(mesh, texture, shader) key triple: class}, unlabeled
    entries excluded; ``antecedent``: set of (kind, key) with kinds
    mesh=1 texture=2 shader=3.
    """
    matching = []
    for (m, t, s), cls in labels.items():
        items = {(1, m), (2, t), (3, s)}
        if set(antecedent) <= items:
            matching.append(cls)
    if not matching:
        return 0, None, 0.0
    counts = {}
    for cls in matching:
        counts[cls] = counts.get(cls, 0) + 1
    best = max(counts.values())
    majority = min(c for c, n in counts.items() if n == best)
    return len(matching), majority, counts[majority] / len(matching)


# --- brute-force scheduler / annotator -----------------------------------------

def annotator_reference(frame_areas, oracle_patch_class, threshold, min_support, min_confidence):
    """Re-simulation of the scripted annotation run at patch granularity.

    ``frame_areas``: {frame: [(key triple, area)]} in deterministic order;
    ``oracle_patch_class``: {key triple: class}.  Returns (presented
    frames, visit fractions, clicks, final effective labels).
    """
    explicit = {}
    rules = {}  # antecedent -> class

    def effective(key):
        if key in explicit:
            return explicit[key]
        m, t, s = key
        items = [(1, m), (2, t), (3, s)]
        ants = [frozenset([i]) for i in items] + [
            frozenset([items[0], items[1]]),
            frozenset([items[0], items[2]]),
            frozenset([items[1], items[2]]),
        ]
        hits = {rules[a] for a in ants if a in rules}
        if len(hits) == 1:
            return next(iter(hits))
        return 0

    def remine():
        rules.clear()
        stats = {}
        for key, cls in explicit.items():
            m, t, s = key
            items = [(1, m), (2, t), (3, s)]
            for a in [frozenset([i]) for i in items] + [
                frozenset([items[0], items[1]]),
                frozenset([items[0], items[2]]),
                frozenset([items[1], items[2]]),
            ]:
                stats.setdefault(a, {}).setdefault(cls, 0)
                stats[a][cls] += 1
        for a, per in stats.items():
            support = sum(per.values())
            if support < min_support:
                continue
            best = max(per.values())
            majority = min(c for c, n in per.items() if n == best)
            if per[majority] / support >= min_confidence:
                rules[a] = majority

    presented = []
    visits = []
    clicks = []
    for frame in sorted(frame_areas):
        patches = frame_areas[frame]
        total = sum(a for _, a in patches)
        labeled = sum(a for k, a in patches if effective(k) != 0)
        covered = labeled / total if total else 1.0
        unlabeled = (total - labeled) / total if total else 0.0
        present = unlabeled > threshold
        visits.append((frame, covered, present))
        if not present:
            continue
        presented.append(frame)
        pending = [(k, a) for k, a in patches if effective(k) == 0]
        pending.sort(key=lambda ka: (-ka[1], ka[0]))
        for key, _ in pending:
            explicit[key] = oracle_patch_class[key]
            clicks.append(key)
        remine()
    return presented, visits, clicks, explicit, rules
