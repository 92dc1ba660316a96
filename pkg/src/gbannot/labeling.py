"""Label storage, association-rule mining, and pre-annotation.

Clicks assign a class to an MTS key; the store is always exactly the
replay of its append-only click log (last write per key wins).  Rules
generalize labels to single resources or resource pairs once enough
distinct labeled keys agree, and retract when later labels contradict
them.  Pre-annotation applies explicit labels first and unique matching
rules second; patches matched by disagreeing rules stay unlabeled and
are flagged rather than guessed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .patches import MtsIndex, MtsKey, Patch
from .simulate import CLASS_SENTINEL

CLASS_UNLABELED = 0


@dataclass(frozen=True)
class ClassDef:
    id: int
    name: str
    color: tuple[int, int, int]


# 11 urban-scene classes plus the reserved unlabeled id; colors are this
# project's documented palette.
DEFAULT_CLASSES: tuple[ClassDef, ...] = (
    ClassDef(0, "Unlabeled", (0, 0, 0)),
    ClassDef(1, "Building", (70, 70, 70)),
    ClassDef(2, "Tree", (107, 142, 35)),
    ClassDef(3, "Sky", (70, 130, 180)),
    ClassDef(4, "Car", (0, 0, 142)),
    ClassDef(5, "Sign", (220, 220, 0)),
    ClassDef(6, "Road", (128, 64, 128)),
    ClassDef(7, "Pedestrian", (220, 20, 60)),
    ClassDef(8, "Fence", (190, 153, 153)),
    ClassDef(9, "Pole", (153, 153, 153)),
    ClassDef(10, "Sidewalk", (244, 35, 232)),
    ClassDef(11, "Bicyclist", (119, 11, 32)),
)


def class_by_name(name: str, classes: Iterable[ClassDef] = DEFAULT_CLASSES) -> ClassDef:
    for c in classes:
        if c.name == name:
            return c
    raise KeyError(name)


@dataclass(frozen=True)
class MiningParams:
    min_support: int = 10
    min_confidence: float = 0.995
    unlabeled_threshold: float = 0.03


class UnknownClass(Exception):
    pass


class UnknownMts(Exception):
    pass


@dataclass(frozen=True)
class AssociationRule:
    antecedent: frozenset[tuple[int, bytes]]  # 1 or 2 (kind, key) items
    consequent: int
    support: int
    confidence: float
    created_at_click: int

    def matches(self, key: MtsKey) -> bool:
        return self.antecedent <= set(key.items())

    def antecedent_sorted(self) -> tuple[tuple[int, bytes], ...]:
        return tuple(sorted(self.antecedent))


@dataclass(frozen=True)
class ClickRecord:
    seq: int
    key: MtsKey
    class_id: int
    timestamp: float = 0.0


class Provenance(enum.IntEnum):
    UNLABELED = 0
    EXPLICIT = 1
    RULE = 2


@dataclass
class LabelStore:
    """Mutable annotation state for one corpus."""

    params: MiningParams
    class_ids: frozenset[int]
    known_keys: frozenset[MtsKey]
    mts_labels: dict[MtsKey, int] = field(default_factory=dict)
    rules: list[AssociationRule] = field(default_factory=list)
    click_log: list[ClickRecord] = field(default_factory=list)
    _rules_by_item: dict[tuple[int, bytes], list[AssociationRule]] = field(
        default_factory=dict, repr=False
    )

    @staticmethod
    def for_corpus(
        index: MtsIndex,
        params: MiningParams = MiningParams(),
        classes: Iterable[ClassDef] = DEFAULT_CLASSES,
    ) -> "LabelStore":
        return LabelStore(
            params=params,
            class_ids=frozenset(c.id for c in classes),
            known_keys=frozenset(index.by_mts),
        )

    def _reindex_rules(self) -> None:
        self._rules_by_item = {}
        for rule in self.rules:
            for item in rule.antecedent:
                self._rules_by_item.setdefault(item, []).append(rule)

    def rules_matching(self, key: MtsKey) -> list[AssociationRule]:
        seen: list[AssociationRule] = []
        for item in key.items():
            for rule in self._rules_by_item.get(item, ()):
                if rule not in seen and rule.matches(key):
                    seen.append(rule)
        return seen


def apply_label(
    store: LabelStore, key: MtsKey, class_id: int, timestamp: float = 0.0
) -> ClickRecord:
    """Append one click; relabeling an already-labeled key overwrites.

    Labeling with the reserved unlabeled id is allowed as a compensating
    (undo) record and clears the key.
    """
    if class_id not in store.class_ids:
        raise UnknownClass(f"class id {class_id} is not in the palette")
    if key not in store.known_keys:
        raise UnknownMts(f"key {key.hex()} does not occur in the corpus")
    record = ClickRecord(len(store.click_log), key, class_id, timestamp)
    store.click_log.append(record)
    store.mts_labels[key] = class_id
    return record


def _labeled_keys(store: LabelStore) -> dict[MtsKey, int]:
    return {k: c for k, c in store.mts_labels.items() if c != CLASS_UNLABELED}


def _qualifying_rules(
    store: LabelStore, created_at: int
) -> dict[frozenset[tuple[int, bytes]], AssociationRule]:
    """Brute recount of every antecedent's support and majority class."""
    labeled = _labeled_keys(store)
    stats: dict[frozenset, dict[int, int]] = {}
    for key, class_id in labeled.items():
        items = key.items()
        antecedents = [frozenset((it,)) for it in items]
        antecedents += [
            frozenset((items[0], items[1])),
            frozenset((items[0], items[2])),
            frozenset((items[1], items[2])),
        ]
        for ant in antecedents:
            per = stats.setdefault(ant, {})
            per[class_id] = per.get(class_id, 0) + 1

    out: dict[frozenset, AssociationRule] = {}
    for ant, per_class in stats.items():
        support = sum(per_class.values())
        if support < store.params.min_support:
            continue
        majority = min(c for c in per_class if per_class[c] == max(per_class.values()))
        confidence = per_class[majority] / support
        if confidence >= store.params.min_confidence:
            out[ant] = AssociationRule(ant, majority, support, confidence, created_at)
    return out


def mine_rules(store: LabelStore, index: MtsIndex) -> list[AssociationRule]:
    """Refresh the rule set; returns the newly created rules.

    Existing rules keep their creation click position; rules whose
    antecedent no longer qualifies for their consequent are retracted.
    """
    position = len(store.click_log)
    qualifying = _qualifying_rules(store, position)

    kept: list[AssociationRule] = []
    for rule in store.rules:
        fresh = qualifying.get(rule.antecedent)
        if fresh is not None and fresh.consequent == rule.consequent:
            kept.append(
                AssociationRule(
                    rule.antecedent,
                    rule.consequent,
                    fresh.support,
                    fresh.confidence,
                    rule.created_at_click,
                )
            )
    existing = {r.antecedent for r in kept}
    new_rules = [
        qualifying[ant]
        for ant in sorted(qualifying, key=lambda a: tuple(sorted(a)))
        if ant not in existing
    ]
    store.rules = kept + new_rules
    store._reindex_rules()
    return new_rules


def classify_patch(store: LabelStore, key: MtsKey) -> tuple[int, Provenance, bool]:
    """Effective (class, provenance, conflictFlag) for one patch key."""
    explicit = store.mts_labels.get(key, CLASS_UNLABELED)
    if explicit != CLASS_UNLABELED:
        return explicit, Provenance.EXPLICIT, False
    matched = store.rules_matching(key)
    consequents = sorted({r.consequent for r in matched})
    if len(consequents) == 1:
        return consequents[0], Provenance.RULE, False
    if len(consequents) > 1:
        return CLASS_UNLABELED, Provenance.UNLABELED, True
    return CLASS_UNLABELED, Provenance.UNLABELED, False


def frame_coverage(patches: list[Patch], store: LabelStore) -> tuple[float, float]:
    """(covered, unlabeled) area fractions for one frame's patches.

    A frame with no patches counts as fully covered.
    """
    total = sum(p.area for p in patches)
    if total == 0:
        return 1.0, 0.0
    labeled = 0
    for p in patches:
        class_id, _, _ = classify_patch(store, p.key)
        if class_id != CLASS_UNLABELED:
            labeled += p.area
    return labeled / total, (total - labeled) / total


@dataclass
class PreAnnotation:
    frame_index: int
    label_map: np.ndarray  # (H, W) uint8 class ids, CLASS_SENTINEL background
    provenance: np.ndarray  # (H, W) uint8 Provenance values
    covered_fraction: float
    conflicted_keys: list[MtsKey]


def pre_annotate(
    patches: list[Patch], store: LabelStore, width: int, height: int,
    frame_index: int | None = None,
) -> PreAnnotation:
    """Pixel-level pre-annotation of one frame from the current store."""
    label_map = np.full(height * width, CLASS_SENTINEL, dtype=np.uint8)
    prov_map = np.zeros(height * width, dtype=np.uint8)
    labeled = 0
    total = 0
    conflicted: list[MtsKey] = []
    for patch in patches:
        class_id, provenance, conflict = classify_patch(store, patch.key)
        total += patch.area
        if conflict:
            conflicted.append(patch.key)
        value = class_id if class_id != CLASS_UNLABELED else CLASS_UNLABELED
        for start, length in patch.runs:
            label_map[start : start + length] = value
            prov_map[start : start + length] = int(provenance)
        if class_id != CLASS_UNLABELED:
            labeled += patch.area
    covered = labeled / total if total else 1.0
    if frame_index is None:
        frame_index = patches[0].frame_index if patches else -1
    return PreAnnotation(
        frame_index,
        label_map.reshape(height, width),
        prov_map.reshape(height, width),
        covered,
        conflicted,
    )


# --- label-map export -------------------------------------------------------

def export_label_map(
    patches: list[Patch], store: LabelStore, width: int, height: int
) -> np.ndarray:
    """8-bit indexed class image: CLASS_SENTINEL background, 0 unlabeled."""
    return pre_annotate(patches, store, width, height).label_map


def write_pgm(path, image: np.ndarray) -> None:
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(image.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError(f"{path}: not a P5 label map")
    w, h = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != w * h:
        raise ValueError(f"{path}: payload size mismatch")
    return pixels.reshape(h, w).copy()


def write_palette(path, classes: Iterable[ClassDef] = DEFAULT_CLASSES) -> None:
    lines = [f"{c.id} {c.name} {c.color[0]} {c.color[1]} {c.color[2]}" for c in classes]
    lines.append(f"{CLASS_SENTINEL} Background 0 0 0")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
