"""Frame scheduling, the scripted annotator, and run replay.

The scheduler walks the corpus in sequence order and presents a frame
only when more than ``unlabeled_threshold`` of its patch area is still
unlabeled at the moment it is reached; frames at or below the threshold
are skipped for good (coverage never shrinks while labels only
accumulate).  Every visit, presented or skipped, is recorded with the
pre-annotated fraction at that moment: the raw material of the
pre-annotation curve.

The append-only run log has three line-atomic record types so a crash
at any point replays to a consistent state:

    v <clicks-so-far> <frame> <covered-fraction> <p|s>   visit
    c <click-seq> <mts-hex> <class-id> <timestamp>       click
    m <clicks-so-far>                                    mining pass
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .labeling import (
    CLASS_UNLABELED,
    ClickRecord,
    LabelStore,
    MiningParams,
    apply_label,
    classify_patch,
    frame_coverage,
    mine_rules,
)
from .patches import MtsIndex, MtsKey, Patch


@dataclass(frozen=True)
class Visit:
    frame_index: int
    covered_fraction: float
    presented: bool


@dataclass
class SchedulerState:
    frame_order: list[int]
    cursor: int = 0
    visits: list[Visit] = field(default_factory=list)


def next_frame(
    state: SchedulerState,
    patches_by_frame: dict[int, list[Patch]],
    store: LabelStore,
) -> int | None:
    """Advance to the next frame needing the annotator; None when done."""
    while state.cursor < len(state.frame_order):
        frame = state.frame_order[state.cursor]
        state.cursor += 1
        covered, unlabeled = frame_coverage(patches_by_frame.get(frame, []), store)
        presented = unlabeled > store.params.unlabeled_threshold
        state.visits.append(Visit(frame, covered, presented))
        if presented:
            return frame
    return None


def clicking_order(patches: list[Patch], store: LabelStore) -> list[Patch]:
    """Unlabeled patches in the order the annotator clicks them:
    biggest first, key as tie-break."""
    pending = [p for p in patches if classify_patch(store, p.key)[0] == CLASS_UNLABELED]
    pending.sort(key=lambda p: (-p.area, p.key))
    return pending


def patch_oracle_class(patch: Patch, class_image: np.ndarray) -> int:
    """Majority ground-truth class over the patch's pixels (lowest id
    wins ties) - what a human recognizing the object would click."""
    flat = class_image.reshape(-1)
    votes: dict[int, int] = {}
    for start, length in patch.runs:
        values, counts = np.unique(flat[start : start + length], return_counts=True)
        for v, c in zip(values, counts):
            votes[int(v)] = votes.get(int(v), 0) + int(c)
    best = max(votes.values())
    return min(v for v, c in votes.items() if c == best)


@dataclass
class AnnotationRun:
    store: LabelStore
    visits: list[Visit]
    presented_frames: list[int]

    @property
    def click_count(self) -> int:
        return len(self.store.click_log)


class RunLogWriter:
    """Streams run records to an append-only file, one flushed line per
    record, so acknowledged records survive a crash."""

    def __init__(self, path, append: bool = False):
        self.f = open(path, "a" if append else "w")

    def visit(self, clicks_so_far: int, visit: Visit) -> None:
        self._line(
            f"v {clicks_so_far} {visit.frame_index} "
            f"{visit.covered_fraction!r} {'p' if visit.presented else 's'}"
        )

    def click(self, record: ClickRecord, compensating: bool = False) -> None:
        kind = "u" if compensating else "c"
        self._line(f"{kind} {record.seq} {record.key.hex()} {record.class_id} {record.timestamp!r}")

    def mine(self, clicks_so_far: int) -> None:
        self._line(f"m {clicks_so_far}")

    def close(self) -> None:
        self.f.close()

    def _line(self, text: str) -> None:
        self.f.write(text + "\n")
        self.f.flush()
        os.fsync(self.f.fileno())


def simulate_annotator(
    patches_by_frame: dict[int, list[Patch]],
    oracle_images: dict[int, np.ndarray],
    index: MtsIndex,
    params: MiningParams = MiningParams(),
    log_path=None,
) -> AnnotationRun:
    """Scripted stand-in for the human annotator.

    Walks the scheduler; on each presented frame labels every unlabeled
    patch with its oracle-majority class, then runs a mining pass.
    """
    store = LabelStore.for_corpus(index, params)
    state = SchedulerState(sorted(patches_by_frame))
    presented: list[int] = []
    log = RunLogWriter(log_path) if log_path is not None else None
    logged = 0

    def flush_visits() -> None:
        nonlocal logged
        if log is not None:
            for visit in state.visits[logged:]:
                log.visit(len(store.click_log), visit)
        logged = len(state.visits)

    while (frame := next_frame(state, patches_by_frame, store)) is not None:
        flush_visits()
        presented.append(frame)
        for patch in clicking_order(patches_by_frame[frame], store):
            record = apply_label(store, patch.key, patch_oracle_class(patch, oracle_images[frame]))
            if log is not None:
                log.click(record)
        mine_rules(store, index)
        if log is not None:
            log.mine(len(store.click_log))
    flush_visits()
    if log is not None:
        log.close()
    return AnnotationRun(store, state.visits, presented)


# --- log replay -------------------------------------------------------------

class ReplayMismatch(Exception):
    pass


def parse_run_log(text: str):
    """Yield (kind, payload) tuples; ignores a trailing partial line."""
    for lineno, line in enumerate(text.splitlines()):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "v" and len(parts) == 5:
                yield "v", (int(parts[1]), int(parts[2]), float(parts[3]), parts[4] == "p")
            elif parts[0] in ("c", "u") and len(parts) == 5:
                yield parts[0], (
                    int(parts[1]), MtsKey.from_hex(parts[2]), int(parts[3]), float(parts[4])
                )
            elif parts[0] == "m" and len(parts) == 2:
                yield "m", (int(parts[1]),)
            else:
                raise ValueError(line)
        except ValueError as e:
            raise ReplayMismatch(f"line {lineno}: malformed record {line!r}") from e


def replay_run(
    log_text: str,
    patches_by_frame: dict[int, list[Patch]],
    index: MtsIndex,
    params: MiningParams = MiningParams(),
    strict: bool = True,
) -> AnnotationRun:
    """Rebuild the annotation state by replaying a run log.

    With ``strict`` set, every visit's recorded coverage must equal the
    recomputed coverage at that point and the presented/skipped flag
    must agree with the threshold rule.
    """
    store = LabelStore.for_corpus(index, params)
    visits: list[Visit] = []
    for kind, payload in parse_run_log(log_text):
        if kind == "v":
            clicks_so_far, frame, fraction, presented = payload
            covered, unlabeled = frame_coverage(patches_by_frame.get(frame, []), store)
            if strict:
                if clicks_so_far != len(store.click_log):
                    raise ReplayMismatch(
                        f"visit of frame {frame} at click {clicks_so_far}, "
                        f"replay has {len(store.click_log)}"
                    )
                if covered != fraction:
                    raise ReplayMismatch(
                        f"frame {frame}: logged coverage {fraction!r}, replayed {covered!r}"
                    )
                if presented != (unlabeled > store.params.unlabeled_threshold):
                    raise ReplayMismatch(f"frame {frame}: presentation flag contradicts threshold")
            visits.append(Visit(frame, covered, presented))
        elif kind in ("c", "u"):
            seq, key, class_id, timestamp = payload
            if strict and seq != len(store.click_log):
                raise ReplayMismatch(f"click seq {seq} out of order")
            apply_label(store, key, class_id, timestamp)
        elif kind == "m":
            mine_rules(store, index)
    return AnnotationRun(store, visits, [v.frame_index for v in visits if v.presented])
