"""Local HTTP service exposing frames, patches, pre-annotations and
label submission to the browser UI and to scripted clients.

All mutation goes through one writer lock and is appended to the run
log before the response is sent, so an acknowledged label survives a
crash: restarting the service replays the log back to the identical
state.  Undo appends a compensating relabel record (tagged ``u`` in the
log) rather than rewriting history.
"""

from __future__ import annotations

import io
import json
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image

from .annotator import RunLogWriter, SchedulerState, Visit, next_frame, parse_run_log
from .labeling import (
    CLASS_UNLABELED,
    ClassDef,
    DEFAULT_CLASSES,
    LabelStore,
    MiningParams,
    Provenance,
    UnknownClass,
    UnknownMts,
    apply_label,
    classify_patch,
    frame_coverage,
    mine_rules,
    pre_annotate,
)
from .patches import MtsKey, build_corpus_index, patches_by_frame, read_patches
from .replay import read_capture
from .analytics import density_report, mts_distribution_report


class CorpusMissing(Exception):
    pass


_PROVENANCE_NAMES = {
    Provenance.UNLABELED: "none",
    Provenance.EXPLICIT: "explicit",
    Provenance.RULE: "rule",
}


class AnnotationSession:
    """Corpus state plus the live label store behind the HTTP API."""

    def __init__(
        self,
        run_dir,
        params: MiningParams = MiningParams(),
        classes: tuple[ClassDef, ...] = DEFAULT_CLASSES,
    ):
        self.run_dir = Path(run_dir)
        patch_file = self.run_dir / "patches" / "patches.gbpat"
        if not patch_file.exists():
            raise CorpusMissing(f"no patch table at {patch_file}; run `process` first")
        self.frames_dir = self.run_dir / "frames"
        all_patches, self.width, self.height = read_patches(patch_file)
        self.patches = patches_by_frame(all_patches)
        self.index = build_corpus_index(all_patches, frame_count=len(self.patches))
        self.classes = classes
        self.params = params

        labels_dir = self.run_dir / "labels"
        labels_dir.mkdir(exist_ok=True)
        self.log_path = labels_dir / "clicklog.txt"

        self.lock = threading.Lock()
        self.store = LabelStore.for_corpus(self.index, params, classes)
        self.state = SchedulerState(sorted(self.patches))
        self.undo_stack: list[int] = []
        self.current: int | None = None
        if self.log_path.exists():
            self._replay_existing()
        self.log = RunLogWriter(self.log_path, append=True)

    def _replay_existing(self) -> None:
        last_presented: int | None = None
        for kind, payload in parse_run_log(self.log_path.read_text()):
            if kind in ("c", "u"):
                seq, key, class_id, timestamp = payload
                apply_label(self.store, key, class_id, timestamp)
                if kind == "c":
                    self.undo_stack.append(seq)
                elif self.undo_stack:
                    self.undo_stack.pop()
            elif kind == "m":
                mine_rules(self.store, self.index)
            elif kind == "v":
                _, frame, fraction, presented = payload
                self.state.visits.append(Visit(frame, fraction, presented))
                self.state.cursor += 1
                if presented:
                    last_presented = frame
        if last_presented is not None:
            _, unlabeled = frame_coverage(self.patches.get(last_presented, []), self.store)
            if unlabeled > 0:
                self.current = last_presented

    # -- operations (caller holds the lock) --

    def next_descriptor(self) -> dict:
        if self.current is not None:
            covered, unlabeled = frame_coverage(self.patches[self.current], self.store)
            if unlabeled > 0:
                return self._frame_descriptor(self.current, covered)
            self.current = None
        before = len(self.state.visits)
        frame = next_frame(self.state, self.patches, self.store)
        for visit in self.state.visits[before:]:
            self.log.visit(len(self.store.click_log), visit)
        if frame is None:
            return {"done": True}
        self.current = frame
        return self._frame_descriptor(frame, self.state.visits[-1].covered_fraction)

    def _frame_descriptor(self, frame: int, covered: float) -> dict:
        return {
            "done": False,
            "frame": frame,
            "coveredFraction": covered,
            "width": self.width,
            "height": self.height,
        }

    def submit_label(self, mts_hex: str, class_id: int, compensating: bool = False) -> dict:
        key = MtsKey.from_hex(mts_hex)
        record = apply_label(self.store, key, class_id)
        self.log.click(record, compensating=compensating)
        if not compensating:
            self.undo_stack.append(record.seq)
        new_rules = mine_rules(self.store, self.index)
        self.log.mine(len(self.store.click_log))
        covered = None
        complete = None
        if self.current is not None:
            covered, unlabeled = frame_coverage(self.patches[self.current], self.store)
            complete = unlabeled == 0.0
        return {
            "coveredFraction": covered,
            "frameComplete": complete,
            "newRules": len(new_rules),
        }

    def undo(self) -> dict | None:
        if not self.undo_stack:
            return None
        seq = self.undo_stack.pop()
        target = self.store.click_log[seq]
        previous = CLASS_UNLABELED
        for record in self.store.click_log[:seq]:
            if record.key == target.key:
                previous = record.class_id
        result = self.submit_label(target.key.hex(), previous, compensating=True)
        result.update({"undone": seq, "mts": target.key.hex(), "restoredClassId": previous})
        return result

    def frame_patches_payload(self, frame: int) -> dict:
        entries = []
        for patch in self.patches.get(frame, []):
            class_id, provenance, conflict = classify_patch(self.store, patch.key)
            entries.append(
                {
                    "mts": patch.key.hex(),
                    "runs": [[int(s), int(n)] for s, n in patch.runs],
                    "area": patch.area,
                    "classId": class_id,
                    "provenance": _PROVENANCE_NAMES[provenance],
                    "conflict": conflict,
                }
            )
        return {
            "frame": frame,
            "width": self.width,
            "height": self.height,
            "patches": entries,
        }

    def frame_png(self, frame: int) -> bytes:
        capture = read_capture(self.frames_dir, frame)
        buf = io.BytesIO()
        Image.fromarray(capture.color).save(buf, "PNG")
        return buf.getvalue()

    def classes_payload(self) -> dict:
        return {
            "classes": [
                {"id": c.id, "name": c.name, "color": list(c.color)} for c in self.classes
            ]
        }

    def stats_payload(self) -> dict:
        report = density_report(
            self.patches, self.store, self.state.visits, self.width, self.height
        )
        dist = mts_distribution_report(self.index)
        return {
            "totalPixels": report.total_pixels,
            "nonSentinelPixels": report.non_sentinel_pixels,
            "annotationDensity": report.annotation_density,
            "perClassPixels": {str(k): v for k, v in report.per_class_pixels.items()},
            "mtsCoveredFraction": report.mts_covered_fraction,
            "ruleCoveredFraction": report.rule_covered_fraction,
            "ruleCount": report.rule_count,
            "presentedFrameCount": report.presented_frame_count,
            "clickCount": report.click_count,
            "mtsSingleFrameFraction": dist.single_frame_fraction,
            "mtsMedianOccurrences": dist.median_occurrences,
        }

    def export_pgm(self, frame: int) -> bytes:
        pre = pre_annotate(
            self.patches.get(frame, []), self.store, self.width, self.height, frame
        )
        header = b"P5\n%d %d\n255\n" % (self.width, self.height)
        return header + pre.label_map.astype(np.uint8).tobytes()


@dataclass
class ServiceConfig:
    run_dir: Path
    port: int = 8750
    params: MiningParams = MiningParams()
    ui_dir: Path | None = None


_ROUTES = [
    ("GET", re.compile(r"^/api/frames/next$")),
    ("GET", re.compile(r"^/api/frames/(\d+)/image$")),
    ("GET", re.compile(r"^/api/frames/(\d+)/patches$")),
    ("POST", re.compile(r"^/api/labels$")),
    ("POST", re.compile(r"^/api/undo$")),
    ("GET", re.compile(r"^/api/classes$")),
    ("GET", re.compile(r"^/api/stats$")),
    ("GET", re.compile(r"^/api/export/(\d+)$")),
]


def make_server(config: ServiceConfig) -> ThreadingHTTPServer:
    """Build the HTTP server; ``serve_forever`` runs it."""
    session = AnnotationSession(config.run_dir, config.params)
    ui_dir = config.ui_dir

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet
            pass

        def _json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _bytes(self, payload: bytes, content_type: str) -> None:
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self) -> None:
            try:
                if self.path == "/api/frames/next":
                    with session.lock:
                        self._json(200, session.next_descriptor())
                elif m := re.match(r"^/api/frames/(\d+)/image$", self.path):
                    self._bytes(session.frame_png(int(m.group(1))), "image/png")
                elif m := re.match(r"^/api/frames/(\d+)/patches$", self.path):
                    with session.lock:
                        self._json(200, session.frame_patches_payload(int(m.group(1))))
                elif self.path == "/api/classes":
                    self._json(200, session.classes_payload())
                elif self.path == "/api/stats":
                    with session.lock:
                        self._json(200, session.stats_payload())
                elif m := re.match(r"^/api/export/(\d+)$", self.path):
                    with session.lock:
                        payload = session.export_pgm(int(m.group(1)))
                    self._bytes(payload, "application/octet-stream")
                elif ui_dir is not None:
                    self._static()
                else:
                    self._json(404, {"error": f"no route for {self.path}"})
            except FileNotFoundError as e:
                self._json(404, {"error": str(e)})
            except Exception as e:  # surface as a JSON 500 rather than a stack dump
                self._json(500, {"error": f"{type(e).__name__}: {e}"})

        def do_POST(self) -> None:
            try:
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    body = json.loads(raw or b"{}")
                except json.JSONDecodeError:
                    self._json(400, {"error": "request body is not valid JSON"})
                    return
                if self.path == "/api/labels":
                    mts = body.get("mts")
                    class_id = body.get("classId")
                    if not isinstance(mts, str) or not isinstance(class_id, int):
                        self._json(400, {"error": "expected {mts: hex string, classId: int}"})
                        return
                    try:
                        with session.lock:
                            self._json(200, session.submit_label(mts, class_id))
                    except UnknownMts as e:
                        self._json(404, {"error": str(e)})
                    except (UnknownClass, ValueError) as e:
                        self._json(400, {"error": str(e)})
                elif self.path == "/api/undo":
                    with session.lock:
                        result = session.undo()
                    if result is None:
                        self._json(409, {"error": "nothing to undo"})
                    else:
                        self._json(200, result)
                else:
                    self._json(404, {"error": f"no route for {self.path}"})
            except Exception as e:
                self._json(500, {"error": f"{type(e).__name__}: {e}"})

        def _static(self) -> None:
            rel = self.path.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._json(404, {"error": f"no route for {self.path}"})
                return
            types = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".map": "application/json",
            }
            self._bytes(target.read_bytes(), types.get(target.suffix, "application/octet-stream"))

    try:
        server = ThreadingHTTPServer(("127.0.0.1", config.port), Handler)
    except OSError as e:
        raise OSError(f"port {config.port} unavailable: {e}") from e
    server.session = session  # type: ignore[attr-defined]
    return server
