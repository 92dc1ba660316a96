"""Command-line pipeline driver.

Stages communicate only through files under one run directory:

    captures/   recorded sessions (GBCAP1) + oracle sidecars (GBORC1)
    frames/     replayed captures (PPM color, GBIDP1 id planes, tables)
    patches/    patch table (GBPAT1)
    labels/     click log, mining params, palette, exported label maps
    reports/    analytics reports, SVG charts, gallery

Exit codes: 0 success, 2 input error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analytics import (
    density_report,
    mts_distribution_report,
    preannotation_curve,
    render_report_kv,
    render_report_text,
    svg_bar_chart,
    svg_fraction_curves,
)
from .annotator import replay_run, simulate_annotator
from .labeling import (
    CLASS_UNLABELED,
    DEFAULT_CLASSES,
    MiningParams,
    class_by_name,
    classify_patch,
    pre_annotate,
    write_palette,
    write_pgm,
)
from .patches import (
    build_corpus_index,
    decode_runs,
    decompose,
    patches_by_frame,
    read_patches,
    write_patches,
)
from .replay import make_frame_capture, read_capture, write_capture
from .resources import SessionResourceTable
from .simulate import (
    CameraPath,
    WorldConfig,
    generate_world,
    read_oracle_frames,
    simulate_session,
    write_oracle_frames,
    write_world,
)
from .stream import BadMagic, TruncatedStream, VersionMismatch, read_session, write_session


class InputError(Exception):
    pass


class VerificationFailure(Exception):
    pass


# --- run-directory layout ----------------------------------------------------

class RunPaths:
    def __init__(self, run_dir):
        self.run = Path(run_dir)
        self.captures = self.run / "captures"
        self.frames = self.run / "frames"
        self.patches = self.run / "patches"
        self.labels = self.run / "labels"
        self.reports = self.run / "reports"

    @property
    def patch_table(self) -> Path:
        return self.patches / "patches.gbpat"

    @property
    def click_log(self) -> Path:
        return self.labels / "clicklog.txt"

    @property
    def params_file(self) -> Path:
        return self.labels / "params.kv"

    def session_files(self) -> list[Path]:
        return sorted(self.captures.glob("session_*.gbcap"))


def parse_kv(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        out[key] = value.strip()
    return out


def write_kv(path, items: dict) -> None:
    Path(path).write_text("".join(f"{k} {v}\n" for k, v in items.items()))


def load_params(paths: RunPaths, override: str | None = None) -> MiningParams:
    source = override or os.environ.get("GBA_PARAMS") or (
        paths.params_file if paths.params_file.exists() else None
    )
    if source is None:
        return MiningParams()
    kv = parse_kv(source)
    return MiningParams(
        min_support=int(kv.get("min_support", 10)),
        min_confidence=float(kv.get("min_confidence", 0.995)),
        unlabeled_threshold=float(kv.get("unlabeled_threshold", 0.03)),
    )


def _load_oracle_images(paths: RunPaths) -> dict[int, np.ndarray]:
    images: dict[int, np.ndarray] = {}
    sidecars = sorted(paths.captures.glob("session_*.gborc"))
    if not sidecars:
        raise InputError(f"no oracle sidecars under {paths.captures}")
    for sidecar in sidecars:
        for frame in read_oracle_frames(sidecar):
            images[frame.frame_index] = frame.class_image
    return images


def _load_corpus(paths: RunPaths):
    if not paths.patch_table.exists():
        raise InputError(f"no patch table at {paths.patch_table}; run `process` first")
    all_patches, width, height = read_patches(paths.patch_table)
    return patches_by_frame(all_patches), build_corpus_index(
        all_patches, frame_count=len({p.frame_index for p in all_patches})
    ), width, height


def _replayed_run(paths: RunPaths, params: MiningParams):
    if not paths.click_log.exists():
        raise InputError(f"no click log at {paths.click_log}; run `autolabel` first")
    pf, index, width, height = _load_corpus(paths)
    run = replay_run(paths.click_log.read_text(), pf, index, params)
    return run, pf, index, width, height


# --- sim ----------------------------------------------------------------------

def cmd_sim(args) -> int:
    paths = RunPaths(args.run)
    paths.captures.mkdir(parents=True, exist_ok=True)

    settings = {
        "seed": 42, "frames": 300, "sessions": 2, "width": 320, "height": 180,
        "objects": 150, "resources": 230, "ambiguity": 0.0, "stride": 40,
    }
    if args.config:
        for key, value in parse_kv(args.config).items():
            if key not in settings:
                raise InputError(f"unknown config key {key!r}")
            settings[key] = value
    for key in settings:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    seed = int(settings["seed"])
    frames = int(settings["frames"])
    sessions = int(settings["sessions"])
    width, height = int(settings["width"]), int(settings["height"])
    stride = int(settings["stride"])
    ambiguity = float(settings["ambiguity"])
    if sessions < 1 or frames < sessions:
        raise InputError("need at least one frame per session")
    per_session = frames // sessions

    class_ids = tuple(c.id for c in DEFAULT_CLASSES[1:])
    config = WorldConfig(
        object_count=int(settings["objects"]),
        resource_count=int(settings["resources"]),
        class_ids=class_ids,
        ambiguity=ambiguity,
        backdrop_class=class_by_name("Sky").id,
    )
    world = generate_world(config, seed)
    write_world(paths.captures / "world.gborc", world)

    total = 0
    for sess in range(sessions):
        n = per_session + (frames - per_session * sessions if sess == sessions - 1 else 0)
        path = CameraPath.generate(seed * 131 + 1000 + sess, steps=n * stride)
        streams, oracles = simulate_session(
            world, path, stride, session_seed=seed * 977 + 500 + sess,
            width=width, height=height, frame_index_base=total,
        )
        write_session(paths.captures / f"session_{sess:02d}.gbcap", streams)
        write_oracle_frames(paths.captures / f"session_{sess:02d}.gborc", oracles)
        total += len(streams)

    write_kv(paths.run / "sim.kv", {**settings, "frames": total})
    print(f"simulated {total} frames over {sessions} session(s) -> {paths.captures}")
    return 0


# --- process --------------------------------------------------------------------

def _process_frame(payload):
    stream, base_table, frames_dir = payload
    capture = make_frame_capture(stream, base_table)
    write_capture(frames_dir, capture)
    return capture.frame_index, decompose(capture)


def cmd_process(args) -> int:
    paths = RunPaths(args.run)
    session_files = paths.session_files()
    if not session_files:
        raise InputError(f"no capture sessions under {paths.captures}")
    paths.frames.mkdir(parents=True, exist_ok=True)
    paths.patches.mkdir(parents=True, exist_ok=True)

    work = []
    width = height = None
    for session_file in session_files:
        try:
            streams = read_session(session_file)
        except (BadMagic, VersionMismatch) as e:
            raise InputError(f"{session_file}: {e}")
        except TruncatedStream as e:
            raise InputError(f"{session_file}: truncated at offset {e.offset}")
        table = SessionResourceTable()
        for stream in streams:
            base = table.copy()
            for i, event in enumerate(stream.events):
                table.apply(event, i)
            work.append((stream, base, paths.frames))
            width, height = stream.width, stream.height

    all_patches = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for _, patches in sorted(pool.map(_process_frame, work)):
                all_patches.extend(patches)
    else:
        for _, patches in sorted(_process_frame(w) for w in work):
            all_patches.extend(patches)

    write_patches(paths.patch_table, all_patches, width, height)
    print(f"processed {len(work)} frames, {len(all_patches)} patches -> {paths.patch_table}")
    return 0


# --- autolabel -------------------------------------------------------------------

def cmd_autolabel(args) -> int:
    paths = RunPaths(args.run)
    pf, index, width, height = _load_corpus(paths)
    oracle_images = _load_oracle_images(paths)
    missing = [f for f in pf if f not in oracle_images]
    if missing:
        raise InputError(f"oracle does not cover frames {missing[:5]}...")
    params = MiningParams(
        min_support=args.min_support,
        min_confidence=args.min_confidence,
        unlabeled_threshold=args.threshold,
    )
    paths.labels.mkdir(parents=True, exist_ok=True)
    run = simulate_annotator(pf, oracle_images, index, params, log_path=paths.click_log)
    write_kv(
        paths.params_file,
        {
            "min_support": params.min_support,
            "min_confidence": params.min_confidence,
            "unlabeled_threshold": params.unlabeled_threshold,
        },
    )
    write_palette(paths.labels / "palette.txt")
    print(
        f"autolabel: {run.click_count} clicks, "
        f"{len(run.presented_frames)}/{len(run.visits)} frames presented, "
        f"{len(run.store.rules)} rules"
    )
    return 0


# --- verify ----------------------------------------------------------------------

def cmd_verify(args) -> int:
    paths = RunPaths(args.run)
    params = load_params(paths)
    run, pf, index, width, height = _replayed_run(paths, params)
    oracle_images = _load_oracle_images(paths)

    mislabeled = 0
    labeled = 0
    for frame, patches in pf.items():
        oracle = oracle_images[frame].reshape(-1)
        for patch in patches:
            class_id, _, _ = classify_patch(run.store, patch.key)
            if class_id == CLASS_UNLABELED:
                continue
            labeled += patch.area
            mislabeled += int((oracle[decode_runs(patch.runs)] != class_id).sum())
    print(f"verify: {labeled} labeled pixels, {mislabeled} mislabeled")
    if mislabeled:
        raise VerificationFailure(f"{mislabeled} mislabeled pixels")
    return 0


# --- stats -----------------------------------------------------------------------

def cmd_stats(args) -> int:
    paths = RunPaths(args.run)
    params = load_params(paths)
    run, pf, index, width, height = _replayed_run(paths, params)
    paths.reports.mkdir(parents=True, exist_ok=True)

    report = density_report(pf, run.store, run.visits, width, height)
    dist = mts_distribution_report(index)
    curve = preannotation_curve(run)

    (paths.reports / "report.kv").write_text(render_report_kv(report, dist))
    (paths.reports / "report.txt").write_text(
        render_report_text(report, DEFAULT_CLASSES, len(pf))
    )
    by_id = {c.id: c for c in DEFAULT_CLASSES}
    labels = [by_id[i].name if i in by_id else str(i) for i in report.per_class_pixels]
    (paths.reports / "fig4.svg").write_text(
        svg_bar_chart(labels, list(report.per_class_pixels.values()),
                      "annotated pixels per class (log scale)", log_scale=True)
    )
    (paths.reports / "fig5.svg").write_text(
        svg_fraction_curves(
            [f for _, f in curve.per_frame], curve.sorted_variant,
            "pre-annotated fraction: visit order / sorted",
        )
    )
    occurrences = sorted(dist.histogram)
    (paths.reports / "fig6.svg").write_text(
        svg_bar_chart([str(o) for o in occurrences],
                      [dist.histogram[o] for o in occurrences],
                      "frames per MTS combination")
    )
    print(f"stats -> {paths.reports}")
    return 0


# --- export ----------------------------------------------------------------------

def cmd_export(args) -> int:
    paths = RunPaths(args.run)
    params = load_params(paths)
    run, pf, index, width, height = _replayed_run(paths, params)
    maps_dir = paths.labels / "maps"
    maps_dir.mkdir(parents=True, exist_ok=True)
    for frame, patches in sorted(pf.items()):
        pre = pre_annotate(patches, run.store, width, height, frame)
        write_pgm(maps_dir / f"frame_{frame:05d}.pgm", pre.label_map)
    write_palette(paths.labels / "palette.txt")
    print(f"exported {len(pf)} label maps -> {maps_dir}")
    return 0


# --- serve -----------------------------------------------------------------------

def cmd_serve(args) -> int:
    from .service import ServiceConfig, make_server

    paths = RunPaths(args.run)
    params = load_params(paths, args.params)
    config = ServiceConfig(
        run_dir=paths.run,
        port=args.port,
        params=params,
        ui_dir=Path(args.ui) if args.ui else None,
    )
    server = make_server(config)
    host, port = server.server_address
    print(f"serving corpus {paths.run} at http://{host}:{port}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


# --- gallery ---------------------------------------------------------------------

def cmd_gallery(args) -> int:
    from PIL import Image

    paths = RunPaths(args.run)
    ppms = sorted(paths.frames.glob("frame_*.ppm"))
    if not ppms:
        raise InputError(f"no frames under {paths.frames}; run `process` first")
    rng = np.random.default_rng(args.seed)
    chosen = rng.choice(len(ppms), size=min(args.count, len(ppms)), replace=False)
    out_dir = paths.reports / "gallery"
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in sorted(int(c) for c in chosen):
        frame_index = int(ppms[i].stem.split("_")[1])
        capture = read_capture(paths.frames, frame_index)
        Image.fromarray(capture.color).save(out_dir / f"frame_{frame_index:05d}.png")
    print(f"gallery: {len(chosen)} frames -> {out_dir}")
    return 0


# --- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbannot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="generate a world and record sessions")
    p.add_argument("--run", required=True)
    p.add_argument("--config", help="key-value settings file")
    for flag in ("seed", "frames", "sessions", "width", "height", "objects",
                 "resources", "stride"):
        p.add_argument(f"--{flag}", type=int)
    p.add_argument("--ambiguity", type=float)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("process", help="replay captures into frames and patches")
    p.add_argument("--run", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("autolabel", help="run the scripted annotator")
    p.add_argument("--run", required=True)
    p.add_argument("--min-support", type=int, default=10)
    p.add_argument("--min-confidence", type=float, default=0.995)
    p.add_argument("--threshold", type=float, default=0.03)
    p.set_defaults(func=cmd_autolabel)

    p = sub.add_parser("verify", help="diff labels against the oracle")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="write analytics reports and charts")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export", help="write per-frame label maps")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--run", "--corpus", dest="run", required=True)
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--params", help="mining params file (overrides GBA_PARAMS)")
    p.add_argument("--ui", help="static UI directory to serve at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gallery", help="export N random frames as PNG")
    p.add_argument("--run", required=True)
    p.add_argument("-n", "--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gallery)

    return parser


def main(argv: list[str] | None = None) -> int:
    from .simulate import InfeasibleConfig

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, InfeasibleConfig) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except VerificationFailure as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
