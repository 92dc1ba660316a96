"""Shared corpus fixtures.

``small_corpus`` is an in-memory 160x90 two-session corpus used by most
oracle comparisons; ``default_run`` drives the real CLI over the default
300-frame corpus once per session and is what the acceptance suite
inspects.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from gbannot.labeling import DEFAULT_CLASSES, class_by_name
from gbannot.patches import Patch, build_corpus_index, decompose, patches_by_frame
from gbannot.replay import FrameCapture, make_frame_capture
from gbannot.resources import SessionResourceTable
from gbannot.simulate import (
    CameraPath,
    OracleFrame,
    World,
    WorldConfig,
    generate_world,
    simulate_session,
)
from gbannot.stream import CommandStream

ALL_CLASS_IDS = tuple(c.id for c in DEFAULT_CLASSES[1:])
SKY = class_by_name("Sky").id


@dataclass
class Corpus:
    world: World
    streams: list[CommandStream]
    oracles: list[OracleFrame]
    captures: list[FrameCapture]
    patches: list[Patch]
    width: int
    height: int
    session_bounds: list[int]  # first frame index of each session

    by_frame: dict[int, list[Patch]] = field(default_factory=dict)

    def __post_init__(self):
        self.by_frame = patches_by_frame(self.patches)
        self.index = build_corpus_index(self.patches, frame_count=len(self.streams))
        self.oracle_images = {o.frame_index: o.class_image for o in self.oracles}


def build_corpus(
    seed: int = 7,
    frames_per_session: int = 15,
    sessions: int = 2,
    width: int = 160,
    height: int = 90,
    objects: int = 60,
    resources: int = 130,
    ambiguity: float = 0.0,
    stride: int = 30,
) -> Corpus:
    config = WorldConfig(
        object_count=objects,
        resource_count=resources,
        class_ids=ALL_CLASS_IDS,
        ambiguity=ambiguity,
        backdrop_class=SKY,
    )
    world = generate_world(config, seed)
    streams: list[CommandStream] = []
    oracles: list[OracleFrame] = []
    bounds = []
    for sess in range(sessions):
        bounds.append(len(streams))
        path = CameraPath.generate(seed * 131 + 1000 + sess, steps=frames_per_session * stride)
        ss, oo = simulate_session(
            world, path, stride, session_seed=seed * 977 + 500 + sess,
            width=width, height=height, frame_index_base=len(streams),
        )
        streams += ss
        oracles += oo

    captures: list[FrameCapture] = []
    patches: list[Patch] = []
    table = SessionResourceTable()
    for i, stream in enumerate(streams):
        if i in bounds:
            table = SessionResourceTable()
        capture = make_frame_capture(stream, table)
        table = capture.table
        captures.append(capture)
        patches.extend(decompose(capture))
    return Corpus(world, streams, oracles, captures, patches, width, height, bounds)


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return build_corpus()


@pytest.fixture(scope="session")
def midsize_corpus() -> Corpus:
    """100+ frames with PostProcess/Hud draws for pass-bypass checks."""
    return build_corpus(seed=3, frames_per_session=55, sessions=2)


@pytest.fixture(scope="session")
def ambiguous_corpus() -> Corpus:
    return build_corpus(seed=11, ambiguity=0.2)


@dataclass
class DefaultRun:
    run_dir: Path
    pipeline_seconds: float
    clicks: int
    presented: int
    rules: int


@pytest.fixture(scope="session")
def default_run(tmp_path_factory) -> DefaultRun:
    """The full default corpus driven through the real CLI."""
    from gbannot.cli import main

    run_dir = tmp_path_factory.mktemp("default_run")
    t0 = time.time()
    assert main(["sim", "--run", str(run_dir), "--seed", "42"]) == 0
    assert main(["process", "--run", str(run_dir)]) == 0
    assert main(["autolabel", "--run", str(run_dir)]) == 0
    assert main(["verify", "--run", str(run_dir)]) == 0
    elapsed = time.time() - t0

    from gbannot.annotator import replay_run
    from gbannot.cli import RunPaths, load_params
    from gbannot.patches import read_patches

    paths = RunPaths(run_dir)
    all_patches, w, h = read_patches(paths.patch_table)
    pf = patches_by_frame(all_patches)
    index = build_corpus_index(all_patches, frame_count=len(pf))
    run = replay_run(paths.click_log.read_text(), pf, index, load_params(paths))
    return DefaultRun(
        run_dir=run_dir,
        pipeline_seconds=elapsed,
        clicks=run.click_count,
        presented=len(run.presented_frames),
        rules=len(run.store.rules),
    )
