"""Rendering-pass identification by render-target grouping.

Draws are grouped into consecutive runs binding the identical target
set; a change of the recorded scene-sampling binding likewise starts a
new run, since it is part of the pipeline state the wrapper records
(post-processing reads the scene image back, HUD does not, even when
both write the backbuffer).  The group binding the G-buffer set
(albedo + depth, in any binding order) is the main geometry pass; every
other group is post-processing when it samples the scene and HUD
otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .stream import CommandStream, Target


class PassRole(enum.IntEnum):
    MAIN_GEOMETRY = 1
    POST_PROCESS = 2
    HUD = 3


class NoMainPass(Exception):
    """No draw group binds the G-buffer target set."""


@dataclass(frozen=True)
class PassGroup:
    targets: tuple[Target, ...]
    draw_indices: tuple[int, ...]
    role: PassRole


@dataclass(frozen=True)
class PassPartition:
    groups: tuple[PassGroup, ...]

    def draw_roles(self) -> dict[int, PassRole]:
        return {i: g.role for g in self.groups for i in g.draw_indices}

    def main_draw_indices(self) -> list[int]:
        out: list[int] = []
        for g in self.groups:
            if g.role is PassRole.MAIN_GEOMETRY:
                out.extend(g.draw_indices)
        return out


_GBUFFER_SET = frozenset({Target.ALBEDO, Target.DEPTH})


def identify_passes(stream: CommandStream) -> PassPartition:
    """Partition the stream's draws into role-tagged target groups."""
    groups: list[PassGroup] = []
    run_state: tuple[tuple[Target, ...], bool] | None = None
    run_indices: list[int] = []

    def close_run() -> None:
        if run_state is None:
            return
        targets, samples_scene = run_state
        if frozenset(targets) == _GBUFFER_SET:
            role = PassRole.MAIN_GEOMETRY
        elif samples_scene:
            role = PassRole.POST_PROCESS
        else:
            role = PassRole.HUD
        groups.append(PassGroup(targets, tuple(run_indices), role))

    for i, draw in enumerate(stream.draws):
        state = (draw.targets, draw.samples_scene)
        if state != run_state:
            close_run()
            run_state = state
            run_indices = []
        run_indices.append(i)
    close_run()

    partition = PassPartition(tuple(groups))
    if not any(g.role is PassRole.MAIN_GEOMETRY for g in partition.groups):
        raise NoMainPass(f"frame {stream.frame_index}: no group binds the G-buffer set")
    return partition
