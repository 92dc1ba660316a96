"""Pass identification by render-target grouping."""

import pytest

from gbannot.passes import NoMainPass, PassRole, identify_passes
from gbannot.stream import BACKBUFFER_TARGETS, GBUFFER_TARGETS, CommandStream, Target

from test_stream import quad_draw


def test_single_gbuffer_group():
    stream = CommandStream(0, 64, 32, [], [quad_draw(), quad_draw(), quad_draw()])
    partition = identify_passes(stream)
    assert len(partition.groups) == 1
    group = partition.groups[0]
    assert group.role is PassRole.MAIN_GEOMETRY
    assert group.draw_indices == (0, 1, 2)


def test_main_then_distortion_then_hud():
    stream = CommandStream(
        0, 64, 32, [],
        [
            quad_draw(),
            quad_draw(targets=BACKBUFFER_TARGETS, samples=True),
            quad_draw(targets=BACKBUFFER_TARGETS, samples=False),
        ],
    )
    partition = identify_passes(stream)
    assert [g.role for g in partition.groups] == [
        PassRole.MAIN_GEOMETRY,
        PassRole.POST_PROCESS,
        PassRole.HUD,
    ]
    assert [g.draw_indices for g in partition.groups] == [(0,), (1,), (2,)]


def test_alternating_target_sets_form_three_groups():
    a = quad_draw()
    b = quad_draw(targets=BACKBUFFER_TARGETS)
    stream = CommandStream(0, 64, 32, [], [a, b, quad_draw()])
    partition = identify_passes(stream)
    assert [g.targets for g in partition.groups] == [
        GBUFFER_TARGETS,
        BACKBUFFER_TARGETS,
        GBUFFER_TARGETS,
    ]
    assert [g.role for g in partition.groups] == [
        PassRole.MAIN_GEOMETRY,
        PassRole.HUD,
        PassRole.MAIN_GEOMETRY,
    ]


def test_no_main_pass():
    stream = CommandStream(0, 64, 32, [], [quad_draw(targets=BACKBUFFER_TARGETS)])
    with pytest.raises(NoMainPass):
        identify_passes(stream)


def test_binding_order_of_gbuffer_does_not_matter():
    stream = CommandStream(
        0, 64, 32, [], [quad_draw(targets=(Target.DEPTH, Target.ALBEDO))]
    )
    assert identify_passes(stream).groups[0].role is PassRole.MAIN_GEOMETRY


def test_roles_match_withheld_simulator_tags(small_corpus):
    for stream, oracle in zip(small_corpus.streams, small_corpus.oracles):
        partition = identify_passes(stream)
        roles = partition.draw_roles()
        assert len(roles) == len(stream.draws) == len(oracle.pass_tags)
        for i, tag in enumerate(oracle.pass_tags):
            assert roles[i] is tag
