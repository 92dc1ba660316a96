"""Resource hashing and session-table semantics."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbannot.murmur3 import murmur3_x64_128
from gbannot.resources import (
    Create,
    Delete,
    MalformedEventLog,
    Modify,
    ResourceKind,
    UnknownVolatileId,
    build_session_table,
    hash_resource,
    key_hex,
)

from reference import murmur128_reference, murmur128_smhasher_verification

MESH, TEX, SHD = ResourceKind.MESH, ResourceKind.TEXTURE, ResourceKind.SHADER


class TestMurmur:
    def test_smhasher_verification_value(self):
        # pins both implementations to canonical MurmurHash3_x64_128
        assert murmur128_smhasher_verification() == 0x6384BA69
        digests = b"".join(murmur3_x64_128(bytes(range(i)), 256 - i) for i in range(256))
        assert murmur3_x64_128(digests, 0)[:4] == (0x6384BA69).to_bytes(4, "little")

    def test_empty_input_is_zero(self):
        assert murmur3_x64_128(b"", 0) == bytes(16)

    @given(st.binary(max_size=200), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=300, deadline=None)
    def test_agrees_with_reference(self, data, seed):
        assert murmur3_x64_128(data, seed) == murmur128_reference(data, seed)


class TestHashResource:
    def test_frozen_kind_tag_digests(self):
        # digests computed with the independent reference implementation
        assert hash_resource(MESH, b"") == bytes.fromhex("16fe7483905cce7a85670e43e4678877")
        assert hash_resource(TEX, b"") == bytes.fromhex("f21e36379e0e5e6339340ae991bee1ef")
        assert hash_resource(SHD, b"") == bytes.fromhex("593e6a30ddc66a72e4a8b5c52711714e")

    def test_single_byte_difference_changes_key(self):
        a = hash_resource(MESH, b"the quick brown fox")
        b = hash_resource(MESH, b"the quick brown fog")
        assert a == bytes.fromhex("6bc60cbcca910910001fd28da1d0bb5d")
        assert b == bytes.fromhex("95cf14727fbdbcaf4f6911460397e9ba")
        assert a != b

    def test_kinds_never_alias(self):
        assert hash_resource(MESH, b"abc") != hash_resource(TEX, b"abc")
        assert hash_resource(TEX, b"abc") != hash_resource(SHD, b"abc")

    def test_deterministic_across_calls(self):
        content = b"\x00\x01payload"
        assert hash_resource(TEX, content) == hash_resource(TEX, content)

    def test_hex_rendering(self):
        text = key_hex(hash_resource(MESH, b"x"))
        assert len(text) == 32 and text == text.lower()
        int(text, 16)

    def test_no_collisions_over_10k_contents(self):
        rng = random.Random(99)
        seen = set()
        for i in range(10_000):
            content = i.to_bytes(4, "little") + rng.randbytes(rng.randrange(0, 60))
            key = hash_resource(TEX, content)
            assert key not in seen, "128-bit key collision"
            seen.add(key)


class TestSessionTable:
    def test_same_content_same_key(self):
        table = build_session_table(
            [Create(7, TEX, b"A"), Create(9, TEX, b"A")]
        )
        assert table.resolve(7) == table.resolve(9) == hash_resource(TEX, b"A")

    def test_modify_rehashes(self):
        table = build_session_table([Create(7, MESH, b"A"), Modify(7, b"B")])
        assert table.resolve(7) == hash_resource(MESH, b"B")

    def test_delete_then_recreate(self):
        events = [Create(7, MESH, b"A"), Delete(7), Create(7, MESH, b"other")]
        table = build_session_table(events)
        # replay oracle: fold the log by hand
        state = {}
        for ev in events:
            if isinstance(ev, Create):
                state[ev.volatile_id] = hash_resource(ev.kind, ev.content)
            elif isinstance(ev, Delete):
                del state[ev.volatile_id]
        assert table.resolve(7) == state[7] == hash_resource(MESH, b"other")

    @pytest.mark.parametrize(
        "events,bad_index",
        [
            ([Create(1, MESH, b"a"), Modify(2, b"b")], 1),
            ([Delete(5)], 0),
            ([Create(1, MESH, b"a"), Create(1, TEX, b"b")], 1),
        ],
    )
    def test_malformed_logs_report_index(self, events, bad_index):
        with pytest.raises(MalformedEventLog) as err:
            build_session_table(events)
        assert err.value.index == bad_index

    def test_resolve_unknown(self):
        table = build_session_table([Create(7, MESH, b"A")])
        assert table.resolve(7)
        with pytest.raises(UnknownVolatileId):
            table.resolve(9)

    def test_deleted_id_absent_until_recreated(self):
        table = build_session_table([Create(7, MESH, b"A"), Delete(7)])
        with pytest.raises(UnknownVolatileId):
            table.resolve(7)

    def test_generation_counts_events(self):
        table = build_session_table([Create(1, MESH, b"a"), Modify(1, b"b"), Delete(1)])
        assert table.generation == 3

    def test_base_table_extension(self):
        base = build_session_table([Create(1, MESH, b"a")])
        extended = build_session_table([Create(2, TEX, b"b")], base)
        assert extended.resolve(1) == hash_resource(MESH, b"a")
        assert extended.resolve(2) == hash_resource(TEX, b"b")
        with pytest.raises(UnknownVolatileId):
            base.resolve(2)  # base untouched


def test_every_drawn_id_resolves(small_corpus):
    # exhaustive sweep over the simulator output
    for capture, stream in zip(small_corpus.captures, small_corpus.streams):
        for i in capture_main_draws(stream):
            draw = stream.draws[i]
            for vid in (draw.mesh_id, draw.texture_id, draw.shader_id):
                assert capture.table.resolve(vid)


def capture_main_draws(stream):
    from gbannot.passes import identify_passes

    return identify_passes(stream).main_draw_indices()
