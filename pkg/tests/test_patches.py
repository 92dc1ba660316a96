"""Patch decomposition against the brute-force grouping oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbannot.patches import (
    UnresolvableId,
    build_corpus_index,
    decode_runs,
    decompose,
    dump_patches,
    encode_runs,
    read_patches,
    write_patches,
)
from gbannot.replay import FrameCapture
from gbannot.resources import (
    ID_SENTINEL,
    ResourceKind,
    SessionResourceTable,
    hash_resource,
)

from reference import group_pixels_reference


def make_capture(ids: np.ndarray, table: SessionResourceTable, frame_index=0):
    h, w, _ = ids.shape
    color = np.zeros((h, w, 3), dtype=np.uint8)
    return FrameCapture(frame_index, color, ids.astype(np.uint32), table)


def simple_table(*vids):
    table = SessionResourceTable()
    for vid in vids:
        kind = ResourceKind((vid % 3) + 1)
        table.entries[vid] = (kind, hash_resource(kind, vid.to_bytes(4, "little")))
    return table


class TestRunLengthEncoding:
    def test_empty(self):
        assert encode_runs(np.array([], dtype=np.int64)).shape == (0, 2)
        assert decode_runs(np.zeros((0, 2))).size == 0

    def test_known_runs(self):
        idx = np.array([0, 1, 2, 7, 9, 10])
        runs = encode_runs(idx)
        assert runs.tolist() == [[0, 3], [7, 1], [9, 2]]
        assert decode_runs(runs).tolist() == idx.tolist()

    @given(st.sets(st.integers(0, 500), max_size=80))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, indices):
        idx = np.array(sorted(indices), dtype=np.int64)
        assert decode_runs(encode_runs(idx)).tolist() == idx.tolist()


class TestDecompose:
    def test_uniform_frame_single_patch(self):
        ids = np.empty((6, 8, 3), dtype=np.uint32)
        ids[:] = (1, 2, 3)
        patches = decompose(make_capture(ids, simple_table(1, 2, 3)))
        assert len(patches) == 1
        assert patches[0].area == 48
        assert patches[0].runs.tolist() == [[0, 48]]

    def test_half_sentinel_frame(self):
        ids = np.full((6, 8, 3), ID_SENTINEL, dtype=np.uint32)
        ids[:3] = (1, 2, 3)
        patches = decompose(make_capture(ids, simple_table(1, 2, 3)))
        assert len(patches) == 1
        assert patches[0].area == 24
        assert decode_runs(patches[0].runs).max() == 23

    def test_unresolvable_id(self):
        ids = np.empty((2, 2, 3), dtype=np.uint32)
        ids[:] = (1, 2, 3)
        with pytest.raises(UnresolvableId) as err:
            decompose(make_capture(ids, simple_table(1, 2)))
        assert err.value.volatile_id == 3

    def test_fifty_random_frames_match_grouping_oracle(self, midsize_corpus):
        rng = np.random.default_rng(42)
        chosen = rng.choice(len(midsize_corpus.captures), size=50, replace=False)
        for i in sorted(int(c) for c in chosen):
            capture = midsize_corpus.captures[i]
            patches = decompose(capture)
            reference = group_pixels_reference(capture.ids, capture.table.entries)
            assert len(patches) == len(reference)
            for patch in patches:
                assert decode_runs(patch.runs).tolist() == reference[tuple(patch.key)]
                assert patch.area == len(reference[tuple(patch.key)])

    def test_partition_property_corpus_wide(self, small_corpus):
        for capture in small_corpus.captures:
            patches = decompose(capture)
            non_sentinel = int((capture.ids[:, :, 0] != ID_SENTINEL).sum())
            assert sum(p.area for p in patches) == non_sentinel
            seen = np.zeros(capture.width * capture.height, dtype=bool)
            for p in patches:
                idx = decode_runs(p.runs)
                assert not seen[idx].any()  # pairwise disjoint
                seen[idx] = True


class TestIndex:
    def test_single_frame_k_patches(self, small_corpus):
        patches = small_corpus.by_frame[0]
        index = build_corpus_index(patches, frame_count=1)
        assert len(index.by_mts) == len(patches)
        assert all(len(v) == 1 for v in index.by_mts.values())

    def test_same_mts_in_four_frames(self):
        table = simple_table(1, 2, 3)
        ids = np.empty((2, 2, 3), dtype=np.uint32)
        ids[:] = (1, 2, 3)
        patches = []
        for frame in range(4):
            patches += decompose(make_capture(ids, table, frame_index=frame))
        index = build_corpus_index(patches, frame_count=4)
        (occurrences,) = index.by_mts.values()
        assert [f for f, _ in occurrences] == [0, 1, 2, 3]

    def test_inversion_matches_brute_force(self, small_corpus):
        index = small_corpus.index
        brute: dict[bytes, set] = {}
        for key in index.by_mts:
            for component in key:
                brute.setdefault(component, set()).add(key)
        assert index.by_resource == brute

    def test_cross_session_patch_keys_persist(self, small_corpus):
        # keys observed in session 2 overlap heavily with session 1
        bound = small_corpus.session_bounds[1]
        first = {p.key for p in small_corpus.patches if p.frame_index < bound}
        second = {p.key for p in small_corpus.patches if p.frame_index >= bound}
        assert first & second


class TestPersistence:
    def test_gbpat_round_trip(self, small_corpus, tmp_path):
        path = tmp_path / "patches.gbpat"
        write_patches(path, small_corpus.patches, 160, 90)
        loaded, w, h = read_patches(path)
        assert (w, h) == (160, 90)
        assert loaded == sorted(small_corpus.patches, key=lambda p: (p.frame_index, p.key))
        write_patches(tmp_path / "again.gbpat", loaded, w, h)
        assert (tmp_path / "again.gbpat").read_bytes() == path.read_bytes()

    def test_text_dump_mentions_every_patch(self, small_corpus):
        text = dump_patches(small_corpus.by_frame[0])
        assert len(text.strip().splitlines()) == len(small_corpus.by_frame[0])
        assert small_corpus.by_frame[0][0].key.hex() in text
