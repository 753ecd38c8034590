from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncdkit.errors import (
    BadMagicError,
    CsvParseError,
    DimMismatchError,
    NonFiniteFeatureError,
    SplitOverlapError,
    TruncatedFileError,
)
from ncdkit.store import (
    EmbeddingSet,
    Split,
    load_csv,
    load_emb1,
    save_emb1,
    split_view,
    summarize,
)


def two_record_set() -> EmbeddingSet:
    return EmbeddingSet.from_records(
        2,
        [(0, Split.BASE_TRAIN, [1.0, 0.0]), (5, Split.NOVEL_POOL, [0.25, -3.5])],
        class_names={0: "cat", 5: "newdish"},
    )


def test_round_trip_identity(tmp_path):
    s = two_record_set()
    path = tmp_path / "two.emb1"
    save_emb1(s, path)
    loaded = load_emb1(path)
    assert loaded == s
    assert loaded.features.dtype == np.float32
    assert loaded.features.tobytes() == s.features.tobytes()


def test_round_trip_is_byte_stable(tmp_path):
    s = two_record_set()
    p1, p2 = tmp_path / "a.emb1", tmp_path / "b.emb1"
    save_emb1(s, p1)
    save_emb1(load_emb1(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_set_serializes_to_24_byte_header():
    s = EmbeddingSet.from_records(4, [])
    data = s.to_bytes()
    # magic(4) + version(4) + dim(4) + record_count(8) + name_table_len(4)
    assert len(data) == 24
    assert data[:4] == b"EMB1"
    assert EmbeddingSet.from_bytes(data) == s


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.emb1"
    path.write_bytes(b"XXXX" + b"\x00" * 32)
    with pytest.raises(BadMagicError):
        load_emb1(path)


def test_truncated_record_payload_rejected(tmp_path):
    # declares dim=3 and one record but only supplies 2 floats
    header = struct.pack("<4sIIQI", b"EMB1", 1, 3, 1, 0)
    body = struct.pack("<IB3x", 7, 0) + struct.pack("<2f", 1.0, 2.0)
    path = tmp_path / "short.emb1"
    path.write_bytes(header + body)
    with pytest.raises(TruncatedFileError):
        load_emb1(path)


def test_truncated_header_rejected(tmp_path):
    path = tmp_path / "tiny.emb1"
    path.write_bytes(b"EMB1\x01\x00")
    with pytest.raises(TruncatedFileError):
        load_emb1(path)


def test_non_finite_feature_rejected():
    with pytest.raises(NonFiniteFeatureError):
        EmbeddingSet.from_records(2, [(0, Split.BASE_TRAIN, [np.nan, 0.0])])


def test_split_overlap_rejected_not_repaired():
    with pytest.raises(SplitOverlapError):
        EmbeddingSet.from_records(
            2,
            [(0, Split.BASE_TEST, [0.0, 1.0]), (0, Split.NOVEL_POOL, [1.0, 0.0])],
        )


def test_save_refuses_invalid_set_before_write(tmp_path):
    s = two_record_set()
    # simulate post-construction corruption: swap in an overlapping class id
    bad_ids = np.array([5, 5], dtype=np.int64)
    object.__setattr__(s, "class_ids", bad_ids)
    path = tmp_path / "never.emb1"
    with pytest.raises(SplitOverlapError):
        save_emb1(s, path)
    assert not path.exists()


def test_record_dim_mismatch_rejected():
    with pytest.raises(DimMismatchError):
        EmbeddingSet.from_records(3, [(0, Split.BASE_TRAIN, [1.0, 2.0])])


# -- CSV ----------------------------------------------------------------------


def test_csv_basic_parse(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,base_train,1.0,0.0\n", encoding="utf-8")
    s = load_csv(path, dim=2)
    assert s.n_records == 1
    assert s.class_ids[0] == 0
    assert Split(s.splits[0]) == Split.BASE_TRAIN
    assert s.features[0].tolist() == [1.0, 0.0]


def test_csv_header_skipped(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("class_id,split,f_1,f_2\n0,base_test,0.5,0.5\n", encoding="utf-8")
    assert load_csv(path, dim=2).n_records == 1


def test_csv_split_overlap_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,novel_pool,1.0,0.0\n0,base_test,0.0,1.0\n", encoding="utf-8")
    with pytest.raises(SplitOverlapError):
        load_csv(path, dim=2)


def test_csv_parse_error_carries_row_number(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,base_train,1.0,0.0\n1,base_train,oops,0.0\n", encoding="utf-8")
    with pytest.raises(CsvParseError) as err:
        load_csv(path, dim=2)
    assert err.value.row == 2


def test_csv_wrong_width_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,base_train,1.0\n", encoding="utf-8")
    with pytest.raises(CsvParseError):
        load_csv(path, dim=2)


def test_csv_emb1_agreement(tmp_path):
    rows = [
        (0, Split.BASE_TRAIN, [0.125, -1.75]),
        (0, Split.BASE_TEST, [0.5, 0.25]),
        (3, Split.NOVEL_POOL, [2.0, -0.0625]),
    ]
    s = EmbeddingSet.from_records(2, rows)
    emb_path = tmp_path / "d.emb1"
    save_emb1(s, emb_path)
    csv_path = tmp_path / "d.csv"
    csv_path.write_text(
        "\n".join(
            f"{cid},{split.token}," + ",".join(repr(v) for v in vec)
            for cid, split, vec in rows
        )
        + "\n",
        encoding="utf-8",
    )
    assert load_csv(csv_path, dim=2) == load_emb1(emb_path)


# -- summaries and views ---------------------------------------------------------


def test_summarize_counts():
    s = EmbeddingSet.from_records(
        1,
        [
            (0, Split.BASE_TRAIN, [0.0]),
            (0, Split.BASE_TEST, [0.1]),
            (1, Split.BASE_TRAIN, [1.0]),
            (1, Split.BASE_TRAIN, [1.1]),
            (5, Split.NOVEL_POOL, [5.0]),
            (6, Split.NOVEL_POOL, [6.0]),
            (7, Split.NOVEL_POOL, [7.0]),
        ],
    )
    summary = summarize(s)
    assert summary.n_base_classes == 2
    assert summary.n_novel_classes == 3
    assert summary.per_class_counts[0] == (1, 1)
    assert summary.per_class_counts[1] == (2, 0)
    assert summary.per_class_counts[5] == (0, 1)


def test_summarize_empty_set():
    summary = summarize(EmbeddingSet.from_records(3, []))
    assert summary.n_base_classes == 0
    assert summary.n_novel_classes == 0
    assert summary.per_class_counts == {}


def test_split_view_selects_records():
    s = EmbeddingSet.from_records(
        1,
        [(0, Split.BASE_TRAIN, [0.0]), (0, Split.BASE_TEST, [0.5]), (2, Split.NOVEL_POOL, [2.0])],
    )
    view = split_view(s, Split.BASE_TEST)
    assert view.n == 1
    assert view.features[0, 0] == np.float32(0.5)


# -- property: round trip over generated sets ------------------------------------

finite_f32 = st.floats(
    min_value=-1e4, max_value=1e4, allow_nan=False, allow_infinity=False, width=32
)


@st.composite
def embedding_sets(draw):
    dim = draw(st.integers(min_value=1, max_value=6))
    n = draw(st.integers(min_value=0, max_value=20))
    records = []
    for _ in range(n):
        split = draw(st.sampled_from(list(Split)))
        # base ids and novel ids from disjoint ranges keeps the overlap invariant
        cid = draw(st.integers(min_value=0, max_value=4))
        if split == Split.NOVEL_POOL:
            cid += 100
        vec = draw(st.lists(finite_f32, min_size=dim, max_size=dim))
        records.append((cid, split, vec))
    names = draw(
        st.none() | st.dictionaries(st.integers(0, 104), st.text(max_size=8), max_size=3)
    )
    return EmbeddingSet.from_records(dim, records, class_names=names or None)


@given(embedding_sets())
@settings(max_examples=60, deadline=None)
def test_round_trip_property(s):
    assert EmbeddingSet.from_bytes(s.to_bytes()) == s
