from __future__ import annotations

import json

import numpy as np
import pytest

from pta.errors import FormatError, ValidationError
from pta.ptae import (
    HEADER_SIZE,
    KIND_ANCHORS,
    KIND_PROTOTYPES,
    KIND_STREAM,
    append_results,
    read_embeddings,
    read_results,
    write_curve_csv,
    write_embeddings,
)


def _write_valid(path, kind=KIND_ANCHORS, C=4, d=8, seed=0, **kw):
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((C, d))
    labels = rng.integers(0, C, size=C).astype(np.int64) if kind == KIND_STREAM else None
    write_embeddings(path, kind, matrix, labels, **kw)
    return matrix, labels


def test_roundtrip_preserves_f32_values(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    matrix, _ = _write_valid(path)
    loaded = read_embeddings(path, normalize_on_ingest=False)
    assert np.array_equal(loaded.matrix, matrix.astype(np.float32).astype(np.float64))
    assert loaded.header.kind == KIND_ANCHORS
    assert loaded.header.dim == 8
    assert loaded.header.count == 4


def test_rewrite_is_byte_identical(tmp_path) -> None:
    # Writing what was read must reproduce the file bit for bit.
    first = tmp_path / "a.ptae"
    second = tmp_path / "b.ptae"
    rng = np.random.default_rng(42)
    for trial in range(50):
        C = int(rng.integers(1, 12))
        d = int(rng.integers(1, 40))
        matrix = rng.standard_normal((C, d)) * float(rng.uniform(0.01, 100))
        labels = rng.integers(0, 1000, size=C).astype(np.int64)
        kind = (KIND_ANCHORS, KIND_STREAM, KIND_PROTOTYPES)[trial % 3]
        lab = labels if kind == KIND_STREAM else None
        write_embeddings(first, kind, matrix, lab)
        loaded = read_embeddings(first, normalize_on_ingest=False)
        write_embeddings(second, kind, loaded.matrix, loaded.labels)
        assert first.read_bytes() == second.read_bytes()


def test_stream_kind_roundtrips_labels(tmp_path) -> None:
    path = tmp_path / "s.ptae"
    matrix, labels = _write_valid(path, kind=KIND_STREAM, seed=3)
    loaded = read_embeddings(path, normalize_on_ingest=False)
    assert np.array_equal(loaded.labels, labels)
    assert loaded.labels.dtype == np.int64


def test_normalized_flag_roundtrips(tmp_path) -> None:
    path = tmp_path / "n.ptae"
    _write_valid(path, normalized=True)
    loaded = read_embeddings(path, normalize_on_ingest=False)
    assert loaded.header.normalized


def test_normalize_on_ingest(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path, seed=5)
    loaded = read_embeddings(path, normalize_on_ingest=True)
    norms = np.linalg.norm(loaded.matrix, axis=1)
    assert norms == pytest.approx(np.ones(4), abs=1e-6)


def test_normalize_on_ingest_preserves_null_rows(tmp_path) -> None:
    path = tmp_path / "z.ptae"
    matrix = np.array([[1.0, 0.0], [0.0, 0.0]])
    write_embeddings(path, KIND_PROTOTYPES, matrix)
    loaded = read_embeddings(path, normalize_on_ingest=True)
    assert np.array_equal(loaded.matrix[1], np.zeros(2))


def _corrupt(path, offset: int, value: bytes):
    blob = bytearray(path.read_bytes())
    blob[offset : offset + len(value)] = value
    path.write_bytes(bytes(blob))


def _offset_of(err: FormatError) -> int:
    return err.offset


def test_bad_magic_reports_offset_zero(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    _corrupt(path, 0, b"NOPE")
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == 0


def test_bad_version_reports_offset_four(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    _corrupt(path, 4, b"\x09\x00")
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == 4


def test_bad_kind_reports_offset_six(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    _corrupt(path, 6, b"\x07")
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == 6


def test_zero_dim_reports_offset_seven(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    _corrupt(path, 7, b"\x00\x00\x00\x00")
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == 7


def test_unknown_flags_report_offset_fifteen(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    _corrupt(path, 15, b"\x80")
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == 15


def test_nonzero_reserved_reports_offset_sixteen(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    _corrupt(path, 20, b"\x01")
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == 16


def test_truncated_header(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    path.write_bytes(path.read_bytes()[: HEADER_SIZE - 5])
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == HEADER_SIZE - 5


def test_truncated_payload(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-7])
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == len(blob) - 7


def test_trailing_data_rejected(tmp_path) -> None:
    path = tmp_path / "a.ptae"
    _write_valid(path)
    expected = len(path.read_bytes())
    path.write_bytes(path.read_bytes() + b"\x00\x01")
    with pytest.raises(FormatError) as exc:
        read_embeddings(path)
    assert exc.value.offset == expected


def test_format_error_message_carries_offset() -> None:
    err = FormatError("broken thing", offset=12)
    assert "12" in str(err)
    assert err.offset == 12


def test_missing_file_raises_oserror(tmp_path) -> None:
    with pytest.raises(OSError):
        read_embeddings(tmp_path / "absent.ptae")


def test_write_rejects_labels_for_non_stream(tmp_path) -> None:
    with pytest.raises(ValidationError):
        write_embeddings(tmp_path / "x.ptae", KIND_ANCHORS, np.ones((2, 2)), np.array([0, 1]))


def test_write_requires_labels_for_stream(tmp_path) -> None:
    with pytest.raises(ValidationError):
        write_embeddings(tmp_path / "x.ptae", KIND_STREAM, np.ones((2, 2)))


def test_write_rejects_label_count_mismatch(tmp_path) -> None:
    with pytest.raises(ValidationError):
        write_embeddings(
            tmp_path / "x.ptae", KIND_STREAM, np.ones((3, 2)), np.array([0, 1])
        )


def test_write_rejects_negative_labels(tmp_path) -> None:
    with pytest.raises(ValidationError):
        write_embeddings(
            tmp_path / "x.ptae", KIND_STREAM, np.ones((2, 2)), np.array([0, -1])
        )


def test_write_rejects_unknown_kind(tmp_path) -> None:
    with pytest.raises(ValidationError):
        write_embeddings(tmp_path / "x.ptae", 9, np.ones((2, 2)))


def test_write_rejects_f32_overflow(tmp_path) -> None:
    # 1e39 is finite in f64 but becomes inf when stored as f32.
    with pytest.raises(ValidationError):
        write_embeddings(tmp_path / "x.ptae", KIND_ANCHORS, np.full((2, 2), 1e39))


def test_single_row_matrix_roundtrips(tmp_path) -> None:
    path = tmp_path / "one.ptae"
    write_embeddings(path, KIND_PROTOTYPES, np.array([[1.5, -2.5, 3.0]]))
    loaded = read_embeddings(path, normalize_on_ingest=False)
    assert loaded.matrix.shape == (1, 3)


def test_results_jsonl_roundtrip(tmp_path) -> None:
    path = tmp_path / "r.jsonl"
    rows = [
        {"run_id": "t", "method": "pta", "index": 0, "prediction": 3},
        {"run_id": "t", "method": "pta", "index": 1, "prediction": 1},
    ]
    append_results(path, rows)
    append_results(path, [{"run_id": "t", "method": "pta", "index": 2, "prediction": 0}])
    back = read_results(path)
    assert len(back) == 3
    assert back[0] == rows[0]
    assert back[2]["index"] == 2


def test_results_lines_have_sorted_keys(tmp_path) -> None:
    path = tmp_path / "r.jsonl"
    append_results(path, [{"b": 1, "a": 2}])
    line = path.read_text().strip()
    assert line == json.dumps({"a": 2, "b": 1}, sort_keys=True)


def test_curve_csv_header_and_rows(tmp_path) -> None:
    path = tmp_path / "c.csv"
    write_curve_csv(path, [(50, "pta", 91.5), (100, "pta", 92.0)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "checkpoint_n,method,online_accuracy"
    assert lines[1].startswith("50,pta,")
    assert len(lines) == 3
