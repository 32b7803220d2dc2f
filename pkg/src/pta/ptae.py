"""PTAE container files plus the line-delimited results sink.

Layout (all little-endian):

    offset  size  field
    0       4     magic "PTAE"
    4       2     format version (u16, currently 1)
    6       1     kind (u8): 0 anchors, 1 stream, 2 prototype snapshot
    7       4     dim (u32)
    11      4     count (u32)
    15      1     flags (u8): bit 0 = rows were pre-normalized
    16      16    reserved, must be zero
    32      ...   count * dim float32 payload, row-major
    ...     ...   kind 1 only: count u32 labels

Payload storage is f32; readers hand back f64 so downstream accumulation
happens in double precision. Writing is deterministic: the same arguments
always produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import FormatError, ValidationError
from .vec import NULL_EPS

MAGIC = b"PTAE"
VERSION = 1

KIND_ANCHORS = 0
KIND_STREAM = 1
KIND_PROTOTYPES = 2
_KINDS = (KIND_ANCHORS, KIND_STREAM, KIND_PROTOTYPES)

FLAG_NORMALIZED = 0x01

_HEADER = struct.Struct("<4sHBIIB16s")
HEADER_SIZE = _HEADER.size  # 32
_U32_MAX = 2**32 - 1


@dataclass(frozen=True)
class PtaeHeader:
    kind: int
    dim: int
    count: int
    flags: int

    @property
    def normalized(self) -> bool:
        return bool(self.flags & FLAG_NORMALIZED)


@dataclass(frozen=True)
class EmbeddingFile:
    """A parsed container: f64 matrix, optional labels, raw header."""

    matrix: np.ndarray
    labels: np.ndarray | None
    header: PtaeHeader


def write_embeddings(path, kind: int, matrix, labels=None, *, normalized: bool = False):
    """Serialize a matrix (and labels for kind 1). Overwrites `path`."""
    if kind not in _KINDS:
        raise ValidationError(f"unknown container kind {kind}")
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2:
        raise ValidationError(f"matrix must be 2-D, got shape {mat.shape}")
    count, dim = mat.shape
    if dim == 0 or dim > _U32_MAX or count > _U32_MAX:
        raise ValidationError(f"shape {mat.shape} not representable")
    with np.errstate(over="ignore"):
        payload = np.ascontiguousarray(mat, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise ValidationError("payload is non-finite (or overflows float32)")
    if kind == KIND_STREAM:
        if labels is None:
            raise ValidationError("kind 1 (stream) requires labels")
        lab = np.asarray(labels)
        if lab.ndim != 1 or lab.shape[0] != count:
            raise ValidationError(
                f"need {count} labels, got shape {lab.shape}"
            )
        if lab.size and (not np.issubdtype(lab.dtype, np.integer) or lab.min() < 0 or lab.max() > _U32_MAX):
            raise ValidationError("labels must be non-negative integers")
        label_bytes = np.ascontiguousarray(lab, dtype="<u4").tobytes()
    else:
        if labels is not None:
            raise ValidationError(f"kind {kind} does not carry labels")
        label_bytes = b""
    flags = FLAG_NORMALIZED if normalized else 0
    header = _HEADER.pack(MAGIC, VERSION, kind, dim, count, flags, b"\x00" * 16)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())
        fh.write(label_bytes)


def read_embeddings(path, normalize_on_ingest: bool = True) -> EmbeddingFile:
    """Parse a container; FormatError (with byte offset) on anything corrupt.

    With normalize_on_ingest, rows are L2-normalized after the f32 -> f64
    widening; all-zero rows pass through unchanged.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE:
        raise FormatError(
            f"truncated header: expected {HEADER_SIZE} bytes, file has {len(blob)}",
            offset=len(blob),
        )
    magic, version, kind, dim, count, flags, reserved = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if kind not in _KINDS:
        raise FormatError(f"unknown container kind {kind}", offset=6)
    if dim == 0:
        raise FormatError("dim must be positive", offset=7)
    if flags & ~FLAG_NORMALIZED:
        raise FormatError(f"unknown flag bits 0x{flags:02x}", offset=15)
    if reserved != b"\x00" * 16:
        raise FormatError("reserved header bytes must be zero", offset=16)
    payload_bytes = count * dim * 4
    label_bytes = count * 4 if kind == KIND_STREAM else 0
    expected = HEADER_SIZE + payload_bytes + label_bytes
    if len(blob) < expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes total, file has {len(blob)}",
            offset=len(blob),
        )
    if len(blob) > expected:
        raise FormatError(
            f"trailing data: expected {expected} bytes total, file has {len(blob)}",
            offset=expected,
        )
    mat32 = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=HEADER_SIZE)
    matrix = mat32.astype(np.float64).reshape(count, dim)
    if normalize_on_ingest and count:
        norms = np.linalg.norm(matrix, axis=1)
        live = norms > NULL_EPS
        np.divide(matrix, norms[:, None], out=matrix, where=live[:, None])
    labels = None
    if kind == KIND_STREAM:
        lab32 = np.frombuffer(
            blob, dtype="<u4", count=count, offset=HEADER_SIZE + payload_bytes
        )
        labels = lab32.astype(np.int64)
    return EmbeddingFile(
        matrix=matrix,
        labels=labels,
        header=PtaeHeader(kind=kind, dim=dim, count=count, flags=flags),
    )


# -- run artifacts -------------------------------------------------------------


def append_results(path, records: Iterable[Mapping]):
    """Append one JSON object per record; valid lines stay valid on crash."""
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(dict(rec), sort_keys=True))
            fh.write("\n")
        fh.flush()


def read_results(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_curve_csv(path, rows: Iterable[tuple]):
    """Accuracy-over-time table: checkpoint_n, method, online_accuracy."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["checkpoint_n", "method", "online_accuracy"])
        for row in rows:
            writer.writerow(row)
