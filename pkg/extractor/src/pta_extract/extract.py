"""Dataset-to-container extraction.

Anchors: one row per class, the mean of that class's prompt embeddings.
Streams: one row per readable sample, classes in manifest order and files
sorted by name (shuffling is the consumer's job), with labels indexing the
manifest class list. Each output is re-read with the engine parser before
returning, and a sidecar JSON next to it records the class list plus its
checksum so anchor rows and stream labels can be tied back together later.
Unreadable samples are skipped, logged, and listed in the stream sidecar.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np
from pta.ptae import KIND_ANCHORS, KIND_STREAM, read_embeddings, write_embeddings

from .encoders import get_encoder
from .errors import DatasetError, ExtractorError, ManifestError
from .manifest import ExtractionManifest

log = logging.getLogger(__name__)


def class_list_checksum(class_names: list[str]) -> str:
    return hashlib.sha256("\n".join(class_names).encode("utf-8")).hexdigest()


def sidecar_path(container_path) -> Path:
    return Path(str(container_path) + ".manifest.json")


def _write_sidecar(container_path, manifest: ExtractionManifest, dim: int, extra: dict) -> None:
    doc = {
        "model": manifest.model,
        "dim": dim,
        "normalized": manifest.normalize,
        "class_names": list(manifest.class_names),
        "class_list_sha256": class_list_checksum(manifest.class_names),
    }
    doc.update(extra)
    with open(sidecar_path(container_path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finalize_rows(rows: np.ndarray, normalize: bool) -> np.ndarray:
    if not normalize:
        return rows
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ExtractorError("cannot normalize a zero-norm embedding row")
    return rows / norms


def extract_anchors(manifest: ExtractionManifest) -> str:
    """Encode every (template, class) prompt, average per class, write kind=0."""
    encoder = get_encoder(manifest)
    classes = manifest.class_names
    rows = np.empty((len(classes), encoder.dim))
    for c, name in enumerate(classes):
        embs = np.stack([encoder.encode_text(tpl.format(name)) for tpl in manifest.templates])
        rows[c] = embs.mean(axis=0)
        if not np.linalg.norm(rows[c]) > 0.0:
            raise ManifestError(f"prompt embeddings for class {name!r} average to zero")
    write_embeddings(
        manifest.anchors_path,
        KIND_ANCHORS,
        _finalize_rows(rows, manifest.normalize),
        normalized=manifest.normalize,
    )
    _write_sidecar(manifest.anchors_path, manifest, encoder.dim, {"templates": manifest.templates})

    parsed = read_embeddings(manifest.anchors_path, normalize_on_ingest=False)
    if parsed.header.kind != KIND_ANCHORS or parsed.matrix.shape != (len(classes), encoder.dim):
        raise ExtractorError(f"re-read of {manifest.anchors_path} does not match what was written")
    if manifest.normalize:
        norms = np.linalg.norm(parsed.matrix, axis=1)
        if np.abs(norms - 1.0).max() > 1e-5:
            raise ExtractorError("stored anchor rows drifted from unit norm")
    log.info("wrote %d anchors (dim %d) to %s", len(classes), encoder.dim, manifest.anchors_path)
    return manifest.anchors_path


def _iter_samples(root: Path, classes: list[str]):
    """Yield (path, label) pairs in deterministic dataset order."""
    index = {name: c for c, name in enumerate(classes)}
    unknown = sorted(d.name for d in root.iterdir() if d.is_dir() and d.name not in index)
    if unknown:
        raise DatasetError(f"dataset folders without a class entry: {unknown}")
    for name in classes:
        cls_dir = root / name
        if not cls_dir.is_dir():
            log.warning("class %r has no folder under %s", name, root)
            continue
        for sample in sorted(p for p in cls_dir.iterdir() if p.is_file()):
            yield sample, index[name]


def extract_stream(manifest: ExtractionManifest) -> str:
    """Encode every readable sample under dataset_path, write kind=1 with labels."""
    encoder = get_encoder(manifest)
    root = Path(manifest.dataset_path)
    if not root.is_dir():
        raise DatasetError(f"dataset path {root} is not a directory")

    anchors_sidecar = sidecar_path(manifest.anchors_path)
    if anchors_sidecar.exists():
        with open(anchors_sidecar, encoding="utf-8") as fh:
            recorded = json.load(fh).get("class_list_sha256")
        if recorded != class_list_checksum(manifest.class_names):
            raise ManifestError(
                f"class list does not match the one recorded in {anchors_sidecar}"
            )

    feats: list[np.ndarray] = []
    labels: list[int] = []
    skips: list[dict] = []
    for sample, label in _iter_samples(root, manifest.class_names):
        try:
            v = encoder.encode_sample(sample)
            if manifest.normalize and not np.linalg.norm(v) > 0.0:
                raise DatasetError("sample encodes to a zero vector")
        except DatasetError as err:
            log.warning("skipping %s: %s", sample, err)
            skips.append({"path": str(sample), "reason": str(err)})
            continue
        feats.append(v)
        labels.append(label)
    if not feats:
        raise DatasetError(f"no readable samples under {root}")

    matrix = _finalize_rows(np.stack(feats), manifest.normalize)
    write_embeddings(
        manifest.stream_path,
        KIND_STREAM,
        matrix,
        np.asarray(labels),
        normalized=manifest.normalize,
    )
    _write_sidecar(
        manifest.stream_path,
        manifest,
        encoder.dim,
        {"kept": len(feats), "skipped": skips},
    )

    parsed = read_embeddings(manifest.stream_path, normalize_on_ingest=False)
    if (
        parsed.header.kind != KIND_STREAM
        or parsed.matrix.shape != (len(feats), encoder.dim)
        or parsed.labels is None
        or int(parsed.labels.max()) >= len(manifest.class_names)
    ):
        raise ExtractorError(f"re-read of {manifest.stream_path} does not match what was written")
    log.info(
        "wrote %d samples (dim %d, %d skipped) to %s",
        len(feats), encoder.dim, len(skips), manifest.stream_path,
    )
    return manifest.stream_path
