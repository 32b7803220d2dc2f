"""Embedding backends.

Two families. The hashed backend projects sample content through matrices
seeded from SHA-256 digests, so its output is deterministic across runs and
machines without any pretrained weights; text and image embeddings live in
unrelated subspaces, which makes it a pipeline-scale stand-in, not a
classifier (zero-shot accuracy on its output is chance). The clip backend
wraps pretrained CLIP through the optional torch/transformers extras and
fails with ModelLoadError when those are missing or the weights cannot be
fetched.

Encoders return raw (unnormalized) f64 vectors; normalization policy belongs
to the extraction step.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetError, ManifestError, ModelLoadError
from .manifest import ExtractionManifest

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}
_POINTS_SUFFIXES = {".npy"}
# Images are pooled to this size before projection.
_THUMB = 16


def _seed(tag: str) -> int:
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


class HashedEncoder:
    """Seeded random projections of pooled sample statistics."""

    def __init__(self, dim: int):
        self.dim = dim
        self._proj: dict[tuple[str, int], np.ndarray] = {}

    def _projection(self, tag: str, width: int) -> np.ndarray:
        key = (tag, width)
        if key not in self._proj:
            rng = np.random.default_rng(_seed(f"{tag}-proj:{self.dim}x{width}"))
            self._proj[key] = rng.normal(size=(self.dim, width)) / np.sqrt(width)
        return self._proj[key]

    def encode_text(self, text: str) -> np.ndarray:
        rng = np.random.default_rng(_seed("text:" + text))
        return rng.normal(size=self.dim)

    def encode_sample(self, path) -> np.ndarray:
        suffix = Path(path).suffix.lower()
        if suffix in _IMAGE_SUFFIXES:
            return self._encode_image(path)
        if suffix in _POINTS_SUFFIXES:
            return self._encode_points(path)
        raise DatasetError(f"unsupported sample type {suffix!r}: {path}")

    def _encode_image(self, path) -> np.ndarray:
        try:
            with Image.open(path) as img:
                thumb = img.convert("RGB").resize((_THUMB, _THUMB))
        except Exception as err:
            raise DatasetError(f"unreadable image {path}: {err}") from err
        raw = np.asarray(thumb, dtype=np.float64).reshape(-1) / 255.0
        # Centering on mid-gray keeps absolute color, the main class signal.
        return self._projection("image", raw.size) @ (raw - 0.5)

    def _encode_points(self, path) -> np.ndarray:
        try:
            pts = np.load(path)
        except Exception as err:
            raise DatasetError(f"unreadable point cloud {path}: {err}") from err
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise DatasetError(f"expected a non-empty N x 3 array in {path}, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DatasetError(f"point cloud {path} contains non-finite values")
        mean = pts.mean(axis=0)
        centered = pts - mean
        cov = centered.T @ centered / pts.shape[0]
        iu = np.triu_indices(3)
        quantiles = np.quantile(pts, [0.1, 0.5, 0.9], axis=0).reshape(-1)
        raw = np.concatenate([mean, centered.std(axis=0), cov[iu], quantiles])
        return self._projection("points", raw.size) @ raw


class ClipEncoder:
    """Pretrained CLIP text/image towers; torch and transformers are extras."""

    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as err:
            raise ModelLoadError(
                f"the clip backend needs the optional torch/transformers extras: {err}"
            ) from err
        try:
            self._model = CLIPModel.from_pretrained(model_name)
            self._processor = CLIPProcessor.from_pretrained(model_name)
        except Exception as err:
            raise ModelLoadError(f"could not load clip model {model_name!r}: {err}") from err
        self._model.eval()
        self._torch = torch
        self.dim = int(self._model.config.projection_dim)

    def encode_text(self, text: str) -> np.ndarray:
        inputs = self._processor(text=[text], return_tensors="pt", padding=True)
        with self._torch.no_grad():
            feats = self._model.get_text_features(**inputs)
        return feats[0].numpy().astype(np.float64)

    def encode_sample(self, path) -> np.ndarray:
        suffix = Path(path).suffix.lower()
        if suffix not in _IMAGE_SUFFIXES:
            raise DatasetError(f"clip backend only encodes images, got {path}")
        try:
            with Image.open(path) as img:
                rgb = img.convert("RGB")
                inputs = self._processor(images=rgb, return_tensors="pt")
        except Exception as err:
            raise DatasetError(f"unreadable image {path}: {err}") from err
        with self._torch.no_grad():
            feats = self._model.get_image_features(**inputs)
        return feats[0].numpy().astype(np.float64)


def get_encoder(manifest: ExtractionManifest):
    """Build the backend named by the manifest and check its output width."""
    ident = manifest.model
    if ident.startswith("hashed:"):
        try:
            dim = int(ident.split(":", 1)[1])
        except ValueError:
            raise ManifestError(f"bad model id {ident!r}, expected hashed:<dim>") from None
        if dim < 2:
            raise ManifestError(f"hashed dim must be >= 2, got {dim}")
        encoder = HashedEncoder(dim)
    elif ident.startswith("clip:"):
        encoder = ClipEncoder(ident.split(":", 1)[1])
    else:
        raise ManifestError(
            f"unknown model identifier {ident!r}; expected hashed:<dim> or clip:<name>"
        )
    if manifest.dim is not None and manifest.dim != encoder.dim:
        raise ManifestError(f"manifest dim {manifest.dim} != encoder dim {encoder.dim}")
    return encoder
