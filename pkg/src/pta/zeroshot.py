"""Zero-shot scoring against fixed text anchors.

An anchor matrix holds one unit-norm row per class. Confidence is the
temperature softmax of cosine similarities, and predictions take the argmax
with ties broken toward the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError
from .vec import _as_vector, _softmax_stable, NULL_EPS, cosine_logits


@dataclass
class TextAnchors:
    """Per-class text anchors. Rows are re-normalized at construction."""

    matrix: np.ndarray
    class_names: list[str] | None = None
    temperature: float = 0.01
    _row_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise ValidationError(f"anchor matrix must be 2-D, got shape {mat.shape}")
        if mat.shape[0] < 2:
            raise ValidationError(f"need at least 2 classes, got {mat.shape[0]}")
        if not np.all(np.isfinite(mat)):
            raise ValidationError("anchor matrix contains non-finite values")
        if self.temperature <= 0:
            raise ConfigurationError(
                f"temperature must be positive, got {self.temperature}"
            )
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms <= NULL_EPS):
            raise ValidationError("anchor rows must be non-null")
        mat = mat / norms[:, None]
        if self.class_names is not None and len(self.class_names) != mat.shape[0]:
            raise ValidationError(
                f"{len(self.class_names)} class names for {mat.shape[0]} classes"
            )
        self.matrix = mat
        # Norms of the re-normalized rows (1 +- float eps), cached for the
        # hot paths so cosine stays exact without a per-call O(C*d) pass.
        self._row_norms = np.linalg.norm(mat, axis=1)

    @property
    def class_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def zero_shot_logits(f, anchors: TextAnchors) -> np.ndarray:
    """cos(f, anchor_c) / temperature per class; zeros for a null f."""
    arr = _as_vector(f, "f")
    return cosine_logits(arr, anchors.matrix, anchors.temperature, anchors._row_norms)


def zero_shot_confidence(f, anchors: TextAnchors) -> np.ndarray:
    """Softmax of the zero-shot logits (the model's class posterior)."""
    return _softmax_stable(zero_shot_logits(f, anchors))


def predict(confidence) -> int:
    """Argmax class index; ties go to the lowest index."""
    arr = np.asarray(confidence, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValidationError(f"confidence must be a non-empty vector, got {arr.shape}")
    return int(np.argmax(arr))


@dataclass
class ObserveResult:
    """One streaming prediction: chosen class plus the per-class scores."""

    prediction: int
    scores: np.ndarray


class ZeroShotAdapter:
    """Stateless streaming baseline: every sample scored from anchors alone."""

    def __init__(self, anchors: TextAnchors):
        self.anchors = anchors
        self.samples_seen = 0

    @property
    def class_count(self) -> int:
        return self.anchors.class_count

    @property
    def dim(self) -> int:
        return self.anchors.dim

    def observe(self, f) -> ObserveResult:
        conf = zero_shot_confidence(f, self.anchors)
        self.samples_seen += 1
        return ObserveResult(prediction=int(np.argmax(conf)), scores=conf)
