"""Seeded synthetic feature streams with controllable distribution shift.

Everything is a pure function of (anchor_seed, order_seed, spec) through
numpy's default PCG64 generator, so the same spec always produces bitwise
identical anchors and streams. Samples are unit-norm perturbations of
per-class anchor directions; the shift kinds move those directions away
from the anchors the classifier scores against.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .stream import Stream
from .zeroshot import TextAnchors

log = logging.getLogger(__name__)

# Anchor separation: enforce pairwise cosine below this when the dimension
# leaves room (d >= 4C); otherwise best effort.
_SEPARATION_COS = 0.5
_SEPARATION_TRIES = 200


class ShiftKind(enum.Enum):
    NONE = "none"
    ROTATE_SUBSPACE = "rotate"
    ADDITIVE_BIAS = "bias"
    MIX_ANCHORS = "mix"


class LabelDistribution(enum.Enum):
    UNIFORM = "uniform"
    ZIPF = "zipf"


@dataclass(frozen=True)
class ShiftSpec:
    class_count: int = 10
    dim: int = 64
    stream_length: int = 2000
    noise_sigma: float = 0.25
    shift_kind: ShiftKind = ShiftKind.NONE
    shift_magnitude: float = 0.0
    label_distribution: LabelDistribution = LabelDistribution.UNIFORM
    zipf_exponent: float = 1.1
    anchor_seed: int = 0
    order_seed: int = 0

    def __post_init__(self):
        if self.class_count < 2:
            raise ValidationError(f"class_count must be >= 2, got {self.class_count}")
        if self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")
        if self.stream_length < 1:
            raise ValidationError(
                f"stream_length must be >= 1, got {self.stream_length}"
            )
        if not (0.0 <= self.shift_magnitude <= 1.0):
            raise ValidationError(
                f"shift_magnitude must lie in [0, 1], got {self.shift_magnitude}"
            )
        if self.noise_sigma < 0 or not math.isfinite(self.noise_sigma):
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.zipf_exponent <= 0:
            raise ValidationError(
                f"zipf_exponent must be positive, got {self.zipf_exponent}"
            )


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    return mat / np.linalg.norm(mat, axis=1)[:, None]


def make_anchors(spec: ShiftSpec, temperature: float = 0.01) -> TextAnchors:
    """Draw unit anchors from the anchor seed, separating them when possible."""
    C, d = spec.class_count, spec.dim
    rng = np.random.default_rng(spec.anchor_seed)
    mat = _unit_rows(rng.standard_normal((C, d)))
    if d >= 4 * C:
        for _ in range(_SEPARATION_TRIES):
            gram = mat @ mat.T
            np.fill_diagonal(gram, 0.0)
            bad = np.unique(np.nonzero(gram.max(axis=1) >= _SEPARATION_COS)[0])
            if bad.size == 0:
                break
            mat[bad] = _unit_rows(rng.standard_normal((bad.size, d)))
        else:
            raise ValidationError(
                f"could not separate {C} anchors below cos {_SEPARATION_COS} in {d}-d"
            )
    else:
        gram = mat @ mat.T
        np.fill_diagonal(gram, 0.0)
        log.debug(
            "anchor separation is best-effort at C=%d, d=%d (max pairwise cos %.3f)",
            C, d, float(gram.max()),
        )
    names = [f"class_{i:03d}" for i in range(C)]
    return TextAnchors(matrix=mat, class_names=names, temperature=temperature)


def shifted_anchors(spec: ShiftSpec, anchors: TextAnchors) -> np.ndarray:
    """The per-class directions the stream actually samples around."""
    A = anchors.matrix
    C, d = A.shape
    m = spec.shift_magnitude
    if spec.shift_kind is ShiftKind.NONE or m == 0.0:
        return A.copy()
    if spec.shift_kind is ShiftKind.ROTATE_SUBSPACE:
        # Planar rotation by m * pi/2 toward a seeded direction orthogonal
        # to each anchor; m = 1 lands orthogonal to the anchor.
        rng = np.random.default_rng([spec.anchor_seed, 1])
        raw = rng.standard_normal((C, d))
        raw -= np.einsum("cd,cd->c", raw, A)[:, None] * A
        ortho = _unit_rows(raw)
        theta = m * (math.pi / 2.0)
        return math.cos(theta) * A + math.sin(theta) * ortho
    if spec.shift_kind is ShiftKind.ADDITIVE_BIAS:
        rng = np.random.default_rng([spec.anchor_seed, 2])
        bias = rng.standard_normal(d)
        bias /= np.linalg.norm(bias)
        return _unit_rows(A + m * bias)
    # MIX_ANCHORS: lean toward a seeded "other" anchor per class.
    rng = np.random.default_rng([spec.anchor_seed, 3])
    partner = rng.integers(0, C - 1, size=C)
    partner[partner >= np.arange(C)] += 1
    return _unit_rows((1.0 - m) * A + m * A[partner])


def _label_counts(spec: ShiftSpec) -> np.ndarray:
    """Exact label multiset: apportioned counts, independent of any seed."""
    C, N = spec.class_count, spec.stream_length
    if spec.label_distribution is LabelDistribution.UNIFORM:
        counts = np.full(C, N // C, dtype=np.int64)
        counts[: N % C] += 1
        return counts
    weights = (np.arange(1, C + 1, dtype=np.float64)) ** (-spec.zipf_exponent)
    target = N * weights / weights.sum()
    counts = np.floor(target).astype(np.int64)
    short = N - int(counts.sum())
    # Largest remainder first; ties resolve toward lower class indices.
    order = np.lexsort((np.arange(C), -(target - counts)))
    counts[order[:short]] += 1
    return counts


def sample_stream(spec: ShiftSpec, anchors: TextAnchors) -> Stream:
    """Generate the labeled stream for `spec` around the shifted anchors."""
    if anchors.class_count != spec.class_count or anchors.dim != spec.dim:
        raise ValidationError(
            f"anchors are {anchors.matrix.shape}, spec wants "
            f"({spec.class_count}, {spec.dim})"
        )
    directions = shifted_anchors(spec, anchors)
    counts = _label_counts(spec)
    labels = np.repeat(np.arange(spec.class_count, dtype=np.int64), counts)
    rng = np.random.default_rng([spec.order_seed, spec.anchor_seed])
    rng.shuffle(labels)
    X = directions[labels]
    if spec.noise_sigma > 0:
        X = X + spec.noise_sigma * rng.standard_normal(X.shape)
    norms = np.linalg.norm(X, axis=1)
    live = norms > 1e-12
    out = np.zeros_like(X)
    np.divide(X, norms[:, None], out=out, where=live[:, None])
    return Stream(embeddings=out, labels=labels)


def severity_ladder(spec: ShiftSpec, levels: int) -> list[ShiftSpec]:
    """Specs with magnitudes spaced linearly over (0, spec.shift_magnitude]."""
    if levels < 1:
        raise ValidationError(f"levels must be >= 1, got {levels}")
    top = spec.shift_magnitude
    if top <= 0:
        raise ValidationError("severity ladder needs a positive shift_magnitude")
    return [
        replace(spec, shift_magnitude=top * (i + 1) / levels) for i in range(levels)
    ]
