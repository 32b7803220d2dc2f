"""Small vector kernels used everywhere else: normalize, cosine, softmax.

Conventions that the rest of the package relies on:

* the all-zero vector is the designated "null" embedding; cosine against it
  is defined as exactly 0.0 rather than raising,
* norms below NULL_EPS are treated as null to avoid dividing by denormals,
* softmax is always computed with max-subtraction so large logit/temperature
  ratios stay finite.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError, ValidationError

# Norm threshold below which a vector counts as null.
NULL_EPS = 1e-12


def _as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def l2_normalize(v) -> np.ndarray:
    """Return v / ||v||, or the all-zero vector when ||v|| <= NULL_EPS."""
    arr = _as_vector(v)
    norm = float(np.linalg.norm(arr))
    if norm <= NULL_EPS:
        return np.zeros_like(arr)
    return arr / norm


def cosine(a, b) -> float:
    """Cosine similarity with cos(x, null) := 0.0 for null either side."""
    va = _as_vector(a, "a")
    vb = _as_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatchError(
            f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}"
        )
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na <= NULL_EPS or nb <= NULL_EPS:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax: softmax(logits / temperature), max-subtracted."""
    if temperature <= 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    arr = _as_vector(logits, "logits")
    if arr.shape[0] == 0:
        raise ValidationError("softmax needs at least one logit")
    return _softmax_stable(arr / temperature)


def _softmax_stable(scaled: np.ndarray) -> np.ndarray:
    # Callers guarantee finite input; hot paths skip the public validation.
    shifted = scaled - scaled.max()
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum()
    return shifted


def cosine_logits(
    f: np.ndarray,
    matrix: np.ndarray,
    temperature: float,
    row_norms: np.ndarray | None = None,
) -> np.ndarray:
    """cos(f, matrix[c]) / temperature for every row c, with null guards.

    `row_norms` can be passed when the caller keeps them cached; rows with
    norm <= NULL_EPS score 0, as does everything when f is null.
    """
    if matrix.shape[1] != f.shape[0]:
        raise DimensionMismatchError(
            f"dimension mismatch: matrix is {matrix.shape[1]}-d, f is {f.shape[0]}-d"
        )
    fn = float(np.linalg.norm(f))
    if fn <= NULL_EPS:
        return np.zeros(matrix.shape[0])
    if row_norms is None:
        row_norms = np.linalg.norm(matrix, axis=1)
    dots = matrix @ f
    out = np.zeros(matrix.shape[0])
    live = row_norms > NULL_EPS
    np.divide(dots, row_norms * (fn * temperature), out=out, where=live)
    return out
