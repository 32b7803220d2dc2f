"""Entropy-filtered cache baseline.

Each class keeps at most `capacity` cached features, admitted by prediction
entropy: a full cache only accepts a sample whose entropy is strictly lower
than the current worst entry, which it replaces (ties evict the oldest).
Retrieval adds an affinity term

    alpha * sum_entries exp(-sharpness * (1 - cos(f, entry)))

to the zero-shot logits before the argmax, so unlike the prototype adapter
this baseline fuses pre-softmax scores and its retrieval work grows with
capacity * class_count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError, ValidationError
from .vec import NULL_EPS, _as_vector, _softmax_stable
from .zeroshot import ObserveResult, TextAnchors


@dataclass(frozen=True)
class CacheConfig:
    capacity: int = 3
    alpha: float = 1.0
    sharpness: float = 5.0

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigurationError(f"capacity must be >= 1, got {self.capacity}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not (self.sharpness > 0 and math.isfinite(self.sharpness)):
            raise ConfigurationError(f"sharpness must be positive, got {self.sharpness}")


@dataclass
class CacheEntry:
    feature: np.ndarray
    entropy: float
    pseudo_label: int
    arrival: int
    slot: int = -1  # row in the adapter's packed matrix


@dataclass
class ClassCache:
    """Entries for one class, kept in arrival order (oldest first)."""

    capacity: int
    entries: list[CacheEntry] = field(default_factory=list)

    def max_entropy(self) -> float:
        return max(e.entropy for e in self.entries)

    def try_insert(self, entry: CacheEntry) -> tuple[bool, CacheEntry | None]:
        """Admit `entry` if there is room or it beats the worst entry.

        Returns (accepted, evicted). Eviction picks the highest-entropy
        entry; on ties the oldest one goes.
        """
        if len(self.entries) < self.capacity:
            self.entries.append(entry)
            return True, None
        worst = 0
        for i in range(1, len(self.entries)):
            if self.entries[i].entropy > self.entries[worst].entropy:
                worst = i
        if entry.entropy < self.entries[worst].entropy:
            evicted = self.entries.pop(worst)
            self.entries.append(entry)
            return True, evicted
        return False, None


def try_insert(cache: ClassCache, entry: CacheEntry) -> bool:
    accepted, _ = cache.try_insert(entry)
    return accepted


def shannon_entropy(confidence) -> float:
    """-sum p ln p in nats, with 0 * ln 0 := 0."""
    p = _as_vector(confidence, "confidence")
    if p.shape[0] == 0:
        raise ValidationError("confidence must be non-empty")
    logs = np.zeros_like(p)
    np.log(p, out=logs, where=p > 0)
    return float(-(p * logs).sum())


def cache_logits(f, caches: list[ClassCache], config: CacheConfig) -> np.ndarray:
    """Per-class affinity term; exactly zero for classes with empty caches."""
    from .vec import cosine

    fv = _as_vector(f, "f")
    out = np.zeros(len(caches))
    for c, cache in enumerate(caches):
        total = 0.0
        for entry in cache.entries:
            total += math.exp(-config.sharpness * (1.0 - cosine(fv, entry.feature)))
        out[c] = config.alpha * total if cache.entries else 0.0
    return out


class CacheAdapter:
    """Streaming baseline with pseudo-labeled entropy-gated caches.

    Keeps a packed (capacity * C) x d matrix mirroring the per-class entry
    lists so retrieval is one matrix-vector product.
    """

    def __init__(self, anchors: TextAnchors, config: CacheConfig | None = None):
        self.anchors = anchors
        self.config = config or CacheConfig()
        C, d = anchors.matrix.shape
        self._C, self._d = C, d
        self._anorms = anchors._row_norms
        M = self.config.capacity
        self.caches = [ClassCache(capacity=M) for _ in range(C)]
        self._packed = np.zeros((C * M, d))
        self._pack_norms = np.zeros(C * M)
        self._occupied = np.zeros(C * M)
        self._arrivals = 0
        self.samples_seen = 0

    @property
    def class_count(self) -> int:
        return self._C

    @property
    def dim(self) -> int:
        return self._d

    def _packed_logits(self, arr: np.ndarray, fn: float) -> np.ndarray:
        cfg = self.config
        sims = self._packed @ arr
        denom = self._pack_norms * fn
        cos = np.zeros_like(sims)
        np.divide(sims, denom, out=cos, where=denom > NULL_EPS)
        np.subtract(1.0, cos, out=cos)
        cos *= -cfg.sharpness
        np.exp(cos, out=cos)
        cos *= self._occupied
        return cfg.alpha * cos.reshape(self._C, cfg.capacity).sum(axis=1)

    def observe(self, f) -> ObserveResult:
        arr = np.asarray(f, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self._d:
            raise DimensionMismatchError(
                f"expected a {self._d}-d embedding, got shape {arr.shape}"
            )
        fn2 = float(arr @ arr)
        if not math.isfinite(fn2):
            raise ValidationError("embedding contains non-finite values")
        fn = math.sqrt(fn2)
        if fn <= NULL_EPS:
            zl = np.zeros(self._C)
        else:
            zl = (self.anchors.matrix @ arr) / (
                self._anorms * (fn * self.anchors.temperature)
            )
        conf = _softmax_stable(zl)
        entropy = shannon_entropy(conf)
        pseudo = int(np.argmax(conf))
        scores = zl + self._packed_logits(arr, fn)
        prediction = int(np.argmax(scores))
        # Prediction is fixed before the sample may enter its pseudo-class
        # cache: a sample never retrieves itself.
        entry = CacheEntry(
            feature=arr.copy(), entropy=entropy, pseudo_label=pseudo,
            arrival=self._arrivals,
        )
        self._arrivals += 1
        cache = self.caches[pseudo]
        accepted, evicted = cache.try_insert(entry)
        if accepted:
            if evicted is None:
                entry.slot = pseudo * self.config.capacity + len(cache.entries) - 1
            else:
                entry.slot = evicted.slot
            self._packed[entry.slot] = arr
            self._pack_norms[entry.slot] = fn
            self._occupied[entry.slot] = 1.0
        self.samples_seen += 1
        return ObserveResult(prediction=prediction, scores=scores)
