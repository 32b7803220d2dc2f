"""Labeled embedding sequence consumed one sample at a time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class Stream:
    embeddings: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int64

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.int64)
        if emb.ndim != 2:
            raise ValidationError(f"embeddings must be 2-D, got shape {emb.shape}")
        if lab.ndim != 1 or lab.shape[0] != emb.shape[0]:
            raise ValidationError(
                f"{lab.shape} labels for {emb.shape[0]} embeddings"
            )
        self.embeddings = emb
        self.labels = lab

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def permuted(self, order) -> "Stream":
        """Same multiset of samples in a different order."""
        idx = np.asarray(order, dtype=np.int64)
        if idx.shape != (len(self),) or sorted(idx.tolist()) != list(range(len(self))):
            raise ValidationError("order must be a permutation of all indices")
        return Stream(self.embeddings[idx].copy(), self.labels[idx].copy())
