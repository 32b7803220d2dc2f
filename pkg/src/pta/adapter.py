"""Streaming prototype adaptation.

Per observed sample, the adapter computes the zero-shot class posterior s,
turns it into per-class decay weights

    beta_j = 1 - exp(-s_j / h),

and folds the sample into every class prototype row

    P_j <- (1 - beta_j) * P_j + beta_j * f.

Predictions score the sample against anchor-interpolated prototypes

    P_a = (1 - w) * P_t + w * A

and fuse the prototype posterior with the zero-shot posterior by adding the
two probability vectors (the fused scores sum to 2).

State representation
--------------------
The EMA touches all C rows every sample. Rewriting row j as
P_j = g_j * R_j with g_j the running product of (1 - beta_j) turns the decay
into an O(C) scalar update, and the additive term into a rank-1 update
R_j += (beta_j / g_j) * f that can be buffered and applied as one exact f64
GEMM every _FLUSH_EVERY samples. Row norms and anchor dot products needed for
cosine scoring are tracked by O(C) recurrences, so a single observe() costs
two matrix-vector products plus O(C + d) bookkeeping regardless of
samples_seen. The arithmetic is associativity-reordered but stays f64 end to
end; scores may optionally use an f32 shadow of the flushed residual matrix
(mixed_precision_scores), which never feeds back into state.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionMismatchError, ValidationError
from .vec import NULL_EPS, _as_vector, _softmax_stable, cosine_logits
from .zeroshot import ObserveResult, TextAnchors

# Deferred rank-1 updates are applied in blocks of this many samples.
_FLUSH_EVERY = 64
# Running decay products below this trigger a per-row rescale at flush time.
# The floor keeps residual entries (~ 1/g) far inside float32 range so the
# score shadow can never overflow, even under raw-confidence decay where a
# single step can shrink g by ~1e-16.
_RESCALE_FLOOR = 1e-30


class UpdateOrder(enum.Enum):
    UPDATE_THEN_PREDICT = "update-then-predict"
    PREDICT_THEN_UPDATE = "predict-then-update"


class AnchorMode(enum.Enum):
    FIXED = "fixed"
    RECURRENT = "recurrent"


class ScoreMode(enum.Enum):
    FUSED = "fused"
    PROTOTYPE_ONLY = "prototype-only"


class DecayMode(enum.Enum):
    ADAPTIVE = "adaptive"
    RAW_CONFIDENCE = "raw-confidence"


@dataclass(frozen=True)
class PtaConfig:
    """Adapter knobs. Defaults follow the reference operating point."""

    h: float = 20.0
    w: float = 0.01
    tau: float = 0.01
    update_order: UpdateOrder = UpdateOrder.UPDATE_THEN_PREDICT
    anchor_mode: AnchorMode = AnchorMode.FIXED
    score_mode: ScoreMode = ScoreMode.FUSED
    decay_mode: DecayMode = DecayMode.ADAPTIVE
    fast_state: bool = True
    mixed_precision_scores: bool = True

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigurationError(f"h must be positive and finite, got {self.h}")
        if not (0.0 <= self.w <= 1.0):
            raise ConfigurationError(f"w must lie in [0, 1], got {self.w}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigurationError(f"tau must be positive and finite, got {self.tau}")


def adaptive_weights(s, h: float = 20.0) -> np.ndarray:
    """Per-class decay weights beta_j = 1 - exp(-s_j / h).

    Zero confidence maps to exactly zero weight; a full simplex mass of 1
    maps to the saturation value 1 - exp(-1/h).
    """
    if not (h > 0 and math.isfinite(h)):
        raise ConfigurationError(f"h must be positive and finite, got {h}")
    arr = _as_vector(s, "s")
    return -np.expm1(-arr / h)


def ema_update(prototypes, f, beta) -> np.ndarray:
    """One decay step on every row: (1 - beta_j) * P_j + beta_j * f."""
    P = np.asarray(prototypes, dtype=np.float64)
    fv = _as_vector(f, "f")
    b = _as_vector(beta, "beta")
    if P.ndim != 2:
        raise ValidationError(f"prototypes must be 2-D, got shape {P.shape}")
    if P.shape[1] != fv.shape[0]:
        raise DimensionMismatchError(
            f"prototypes are {P.shape[1]}-d, f is {fv.shape[0]}-d"
        )
    if b.shape[0] != P.shape[0]:
        raise DimensionMismatchError(
            f"{b.shape[0]} weights for {P.shape[0]} prototype rows"
        )
    if not np.all(np.isfinite(P)):
        raise ValidationError("prototypes contain non-finite values")
    if b.min() < 0.0 or b.max() > 1.0:
        raise ValidationError("decay weights must lie in [0, 1]")
    return (1.0 - b)[:, None] * P + b[:, None] * fv


def interpolate_prototypes(prototypes, anchors_matrix, w: float) -> np.ndarray:
    """(1 - w) * P_t + w * A. Endpoints are exact: w=0 gives P_t, w=1 gives A."""
    if not (0.0 <= w <= 1.0):
        raise ConfigurationError(f"w must lie in [0, 1], got {w}")
    P = np.asarray(prototypes, dtype=np.float64)
    A = np.asarray(anchors_matrix, dtype=np.float64)
    if P.shape != A.shape:
        raise DimensionMismatchError(
            f"prototype shape {P.shape} != anchor shape {A.shape}"
        )
    return (1.0 - w) * P + w * A


def prototype_confidence(f, prototypes, tau: float = 0.01) -> np.ndarray:
    """Softmax over cos(f, P_c) / tau. Null rows (and a null f) score 0."""
    if not (tau > 0 and math.isfinite(tau)):
        raise ConfigurationError(f"tau must be positive and finite, got {tau}")
    fv = _as_vector(f, "f")
    P = np.asarray(prototypes, dtype=np.float64)
    if P.ndim != 2:
        raise ValidationError(f"prototypes must be 2-D, got shape {P.shape}")
    return _softmax_stable(cosine_logits(fv, P, tau))


def fused_prediction(p_clip, p_proto) -> tuple[np.ndarray, int]:
    """Add the two posteriors and take the argmax (lowest index on ties)."""
    a = _as_vector(p_clip, "p_clip")
    b = _as_vector(p_proto, "p_proto")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"posterior lengths differ: {a.shape[0]} vs {b.shape[0]}"
        )
    scores = a + b
    return scores, int(np.argmax(scores))


class PtaAdapter:
    """Stateful streaming adapter around a fixed anchor set."""

    def __init__(self, anchors: TextAnchors, config: PtaConfig | None = None):
        self.anchors = anchors
        self.config = config or PtaConfig()
        self.samples_seen = 0
        C, d = anchors.matrix.shape
        self._C, self._d = C, d
        self._anorms = anchors._row_norms
        cfg = self.config
        # Per-config constants for the interpolated-prototype norm:
        # ||P_a_c||^2 = (1-w)^2 ||P_c||^2 + 2 w (1-w) (P_c . A_c) + w^2 ||A_c||^2
        self._wm1 = 1.0 - cfg.w
        self._c_nsq = self._wm1 * self._wm1
        self._c_q = 2.0 * cfg.w * self._wm1
        self._c_anchor = (cfg.w * cfg.w) * (self._anorms * self._anorms)
        self._fast = cfg.fast_state and cfg.anchor_mode is AnchorMode.FIXED
        if self._fast:
            self._g = np.ones(C)
            self._R = np.zeros((C, d))
            self._R32 = np.zeros((C, d), dtype=np.float32) if cfg.mixed_precision_scores else None
            self._nsq = np.zeros(C)  # ||P_c||^2
            self._q = np.zeros(C)  # P_c . A_c
            # Buffered coefficients live transposed (sample-major) so both
            # the per-step append and the correction product stay contiguous.
            self._buf_coeff = np.zeros((_FLUSH_EVERY, C))
            self._buf_feat = np.zeros((_FLUSH_EVERY, d))
            self._buf_n = 0
        else:
            self._P = np.zeros((C, d))
            # Recurrent interpolation decays the anchors toward P_t over time.
            self._Pa = anchors.matrix.copy() if cfg.anchor_mode is AnchorMode.RECURRENT else None

    @property
    def class_count(self) -> int:
        return self._C

    @property
    def dim(self) -> int:
        return self._d

    @property
    def prototypes(self) -> np.ndarray:
        """Materialized P_t (C x d copy)."""
        if self._fast:
            self._flush()
            return self._g[:, None] * self._R
        return self._P.copy()

    @property
    def anchor_state(self) -> np.ndarray:
        """Current interpolation target P_a."""
        if self.config.anchor_mode is AnchorMode.RECURRENT:
            return self._Pa.copy()
        return interpolate_prototypes(self.prototypes, self.anchors.matrix, self.config.w)

    # -- streaming -----------------------------------------------------------

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
        cfg = self.config
        araw = self.anchors.matrix @ arr
        if fn <= NULL_EPS:
            zl = np.zeros(self._C)
        else:
            zl = araw / (self._anorms * (fn * self.anchors.temperature))
        s = _softmax_stable(zl)
        if cfg.decay_mode is DecayMode.ADAPTIVE:
            beta = -np.expm1(-s / cfg.h)
        else:
            beta = s
        if self._fast:
            result = self._observe_fast(arr, araw, s, beta, fn, fn2)
        else:
            result = self._observe_dense(arr, s, beta, fn)
        self.samples_seen += 1
        return result

    # -- fast path: P = diag(g) @ (R + pending rank-1 block) ------------------

    def _proto_dot(self, arr: np.ndarray) -> np.ndarray:
        """u_c = P_c . f under the scaled representation."""
        if self._R32 is not None:
            base = (self._R32 @ arr.astype(np.float32)).astype(np.float64)
        else:
            base = self._R @ arr
        k = self._buf_n
        if k:
            base += (self._buf_feat[:k] @ arr) @ self._buf_coeff[:k]
        base *= self._g
        return base

    def _observe_fast(self, arr, araw, s, beta, fn, fn2) -> ObserveResult:
        u_old = self._proto_dot(arr)
        if self.config.update_order is UpdateOrder.UPDATE_THEN_PREDICT:
            u = self._apply_update(arr, araw, beta, u_old, fn2)
            return self._score_fast(araw, s, u, self._nsq, self._q, fn)
        result = self._score_fast(araw, s, u_old, self._nsq, self._q, fn)
        self._apply_update(arr, araw, beta, u_old, fn2)
        return result

    def _apply_update(self, arr, araw, beta, u_old, fn2) -> np.ndarray:
        """Fold one sample into the scaled state; returns post-update P . f."""
        om = 1.0 - beta
        zero = om == 0.0
        any_zero = bool(zero.any())
        if any_zero:
            # beta_j = 1 (raw-confidence decay on a saturated posterior)
            # replaces row j outright: P_j = f.
            self._flush()
        g = self._g
        g *= om
        if any_zero:
            g[zero] = 1.0
        if float(g.min()) < _RESCALE_FLOOR:
            # Fold pending updates and rescale the collapsed rows before the
            # division below can blow up the residuals.
            self._flush()
        coeff = beta / g
        nsq = self._nsq
        nsq *= om
        nsq += (2.0 * beta) * u_old
        nsq *= om
        nsq += (beta * beta) * fn2
        q = self._q
        q *= om
        q += beta * araw
        u_new = om * u_old
        u_new += beta * fn2
        if any_zero:
            coeff[zero] = 0.0
            nsq[zero] = fn2
            q[zero] = araw[zero]
            u_new[zero] = fn2
            self._R[zero] = arr
            if self._R32 is not None:
                self._R32[zero] = arr
        k = self._buf_n
        self._buf_coeff[k] = coeff
        self._buf_feat[k] = arr
        self._buf_n = k + 1
        if self._buf_n == _FLUSH_EVERY:
            self._flush()
        return u_new

    def _flush(self):
        k = self._buf_n
        if k:
            self._R += self._buf_coeff[:k].T @ self._buf_feat[:k]
            self._buf_n = 0
            if self._R32 is not None:
                self._R32[...] = self._R
        small = self._g < _RESCALE_FLOOR
        if small.any():
            self._R[small] *= self._g[small, None]
            self._g[small] = 1.0
            if self._R32 is not None:
                self._R32[small] = self._R[small]

    def _score_fast(self, araw, s, u, nsq, q, fn) -> ObserveResult:
        cfg = self.config
        C = self._C
        if fn <= NULL_EPS:
            pl = np.zeros(C)
        else:
            pd = self._wm1 * u
            pd += cfg.w * araw
            pnsq = self._c_nsq * nsq
            pnsq += self._c_q * q
            pnsq += self._c_anchor
            np.maximum(pnsq, 0.0, out=pnsq)
            pn = np.sqrt(pnsq)
            pl = np.zeros(C)
            np.divide(pd, pn * (fn * cfg.tau), out=pl, where=pn > NULL_EPS)
        p_proto = _softmax_stable(pl)
        if cfg.score_mode is ScoreMode.FUSED:
            scores = s + p_proto
        else:
            scores = p_proto
        return ObserveResult(prediction=int(np.argmax(scores)), scores=scores)

    # -- dense reference path --------------------------------------------------

    def _observe_dense(self, arr, s, beta, fn) -> ObserveResult:
        if self.config.update_order is UpdateOrder.UPDATE_THEN_PREDICT:
            self._update_dense(arr, beta)
            return self._score_dense(arr, s)
        result = self._score_dense(arr, s)
        self._update_dense(arr, beta)
        return result

    def _update_dense(self, arr, beta):
        P = self._P
        P *= (1.0 - beta)[:, None]
        P += beta[:, None] * arr

    def _score_dense(self, arr, s) -> ObserveResult:
        cfg = self.config
        if cfg.anchor_mode is AnchorMode.RECURRENT:
            self._Pa *= cfg.w
            self._Pa += self._wm1 * self._P
            target = self._Pa
        else:
            target = interpolate_prototypes(self._P, self.anchors.matrix, cfg.w)
        p_proto = _softmax_stable(cosine_logits(arr, target, cfg.tau))
        if cfg.score_mode is ScoreMode.FUSED:
            scores = s + p_proto
        else:
            scores = p_proto
        return ObserveResult(prediction=int(np.argmax(scores)), scores=scores)

    # -- snapshots -------------------------------------------------------------

    def save(self, base_path: str | os.PathLike):
        """Write <base>.protos.ptae (+ <base>.anchor.ptae) and <base>.meta.json.

        Prototypes round to f32 on disk; resuming restarts the f64
        accumulation from the rounded matrix.
        """
        from . import ptae

        base = os.fspath(base_path)
        cfg = self.config
        ptae.write_embeddings(base + ".protos.ptae", ptae.KIND_PROTOTYPES, self.prototypes)
        if cfg.anchor_mode is AnchorMode.RECURRENT:
            ptae.write_embeddings(base + ".anchor.ptae", ptae.KIND_PROTOTYPES, self._Pa)
        meta = {
            "format": 1,
            "samples_seen": self.samples_seen,
            "h": cfg.h,
            "w": cfg.w,
            "tau": cfg.tau,
            "update_order": cfg.update_order.value,
            "anchor_mode": cfg.anchor_mode.value,
            "score_mode": cfg.score_mode.value,
            "decay_mode": cfg.decay_mode.value,
        }
        with open(base + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, anchors: TextAnchors, base_path: str | os.PathLike) -> "PtaAdapter":
        from . import ptae

        base = os.fspath(base_path)
        with open(base + ".meta.json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        config = PtaConfig(
            h=meta["h"],
            w=meta["w"],
            tau=meta["tau"],
            update_order=UpdateOrder(meta["update_order"]),
            anchor_mode=AnchorMode(meta["anchor_mode"]),
            score_mode=ScoreMode(meta["score_mode"]),
            decay_mode=DecayMode(meta["decay_mode"]),
        )
        loaded = ptae.read_embeddings(base + ".protos.ptae", normalize_on_ingest=False)
        P = loaded.matrix
        if P.shape != anchors.matrix.shape:
            raise DimensionMismatchError(
                f"snapshot shape {P.shape} does not match anchors {anchors.matrix.shape}"
            )
        adapter = cls(anchors, config)
        adapter.samples_seen = int(meta["samples_seen"])
        if adapter._fast:
            adapter._R[...] = P
            if adapter._R32 is not None:
                adapter._R32[...] = P
            adapter._nsq[...] = np.einsum("cd,cd->c", P, P)
            adapter._q[...] = np.einsum("cd,cd->c", P, anchors.matrix)
        else:
            adapter._P[...] = P
            if config.anchor_mode is AnchorMode.RECURRENT:
                pa = ptae.read_embeddings(base + ".anchor.ptae", normalize_on_ingest=False)
                adapter._Pa[...] = pa.matrix
        return adapter
