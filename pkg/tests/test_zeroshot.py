from __future__ import annotations

import numpy as np
import pytest

from pta.errors import ConfigurationError, DimensionMismatchError, ValidationError
from pta.vec import cosine, softmax
from pta.zeroshot import (
    TextAnchors,
    ZeroShotAdapter,
    predict,
    zero_shot_confidence,
    zero_shot_logits,
)


def _anchors(seed: int = 0, C: int = 6, d: int = 32) -> TextAnchors:
    rng = np.random.default_rng(seed)
    return TextAnchors(rng.standard_normal((C, d)))


def test_anchor_rows_normalized_on_construction() -> None:
    a = _anchors()
    norms = np.linalg.norm(a.matrix, axis=1)
    assert norms == pytest.approx(np.ones(a.class_count), abs=1e-12)


def test_anchor_shape_properties() -> None:
    a = _anchors(C=7, d=19)
    assert a.class_count == 7
    assert a.dim == 19


def test_anchors_reject_bad_shapes() -> None:
    with pytest.raises(ValidationError):
        TextAnchors(np.ones(8))
    with pytest.raises(ValidationError):
        TextAnchors(np.ones((1, 8)))


def test_anchors_reject_non_finite_and_null_rows() -> None:
    bad = np.ones((3, 4))
    bad[1, 2] = np.nan
    with pytest.raises(ValidationError):
        TextAnchors(bad)
    with_null = np.ones((3, 4))
    with_null[2] = 0.0
    with pytest.raises(ValidationError):
        TextAnchors(with_null)


def test_anchors_reject_bad_temperature() -> None:
    with pytest.raises(ConfigurationError):
        TextAnchors(np.eye(3), temperature=0.0)


def test_zero_shot_logits_matches_cosine_oracle() -> None:
    a = _anchors(1)
    rng = np.random.default_rng(2)
    for _ in range(50):
        f = rng.standard_normal(a.dim)
        got = zero_shot_logits(f, a)
        want = np.array([cosine(f, row) / a.temperature for row in a.matrix])
        assert got == pytest.approx(want, abs=1e-9)


def test_zero_shot_confidence_is_softmax_of_logits() -> None:
    a = _anchors(3)
    rng = np.random.default_rng(4)
    f = rng.standard_normal(a.dim)
    conf = zero_shot_confidence(f, a)
    assert conf == pytest.approx(softmax(zero_shot_logits(f, a)), abs=1e-12)
    assert conf.sum() == pytest.approx(1.0)


def test_zero_shot_confidence_scale_invariant() -> None:
    a = _anchors(5)
    rng = np.random.default_rng(6)
    f = rng.standard_normal(a.dim)
    assert zero_shot_confidence(3.7 * f, a) == pytest.approx(
        zero_shot_confidence(f, a), abs=1e-12
    )


def test_zero_shot_confidence_null_input_uniform() -> None:
    a = _anchors(7, C=5)
    conf = zero_shot_confidence(np.zeros(a.dim), a)
    assert conf == pytest.approx(np.full(5, 0.2))


def test_predict_lowest_index_on_ties() -> None:
    assert predict(np.array([0.2, 0.4, 0.4])) == 1


def test_anchor_row_input_predicts_that_class() -> None:
    a = _anchors(8)
    for c in range(a.class_count):
        conf = zero_shot_confidence(a.matrix[c], a)
        assert int(np.argmax(conf)) == c


def test_adapter_observe_matches_confidence() -> None:
    a = _anchors(9)
    adapter = ZeroShotAdapter(a)
    rng = np.random.default_rng(10)
    f = rng.standard_normal(a.dim)
    result = adapter.observe(f)
    conf = zero_shot_confidence(f, a)
    assert result.scores == pytest.approx(conf, abs=1e-12)
    assert result.prediction == int(np.argmax(conf))


def test_adapter_is_stateless_across_observations() -> None:
    a = _anchors(11)
    adapter = ZeroShotAdapter(a)
    rng = np.random.default_rng(12)
    f = rng.standard_normal(a.dim)
    first = adapter.observe(f).scores.copy()
    for _ in range(25):
        adapter.observe(rng.standard_normal(a.dim))
    assert np.array_equal(adapter.observe(f).scores, first)
    assert adapter.samples_seen == 27


def test_adapter_rejects_wrong_dim() -> None:
    adapter = ZeroShotAdapter(_anchors(13, d=16))
    with pytest.raises(DimensionMismatchError):
        adapter.observe(np.ones(17))
