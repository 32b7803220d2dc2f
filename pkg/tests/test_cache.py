from __future__ import annotations

import math

import numpy as np
import pytest

from pta.cache import (
    CacheAdapter,
    CacheConfig,
    CacheEntry,
    ClassCache,
    cache_logits,
    shannon_entropy,
    try_insert,
)
from pta.errors import ConfigurationError, DimensionMismatchError
from pta.zeroshot import TextAnchors, zero_shot_logits


def _anchors(seed: int = 0, C: int = 6, d: int = 32) -> TextAnchors:
    rng = np.random.default_rng(seed)
    return TextAnchors(rng.standard_normal((C, d)))


def _entry(entropy: float, arrival: int, d: int = 4) -> CacheEntry:
    return CacheEntry(
        feature=np.ones(d), entropy=entropy, pseudo_label=0, arrival=arrival
    )


def test_entropy_uniform_is_log_c() -> None:
    assert shannon_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4), abs=1e-12)
    assert shannon_entropy(np.full(10, 0.1)) == pytest.approx(math.log(10), abs=1e-12)


def test_entropy_one_hot_is_exactly_zero() -> None:
    assert shannon_entropy(np.array([0.0, 1.0, 0.0])) == 0.0


def test_entropy_two_mass_is_log_two() -> None:
    assert shannon_entropy(np.array([0.5, 0.5, 0.0])) == pytest.approx(math.log(2), abs=1e-12)


def test_cache_config_validation() -> None:
    with pytest.raises(ConfigurationError):
        CacheConfig(capacity=0)
    with pytest.raises(ConfigurationError):
        CacheConfig(alpha=0.0)
    with pytest.raises(ConfigurationError):
        CacheConfig(sharpness=-1.0)


def test_insert_below_capacity_always_accepts() -> None:
    cache = ClassCache(capacity=3)
    assert try_insert(cache, _entry(9.0, 0))
    assert try_insert(cache, _entry(9.5, 1))
    assert try_insert(cache, _entry(9.9, 2))
    assert len(cache.entries) == 3


def test_full_cache_rejects_higher_entropy() -> None:
    cache = ClassCache(capacity=2)
    try_insert(cache, _entry(0.5, 0))
    try_insert(cache, _entry(0.6, 1))
    assert not try_insert(cache, _entry(0.7, 2))
    assert len(cache.entries) == 2


def test_full_cache_rejects_equal_entropy() -> None:
    # Admission requires strictly lower entropy than the worst entry.
    cache = ClassCache(capacity=1)
    try_insert(cache, _entry(0.5, 0))
    assert not try_insert(cache, _entry(0.5, 1))
    assert cache.entries[0].arrival == 0


def test_full_cache_evicts_worst_entry() -> None:
    cache = ClassCache(capacity=3)
    try_insert(cache, _entry(0.2, 0))
    try_insert(cache, _entry(0.9, 1))
    try_insert(cache, _entry(0.5, 2))
    accepted, evicted = cache.try_insert(_entry(0.1, 3))
    assert accepted
    assert evicted is not None
    assert evicted.entropy == 0.9
    assert {e.arrival for e in cache.entries} == {0, 2, 3}


def test_eviction_tie_removes_oldest() -> None:
    cache = ClassCache(capacity=3)
    try_insert(cache, _entry(0.9, 0))
    try_insert(cache, _entry(0.9, 1))
    try_insert(cache, _entry(0.9, 2))
    accepted, evicted = cache.try_insert(_entry(0.1, 3))
    assert accepted
    assert evicted.arrival == 0


def test_capacity_never_exceeded_under_pressure() -> None:
    rng = np.random.default_rng(7)
    cache = ClassCache(capacity=3)
    for i in range(500):
        try_insert(cache, _entry(float(rng.uniform(0, 2)), i))
        assert len(cache.entries) <= 3
    # Long runs converge on the lowest-entropy survivors.
    assert cache.max_entropy() < 0.2


def test_cache_logits_empty_caches_zero() -> None:
    caches = [ClassCache(capacity=2) for _ in range(4)]
    out = cache_logits(np.ones(8), caches, CacheConfig())
    assert np.array_equal(out, np.zeros(4))


def test_cache_logits_single_identical_entry() -> None:
    # cos = 1 against itself: affinity is alpha * exp(0) = alpha.
    cfg = CacheConfig(capacity=1, alpha=2.5, sharpness=5.0)
    caches = [ClassCache(capacity=1) for _ in range(2)]
    f = np.array([1.0, 2.0, 3.0])
    caches[0].entries.append(
        CacheEntry(feature=f.copy(), entropy=0.1, pseudo_label=0, arrival=0)
    )
    out = cache_logits(f, caches, cfg)
    assert out[0] == pytest.approx(2.5, abs=1e-12)
    assert out[1] == 0.0


def test_adapter_empty_cache_scores_equal_zero_shot_logits() -> None:
    a = _anchors(1)
    adapter = CacheAdapter(a)
    rng = np.random.default_rng(2)
    f = rng.standard_normal(a.dim)
    result = adapter.observe(f)
    assert result.scores == pytest.approx(zero_shot_logits(f, a), abs=1e-9)
    assert result.prediction == int(np.argmax(zero_shot_logits(f, a)))


def test_adapter_packed_retrieval_matches_brute_force() -> None:
    # Maintain an independent copy of the cache state with the documented
    # list operations and the slow per-entry affinity formula.
    from pta.zeroshot import zero_shot_confidence

    a = _anchors(3, C=5, d=24)
    cfg = CacheConfig(capacity=3)
    adapter = CacheAdapter(a, cfg)
    mirror = [ClassCache(capacity=3) for _ in range(a.class_count)]
    rng = np.random.default_rng(4)
    for i in range(200):
        f = rng.standard_normal(a.dim)
        f /= np.linalg.norm(f)
        got = adapter.observe(f).scores
        want = zero_shot_logits(f, a) + cache_logits(f, mirror, cfg)
        assert got == pytest.approx(want, abs=1e-9)
        conf = zero_shot_confidence(f, a)
        mirror[int(np.argmax(conf))].try_insert(
            CacheEntry(
                feature=f.copy(),
                entropy=shannon_entropy(conf),
                pseudo_label=int(np.argmax(conf)),
                arrival=i,
            )
        )


def test_adapter_sample_never_retrieves_itself() -> None:
    a = _anchors(5, C=3, d=16)
    adapter = CacheAdapter(a)
    f = a.matrix[0].copy()
    first = adapter.observe(f)
    assert first.scores == pytest.approx(zero_shot_logits(f, a), abs=1e-9)
    # The same feature immediately afterwards does retrieve the cached copy.
    second = adapter.observe(f)
    assert second.scores[0] > first.scores[0] + 0.5


def test_adapter_entropy_gate_blocks_diffuse_samples() -> None:
    a = _anchors(6, C=4, d=32)
    adapter = CacheAdapter(a, CacheConfig(capacity=1))
    confident = a.matrix[1].copy()
    adapter.observe(confident)
    kept = adapter.caches[1].entries[0]
    rng = np.random.default_rng(7)
    # A diffuse sample leaning class 1 must not displace the confident one.
    diffuse = confident + 5.0 * rng.standard_normal(a.dim)
    diffuse /= np.linalg.norm(diffuse)
    for _ in range(20):
        adapter.observe(diffuse)
    assert adapter.caches[1].entries[0] is kept


def test_adapter_packed_state_consistency_after_evictions() -> None:
    a = _anchors(8, C=4, d=16)
    adapter = CacheAdapter(a, CacheConfig(capacity=2))
    rng = np.random.default_rng(9)
    for _ in range(300):
        f = rng.standard_normal(a.dim)
        adapter.observe(f / np.linalg.norm(f))
    M = adapter.config.capacity
    for c, cache in enumerate(adapter.caches):
        assert len(cache.entries) <= M
        for e in cache.entries:
            assert c * M <= e.slot < (c + 1) * M
            assert adapter._occupied[e.slot] == 1.0
            assert np.array_equal(adapter._packed[e.slot], e.feature)
    occupied_slots = {e.slot for cache in adapter.caches for e in cache.entries}
    assert int(adapter._occupied.sum()) == len(occupied_slots)


def test_adapter_rejects_wrong_dim() -> None:
    adapter = CacheAdapter(_anchors(10, d=8))
    with pytest.raises(DimensionMismatchError):
        adapter.observe(np.ones(9))


def test_adapter_null_embedding_is_safe() -> None:
    a = _anchors(11, C=4)
    adapter = CacheAdapter(a)
    adapter.observe(a.matrix[0])
    result = adapter.observe(np.zeros(a.dim))
    assert np.all(np.isfinite(result.scores))
    # cos := 0 for the null input, so each occupied entry contributes
    # alpha * exp(-sharpness).
    expected = adapter.config.alpha * math.exp(-adapter.config.sharpness)
    assert result.scores[0] == pytest.approx(expected, abs=1e-12)
