"""Online evaluation: run adapters over a stream and account for every sample.

Accuracy numbers are percentages. The online curve follows the convention of
scoring only after a burn-in prefix: the accuracy at checkpoint n covers
samples warmup_skip+1 .. n (1-based), so early flailing is reported separately
as cold_start_accuracy. All timing uses the monotonic perf_counter_ns clock
and wraps observe() only.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import platform
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import adapter as _adapter
from .errors import ValidationError
from .stream import Stream
from .synthetic import ShiftKind, ShiftSpec, make_anchors, sample_stream
from .zeroshot import TextAnchors

log = logging.getLogger(__name__)

# An adapter factory returns a fresh (or explicitly resumed) stateful adapter.
AdapterFactory = Callable[[], object]

DEFAULT_WARMUP_SKIP = 100
DEFAULT_CHECKPOINT_EVERY = 50


@dataclass
class MethodOutcome:
    prediction: int
    correct: bool
    wall_nanos: int


@dataclass
class StreamRecord:
    index: int
    true_label: int
    outcomes: dict[str, MethodOutcome]


@dataclass
class MethodReport:
    method: str
    final_accuracy: float
    cold_start_accuracy: float | None
    online_curve: list[tuple[int, float]]
    mean_latency_ns: float
    median_latency_ns: float
    throughput_per_s: float


@dataclass
class RunReport:
    n_samples: int
    warmup_skip: int
    checkpoint_every: int
    methods: dict[str, MethodReport]
    machine: dict[str, str]
    config_echo: dict | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def machine_descriptor() -> dict[str, str]:
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "clock": "time.perf_counter_ns",
    }


def _check_methods(stream: Stream, adapters: Mapping[str, object]):
    if not adapters:
        raise ValidationError("no methods to run")
    dims = {name: a.dim for name, a in adapters.items()}
    classes = {name: a.class_count for name, a in adapters.items()}
    if len(set(dims.values())) != 1 or len(set(classes.values())) != 1:
        raise ValidationError(f"methods disagree on shape: dims={dims}, classes={classes}")
    d = next(iter(dims.values()))
    C = next(iter(classes.values()))
    if stream.dim != d:
        raise ValidationError(f"stream is {stream.dim}-d but methods expect {d}-d")
    if len(stream) and (stream.labels.min() < 0 or stream.labels.max() >= C):
        raise ValidationError(
            f"labels must lie in [0, {C}), got range "
            f"[{stream.labels.min()}, {stream.labels.max()}]"
        )


def _consume(stream: Stream, method) -> tuple[np.ndarray, np.ndarray]:
    """Run one adapter over the whole stream; returns (predictions, nanos)."""
    n = len(stream)
    preds = np.empty(n, dtype=np.int64)
    nanos = np.empty(n, dtype=np.int64)
    observe = method.observe
    emb = stream.embeddings
    clock = time.perf_counter_ns
    for i in range(n):
        row = emb[i]
        t0 = clock()
        res = observe(row)
        t1 = clock()
        preds[i] = res.prediction
        nanos[i] = t1 - t0
    return preds, nanos


def _accuracy(correct: np.ndarray) -> float:
    return 100.0 * float(correct.mean()) if correct.size else 0.0


def run_stream(
    stream: Stream,
    methods: Mapping[str, AdapterFactory],
    warmup_skip: int = DEFAULT_WARMUP_SKIP,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    config_echo: dict | None = None,
) -> tuple[RunReport, list[StreamRecord]]:
    """Evaluate every method on the identical sample order.

    Methods run one after another (method-major) so each gets clean timing;
    the stream itself is never mutated.
    """
    if warmup_skip < 0 or checkpoint_every < 1:
        raise ValidationError(
            f"bad windows: warmup_skip={warmup_skip}, checkpoint_every={checkpoint_every}"
        )
    adapters = {name: factory() for name, factory in methods.items()}
    _check_methods(stream, adapters)
    n = len(stream)
    labels = stream.labels
    per_method: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name, method in adapters.items():
        per_method[name] = _consume(stream, method)

    checkpoints = sorted(set(range(checkpoint_every, n + 1, checkpoint_every)) | {n})
    reports: dict[str, MethodReport] = {}
    for name, (preds, nanos) in per_method.items():
        correct = preds == labels
        curve = [
            (ckpt, _accuracy(correct[warmup_skip:ckpt]))
            for ckpt in checkpoints
            if ckpt > warmup_skip
        ]
        cold = _accuracy(correct[: min(warmup_skip, n)]) if warmup_skip else None
        total_s = float(nanos.sum()) / 1e9
        reports[name] = MethodReport(
            method=name,
            final_accuracy=_accuracy(correct),
            cold_start_accuracy=cold,
            online_curve=curve,
            mean_latency_ns=float(nanos.mean()),
            median_latency_ns=float(np.median(nanos)),
            throughput_per_s=n / total_s if total_s > 0 else float("inf"),
        )

    records = [
        StreamRecord(
            index=i,
            true_label=int(labels[i]),
            outcomes={
                name: MethodOutcome(
                    prediction=int(per_method[name][0][i]),
                    correct=bool(per_method[name][0][i] == labels[i]),
                    wall_nanos=int(per_method[name][1][i]),
                )
                for name in per_method
            },
        )
        for i in range(n)
    ]
    report = RunReport(
        n_samples=n,
        warmup_skip=warmup_skip,
        checkpoint_every=checkpoint_every,
        methods=reports,
        machine=machine_descriptor(),
        config_echo=config_echo,
    )
    return report, records


def window_accuracy(records: list[StreamRecord], method: str, lo: int, hi: int) -> float:
    """Accuracy (%) of `method` over 0-based sample positions [lo, hi)."""
    window = records[lo:hi]
    if not window:
        raise ValidationError(f"empty window [{lo}, {hi})")
    hits = sum(1 for r in window if r.outcomes[method].correct)
    return 100.0 * hits / len(window)


@dataclass
class OrderRobustness:
    accuracies: list[float]
    mean: float
    std: float  # sample std (ddof=1)


def order_robustness(
    stream: Stream,
    factory: AdapterFactory,
    shuffles: int = 5,
    seed: int = 0,
) -> OrderRobustness:
    """Final accuracy across seeded permutations of the same sample multiset.

    Every permutation starts from fresh adapter state.
    """
    if shuffles < 2:
        raise ValidationError(f"need at least 2 shuffles, got {shuffles}")
    rng = np.random.default_rng(seed)
    labels = stream.labels
    accs = []
    for _ in range(shuffles):
        perm = rng.permutation(len(stream))
        method = factory()
        preds, _ = _consume(stream.permuted(perm), method)
        accs.append(_accuracy(preds == labels[perm]))
    mean = float(np.mean(accs))
    std = float(np.std(accs, ddof=1))
    return OrderRobustness(accuracies=accs, mean=mean, std=std)


@dataclass
class SweepRow:
    param: str
    value: float
    final_accuracy: float | None
    status: str  # "ok" or "skipped"


def _sweep_cell(args) -> SweepRow:
    param, value, config, anchors, stream, warmup_skip = args
    try:
        cfg = dataclasses.replace(config, **{param: value})
    except ValidationError as exc:  # out-of-range h or w
        log.warning("sweep: skipping %s=%r (%s)", param, value, exc)
        return SweepRow(param=param, value=value, final_accuracy=None, status="skipped")
    method = _adapter.PtaAdapter(anchors, cfg)
    preds, _ = _consume(stream, method)
    return SweepRow(
        param=param,
        value=value,
        final_accuracy=_accuracy(preds == stream.labels),
        status="ok",
    )


def sweep(
    anchors: TextAnchors,
    stream: Stream,
    param: str,
    values: list[float],
    config: "_adapter.PtaConfig | None" = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Grid over h or w; invalid values yield a skipped row, not an error."""
    if param not in ("h", "w"):
        raise ValidationError(f"sweep param must be 'h' or 'w', got {param!r}")
    if not values:
        raise ValidationError("sweep needs at least one value")
    config = config or _adapter.PtaConfig()
    cells = [(param, v, config, anchors, stream, DEFAULT_WARMUP_SKIP) for v in values]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]


@dataclass
class BenchMethodResult:
    times_ns: np.ndarray
    throughput_steady_per_s: float  # excludes the first 10% as warm-up
    cost_curve: list[tuple[int, float, float]]  # (decile, mean_ns, median_ns)


@dataclass
class BenchReport:
    class_count: int
    dim: int
    n_samples: int
    methods: dict[str, BenchMethodResult]
    machine: dict[str, str]

    def ratio(self, a: str, b: str) -> float:
        """Throughput of a relative to b."""
        return (
            self.methods[a].throughput_steady_per_s
            / self.methods[b].throughput_steady_per_s
        )


def bench_throughput(
    method_builders: Mapping[str, Callable[[TextAnchors], object]],
    class_count: int,
    dim: int,
    n_samples: int,
    anchor_seed: int = 2024,
    order_seed: int = 2025,
) -> BenchReport:
    """Time observe() over a synthesized throwaway stream at (C, d, N)."""
    if n_samples < 100:
        raise ValidationError(f"bench needs at least 100 samples, got {n_samples}")
    spec = ShiftSpec(
        class_count=class_count,
        dim=dim,
        stream_length=n_samples,
        noise_sigma=0.25,
        shift_kind=ShiftKind.NONE,
        anchor_seed=anchor_seed,
        order_seed=order_seed,
    )
    anchors = make_anchors(spec)
    stream = sample_stream(spec, anchors)
    results: dict[str, BenchMethodResult] = {}
    for name, builder in method_builders.items():
        method = builder(anchors)
        _, nanos = _consume(stream, method)
        warm = nanos[n_samples // 10 :]
        edges = np.linspace(0, n_samples, 11, dtype=int)
        curve = [
            (i, float(nanos[a:b].mean()), float(np.median(nanos[a:b])))
            for i, (a, b) in enumerate(zip(edges[:-1], edges[1:]))
        ]
        results[name] = BenchMethodResult(
            times_ns=nanos,
            throughput_steady_per_s=len(warm) / (float(warm.sum()) / 1e9),
            cost_curve=curve,
        )
    return BenchReport(
        class_count=class_count,
        dim=dim,
        n_samples=n_samples,
        methods=results,
        machine=machine_descriptor(),
    )


def beta_vs_raw_s_ablation(
    anchors: TextAnchors,
    stream: Stream,
    config: "_adapter.PtaConfig | None" = None,
) -> dict[str, float]:
    """Final accuracy with the saturating decay vs. raw confidence decay."""
    config = config or _adapter.PtaConfig()
    out = {}
    for label, mode in (
        ("adaptive", _adapter.DecayMode.ADAPTIVE),
        ("raw-confidence", _adapter.DecayMode.RAW_CONFIDENCE),
    ):
        cfg = dataclasses.replace(config, decay_mode=mode)
        method = _adapter.PtaAdapter(anchors, cfg)
        preds, _ = _consume(stream, method)
        out[label] = _accuracy(preds == stream.labels)
    return out
