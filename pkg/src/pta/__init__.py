"""Streaming test-time adaptation for frozen embedding classifiers.

Zero-shot scoring, a prototype EMA adapter with anchor interpolation, an
entropy-cache baseline, a synthetic shifted-stream generator, an online
evaluation harness, and the PTAE file format.
"""

from .adapter import (
    AnchorMode,
    DecayMode,
    PtaAdapter,
    PtaConfig,
    ScoreMode,
    UpdateOrder,
    adaptive_weights,
    ema_update,
    fused_prediction,
    interpolate_prototypes,
    prototype_confidence,
)
from .cache import (
    CacheAdapter,
    CacheConfig,
    CacheEntry,
    ClassCache,
    cache_logits,
    shannon_entropy,
    try_insert,
)
from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    FormatError,
    ValidationError,
)
from .harness import (
    BenchReport,
    OrderRobustness,
    RunReport,
    StreamRecord,
    SweepRow,
    bench_throughput,
    beta_vs_raw_s_ablation,
    machine_descriptor,
    order_robustness,
    run_stream,
    sweep,
    window_accuracy,
)
from .ptae import (
    EmbeddingFile,
    PtaeHeader,
    append_results,
    read_embeddings,
    read_results,
    write_curve_csv,
    write_embeddings,
)
from .stream import Stream
from .synthetic import (
    LabelDistribution,
    ShiftKind,
    ShiftSpec,
    make_anchors,
    sample_stream,
    severity_ladder,
    shifted_anchors,
)
from .vec import cosine, l2_normalize, softmax
from .zeroshot import (
    ObserveResult,
    TextAnchors,
    ZeroShotAdapter,
    predict,
    zero_shot_confidence,
    zero_shot_logits,
)

__version__ = "0.1.0"
