"""pve: identity-based audio deepfake verification over embeddings.

A test utterance is accepted as the claimed speaker when its maximum
cosine similarity against a reference set of certified bona fide
embeddings clears a threshold; the package also carries the full
EER / min t-DCF / AUC evaluation stack and the reference-size, histogram
and threshold sweep protocols around that statistic.
"""

__version__ = "0.1.0"

from . import kernels
from .fixture import synthetic_store
from .metrics import (
    CostModel,
    EerResult,
    MetricError,
    MetricsSummary,
    RocCurve,
    accuracy_at,
    auc,
    eer,
    min_tdcf,
    roc,
    summarize,
)
from .protocols import (
    ProtocolError,
    ScoreHistogram,
    SweepResult,
    ThresholdSweepResult,
    default_threshold_grid,
    evaluate,
    histogram,
    reference_sweep,
    score_all,
    threshold_sweep,
)
from .similarity import (
    DEFAULT_THRESHOLD,
    Decision,
    DecisionStatistic,
    TrialError,
    TrialScore,
    Verdict,
    cosine_similarity,
    decide,
    max_similarity,
    score_trials,
)
from .store import (
    EmbeddingStore,
    FormatError,
    IngestError,
    Label,
    ReferenceSet,
    StoreError,
    UtteranceRecord,
    ingest_binary,
    ingest_jsonl,
    reference_set,
    subsample_reference,
    write_binary,
    write_jsonl,
)

__all__ = [
    "__version__",
    "kernels",
    "synthetic_store",
    "CostModel", "EerResult", "MetricError", "MetricsSummary", "RocCurve",
    "accuracy_at", "auc", "eer", "min_tdcf", "roc", "summarize",
    "ProtocolError", "ScoreHistogram", "SweepResult", "ThresholdSweepResult",
    "default_threshold_grid", "evaluate", "histogram", "reference_sweep",
    "score_all", "threshold_sweep",
    "DEFAULT_THRESHOLD", "Decision", "DecisionStatistic", "TrialError",
    "TrialScore", "Verdict", "cosine_similarity", "decide", "max_similarity",
    "score_trials",
    "EmbeddingStore", "FormatError", "IngestError", "Label", "ReferenceSet",
    "StoreError", "UtteranceRecord", "ingest_binary", "ingest_jsonl",
    "reference_set", "subsample_reference", "write_binary", "write_jsonl",
]
