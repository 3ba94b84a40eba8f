"""Decision procedure: cosine similarity, max-similarity statistic, verdict.

An utterance is verified against the claimed identity's reference set of
bona fide embeddings: the decision statistic is the maximum cosine
similarity between the test vector and all reference vectors, compared to a
threshold (score >= threshold accepts as real; the boundary accepts).

When a bona fide test utterance is itself a member of the claimed
identity's pool it is excluded from its own reference set before scoring
(leave-one-out), so self-matches cannot trivially score 1.0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .store import EmbeddingStore, Label, ReferenceSet, StoreError

DEFAULT_THRESHOLD = 0.85


class Decision(enum.Enum):
    REAL = "real"
    FAKE = "fake"


@dataclass(frozen=True)
class DecisionStatistic:
    """Max cosine score over a reference set and the reference achieving it.

    Ties resolve to the lexicographically smallest utterance_id; the value is
    tie-insensitive.
    """

    value: float
    argmax_reference: str


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    statistic: DecisionStatistic
    threshold: float


@dataclass(frozen=True)
class TrialScore:
    utterance_id: str
    claimed_identity: str
    score: float
    argmax_reference: str
    label: Label

    def to_dict(self):
        return {
            "utterance_id": self.utterance_id,
            "claimed_identity": self.claimed_identity,
            "score": self.score,
            "argmax_reference": self.argmax_reference,
            "label": self.label.value,
        }


@dataclass(frozen=True)
class TrialError:
    """A claim that could not be scored; batches continue past these."""

    utterance_id: str
    claimed_identity: str
    reason: str


def _as_vector64(values, name):
    vec = np.ascontiguousarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    return vec


def cosine_similarity(a, b) -> float:
    """<a,b> / (|a| |b|), accumulated in float64, clamped to [-1, 1].

    Exactly +-1.0 when the vectors are bitwise equal or opposite.
    """
    va = _as_vector64(a, "a")
    vb = _as_vector64(b, "b")
    if va.size != vb.size:
        raise ValueError(f"dimension mismatch: {va.size} vs {vb.size}")
    return kernels.cosine(va, vb)


def max_similarity(test, ref: ReferenceSet) -> DecisionStatistic:
    """Max cosine similarity of ``test`` over the reference set."""
    if len(ref) == 0:
        raise StoreError("reference set is empty")
    vec = _as_vector64(test, "test")
    if vec.size != ref.vectors.shape[1]:
        raise ValueError(
            f"dimension mismatch: test {vec.size} vs reference {ref.vectors.shape[1]}"
        )
    nsq = float(kernels.row_norm_squares(vec[None, :])[0])
    if nsq == 0.0:
        raise ValueError("cosine similarity undefined for the zero vector")
    pool = np.ascontiguousarray(ref.vectors, dtype=np.float64)
    pool_nsq = kernels.row_norm_squares(pool)
    subset = np.arange(len(ref), dtype=np.int64)
    value, jj = kernels.max_cosine_subset(vec, nsq, pool, pool_nsq, subset)
    return DecisionStatistic(value, ref.utterance_ids[jj])


def decide(stat: DecisionStatistic, threshold: float) -> Verdict:
    """Real iff statistic >= threshold (score equal to threshold accepts)."""
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    decision = Decision.REAL if stat.value >= threshold else Decision.FAKE
    return Verdict(decision, stat, threshold)


def score_trials(store: EmbeddingStore, claims: Sequence[tuple]) -> list:
    """Score (utterance_id, claimed_identity) claims against the store.

    Returns one entry per claim, in input order: a TrialScore, or a
    TrialError for claims naming unknown utterances/identities or whose
    reference set empties under leave-one-out. Results do not depend on
    claim grouping or parallel execution.
    """
    outcomes: list = [None] * len(claims)
    by_identity: dict[str, list[int]] = {}
    known_identities = store.identities()
    for i, (utt, ident) in enumerate(claims):
        if store.try_row(utt) is None:
            outcomes[i] = TrialError(utt, ident, "unknown utterance")
        elif ident not in known_identities:
            outcomes[i] = TrialError(utt, ident, "unknown identity")
        else:
            by_identity.setdefault(ident, []).append(i)

    matrix = store.matrix64
    nsq = store.norm_squares
    for ident in sorted(by_identity):
        claim_idx = by_identity[ident]
        pool = store.bona_fide_pool(ident)
        if pool is None:
            for i in claim_idx:
                outcomes[i] = TrialError(
                    claims[i][0], ident, "identity has no bona fide records"
                )
            continue
        pool_ids, pool_rows = pool
        pool_pos = {uid: p for p, uid in enumerate(pool_ids)}
        rows = np.array([store.row(claims[i][0]) for i in claim_idx], dtype=np.int64)
        tests = matrix[rows]
        tests_nsq = nsq[rows]
        refs = matrix[pool_rows]
        refs_nsq = nsq[pool_rows]
        exclude = np.full(len(rows), -1, dtype=np.int64)
        for a, i in enumerate(claim_idx):
            utt = claims[i][0]
            if store.label_at(rows[a]) is Label.BONAFIDE and utt in pool_pos:
                exclude[a] = pool_pos[utt]
        values, argmax = kernels.max_cosine_batch(tests, tests_nsq, refs, refs_nsq, exclude)
        for a, i in enumerate(claim_idx):
            utt = claims[i][0]
            if argmax[a] < 0:
                outcomes[i] = TrialError(
                    utt, ident, "reference set empty after leave-one-out"
                )
            else:
                outcomes[i] = TrialScore(
                    utt, ident, float(values[a]), pool_ids[argmax[a]],
                    store.label_at(rows[a]),
                )
    return outcomes


def split_outcomes(outcomes):
    """Partition score_trials output into (scores, errors)."""
    scores = [o for o in outcomes if isinstance(o, TrialScore)]
    errors = [o for o in outcomes if isinstance(o, TrialError)]
    return scores, errors
