"""Experiment protocols: full evaluation, reference-size sweep, score
histograms, threshold sweep.

Every protocol is deterministic given its seed. Randomness is derived per
cell: the sweep hashes (seed, size, repetition, identity) into an
independent RNG, so cells can run in any order or in parallel and still
reproduce bit-for-bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .metrics import CostModel, MetricsSummary, accuracy_at, auc, summarize
from .similarity import TrialError, TrialScore, split_outcomes
from .store import EmbeddingStore, Label

DEFAULT_SWEEP_SIZES = (1, 2, 5, 10, 25, 100)
DEFAULT_REPETITIONS = 10
DEFAULT_BINS = 50
DEFAULT_GRID_POINTS = 201
FIXED_THRESHOLD = 0.85


class ProtocolError(Exception):
    pass


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from heterogeneous parts (order-sensitive)."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def self_claims(store: EmbeddingStore):
    """One claim per record, each utterance against its own identity."""
    return [(rec.utterance_id, rec.identity_id) for rec in store.records()]


def _score_full_pools(store):
    from .similarity import score_trials

    return score_trials(store, self_claims(store))


def score_at_reference_size(store: EmbeddingStore, size: int, seed: int,
                            repetition: int = 0):
    """Score every utterance against a per-trial random reference subset.

    For each trial the reference set is a uniform ``size``-subset (capped at
    availability) of the claimed identity's bona fide pool minus the test
    utterance itself. One RNG per (seed, size, repetition, identity) draws
    the subsets with trials taken in sorted utterance_id order, so results
    are independent of store ordering and parallel cell execution.
    """
    if size <= 0:
        raise ProtocolError(f"reference size must be positive, got {size}")
    outcomes: list = [None] * len(store)
    by_identity: dict[str, list[int]] = {}
    for idx in range(len(store)):
        by_identity.setdefault(store.identity_at(idx), []).append(idx)

    matrix = store.matrix64
    nsq = store.norm_squares
    for ident in sorted(by_identity):
        rows = sorted(by_identity[ident], key=lambda r: store.record_at(r).utterance_id)
        pool = store.bona_fide_pool(ident)
        if pool is None:
            for r in rows:
                outcomes[r] = TrialError(
                    store.record_at(r).utterance_id, ident,
                    "identity has no bona fide records",
                )
            continue
        pool_ids, pool_rows = pool
        pool_pos = {uid: p for p, uid in enumerate(pool_ids)}
        rng = np.random.default_rng(derive_seed(seed, size, repetition, ident))
        positions = np.arange(len(pool_ids))
        for r in rows:
            rec_id = store.record_at(r).utterance_id
            self_pos = pool_pos.get(rec_id) if store.label_at(r) is Label.BONAFIDE else None
            if self_pos is None:
                available = positions
            else:
                available = np.delete(positions, self_pos)
            if available.size == 0:
                outcomes[r] = TrialError(
                    rec_id, ident, "reference set empty after leave-one-out"
                )
                continue
            take = min(size, available.size)
            chosen = available[np.sort(rng.choice(available.size, size=take, replace=False))]
            subset_rows = pool_rows[chosen]
            value, jj = kernels.max_cosine_subset(
                matrix[r], nsq[r], matrix, nsq, subset_rows
            )
            outcomes[r] = TrialScore(
                rec_id, ident, value, pool_ids[chosen[jj]], store.label_at(r)
            )
    return outcomes


def score_all(store: EmbeddingStore, reference_size=None, seed: int = 0,
              repetition: int = 0):
    """Scored trials for the whole store, raising if any trial fails.

    reference_size None scores against full pools (leave-one-out applies to
    bona fide self-trials either way).
    """
    if reference_size is None:
        outcomes = _score_full_pools(store)
    else:
        outcomes = score_at_reference_size(store, reference_size, seed, repetition)
    scores, errors = split_outcomes(outcomes)
    if errors:
        first = errors[0]
        raise ProtocolError(
            f"{len(errors)} of {len(outcomes)} trials could not be scored; "
            f"first: utterance {first.utterance_id!r} vs identity "
            f"{first.claimed_identity!r}: {first.reason}"
        )
    return scores


def group_by_dataset(store: EmbeddingStore, trials: Sequence[TrialScore]):
    by_ds: dict[str, list[TrialScore]] = {}
    for t in trials:
        ds = store.dataset_at(store.row(t.utterance_id))
        by_ds.setdefault(ds, []).append(t)
    return by_ds


def evaluate(store: EmbeddingStore, cost: CostModel | None = None) -> MetricsSummary:
    """Score every utterance against its own identity and summarize metrics
    per dataset tag. Fails with an explanatory error if any trial cannot be
    scored (e.g. a bona fide pool that leave-one-out empties)."""
    cost = cost or CostModel()
    trials = score_all(store)
    return summarize(group_by_dataset(store, trials), cost)


@dataclass(frozen=True)
class SweepResult:
    """AUC as a function of reference-set size, over seeded repetitions."""

    sizes: tuple
    values: np.ndarray  # (len(sizes), repetitions)
    repetitions: int
    seed: int
    metric: str = "auc"

    @property
    def means(self):
        return self.values.mean(axis=1)

    @property
    def stds(self):
        return self.values.std(axis=1)

    def to_dict(self):
        return {
            "metric": self.metric,
            "sizes": list(self.sizes),
            "repetitions": self.repetitions,
            "seed": self.seed,
            "per_size": [
                {
                    "size": int(k),
                    "mean": float(m),
                    "std": float(s),
                    "values": [float(v) for v in row],
                }
                for k, m, s, row in zip(self.sizes, self.means, self.stds, self.values)
            ],
        }


def reference_sweep(store: EmbeddingStore, sizes: Sequence[int],
                    repetitions: int = DEFAULT_REPETITIONS, seed: int = 0) -> SweepResult:
    """Pooled AUC at each reference-set size, repeated over seeded draws.

    Sizes larger than an identity's available pool are capped per trial at
    availability, so one sweep covers stores with very uneven pools.
    """
    sizes = tuple(int(k) for k in sizes)
    if not sizes:
        raise ProtocolError("sizes must be non-empty")
    if any(k <= 0 for k in sizes):
        raise ProtocolError("sizes must be positive")
    if list(sizes) != sorted(set(sizes)):
        raise ProtocolError("sizes must be strictly increasing")
    if repetitions < 1:
        raise ProtocolError("repetitions must be >= 1")
    values = np.empty((len(sizes), repetitions), dtype=np.float64)
    for a, k in enumerate(sizes):
        for r in range(repetitions):
            trials = score_all(store, reference_size=k, seed=seed, repetition=r)
            values[a, r] = auc(trials)
    return SweepResult(sizes, values, repetitions, seed)


@dataclass(frozen=True)
class ScoreHistogram:
    """Per-class score histograms over uniform bins spanning [-1, 1].

    Bins are right-open except the last; overlap is the shared area fraction
    of the two normalized histograms (0 disjoint, 1 identical).
    """

    bin_edges: np.ndarray
    real_counts: np.ndarray
    fake_counts: np.ndarray
    reference_size: int | None
    overlap: float

    def to_dict(self):
        return {
            "bin_edges": [float(e) for e in self.bin_edges],
            "real_counts": [int(c) for c in self.real_counts],
            "fake_counts": [int(c) for c in self.fake_counts],
            "reference_size": self.reference_size,
            "n_real": int(self.real_counts.sum()),
            "n_fake": int(self.fake_counts.sum()),
            "overlap": self.overlap,
        }


def histogram(trials, bins: int = DEFAULT_BINS, reference_size=None) -> ScoreHistogram:
    if bins < 1:
        raise ProtocolError("bins must be >= 1")
    from .metrics import split_scores

    real, fake = split_scores(trials)
    for scores in (real, fake):
        if scores.size and (scores.min() < -1.0 or scores.max() > 1.0):
            raise ProtocolError("scores outside [-1, 1] cannot be histogrammed")
    real_counts, edges = np.histogram(real, bins=bins, range=(-1.0, 1.0))
    fake_counts, _ = np.histogram(fake, bins=bins, range=(-1.0, 1.0))
    if real.size and fake.size:
        overlap = float(
            np.minimum(real_counts / real.size, fake_counts / fake.size).sum()
        )
    else:
        overlap = 0.0
    return ScoreHistogram(edges, real_counts, fake_counts,
                          None if reference_size is None else int(reference_size),
                          overlap)


@dataclass(frozen=True)
class ThresholdSweepResult:
    """Accuracy over a threshold grid plus the stable optimum location.

    best_threshold is the midpoint of the contiguous max-accuracy plateau
    around the first argmax; argmax_threshold is that raw grid point.
    """

    thresholds: np.ndarray
    accuracies: np.ndarray
    best_threshold: float
    best_accuracy: float
    argmax_threshold: float
    fixed_threshold: float
    fixed_accuracy: float
    fixed_within_2pct: bool

    def to_dict(self):
        return {
            "thresholds": [float(t) for t in self.thresholds],
            "accuracies": [float(a) for a in self.accuracies],
            "best_threshold": self.best_threshold,
            "best_accuracy": self.best_accuracy,
            "argmax_threshold": self.argmax_threshold,
            "fixed_threshold": self.fixed_threshold,
            "fixed_accuracy": self.fixed_accuracy,
            "fixed_within_2pct": self.fixed_within_2pct,
        }


def default_threshold_grid(points: int = DEFAULT_GRID_POINTS, full_range: bool = False):
    """Uniform grid over [0, 1] (matched speech scores are nonnegative in
    practice) or over the full cosine range [-1, 1]."""
    lo = -1.0 if full_range else 0.0
    return np.linspace(lo, 1.0, points)


def threshold_sweep(trials, grid) -> ThresholdSweepResult:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ProtocolError("threshold grid must be non-empty")
    if np.any(np.diff(grid) < 0):
        raise ProtocolError("threshold grid must be sorted ascending")
    accs = np.array([accuracy_at(trials, float(t)) for t in grid])
    i = int(np.argmax(accs))
    best = accs[i]
    lo = i
    while lo > 0 and accs[lo - 1] == best:
        lo -= 1
    hi = i
    while hi + 1 < accs.size and accs[hi + 1] == best:
        hi += 1
    fixed_acc = accuracy_at(trials, FIXED_THRESHOLD)
    return ThresholdSweepResult(
        thresholds=grid,
        accuracies=accs,
        best_threshold=float((grid[lo] + grid[hi]) / 2.0),
        best_accuracy=float(best),
        argmax_threshold=float(grid[i]),
        fixed_threshold=FIXED_THRESHOLD,
        fixed_accuracy=float(fixed_acc),
        fixed_within_2pct=bool(best - fixed_acc <= 0.02),
    )
