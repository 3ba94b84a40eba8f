"""Evaluation metrics over scored trials: ROC, AUC, EER, min t-DCF, accuracy.

All curve metrics are exact: thresholds are the distinct observed scores
plus -inf/+inf sentinels, never a grid. Conventions, fixed once:

 - a trial is accepted when score >= threshold (boundary accepts),
 - FAR(t) = fraction of spoof trials with score >= t,
 - FRR(t) = fraction of bona fide trials with score < t,
 - EER is the (FAR + FRR) / 2 midpoint at the |FAR - FRR|-minimizing
   threshold (first such threshold in ascending order),
 - AUC follows Mann-Whitney: ties get half credit,
 - min t-DCF is the countermeasure-only normalized minimum detection cost;
   the full tandem variant needs an external ASV system and is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .store import Label


class MetricError(Exception):
    pass


@dataclass(frozen=True)
class CostModel:
    """Priors and costs for the detection cost function.

    Defaults (c_miss=1, c_fa=10, p_target=0.95, p_spoof=0.05) follow the
    anti-spoofing community convention; reports flag them as such.
    """

    c_miss: float = 1.0
    c_fa: float = 10.0
    p_target: float = 0.95
    p_spoof: float = 0.05

    def __post_init__(self):
        if self.c_miss < 0 or self.c_fa < 0:
            raise MetricError("costs must be nonnegative")
        if not (0.0 < self.p_target < 1.0 and 0.0 < self.p_spoof < 1.0):
            raise MetricError("priors must lie in (0, 1)")
        if abs(self.p_target + self.p_spoof - 1.0) > 1e-9:
            raise MetricError("p_target + p_spoof must equal 1")
        if min(self.c_miss * self.p_target, self.c_fa * self.p_spoof) <= 0.0:
            raise MetricError("degenerate cost model: zero normalizer")

    def to_dict(self):
        return {
            "c_miss": self.c_miss,
            "c_fa": self.c_fa,
            "p_target": self.p_target,
            "p_spoof": self.p_spoof,
            "defaults_are_convention_not_paper": True,
        }


def split_scores(trials) -> tuple[np.ndarray, np.ndarray]:
    """(bona fide scores, spoof scores) as float64 arrays, validated finite."""
    real, fake = [], []
    for t in trials:
        (real if t.label is Label.BONAFIDE else fake).append(t.score)
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if (real.size and not np.all(np.isfinite(real))) or (
            fake.size and not np.all(np.isfinite(fake))):
        raise MetricError("trial scores must be finite")
    return real, fake


def _require_both_classes(real, fake):
    if real.size == 0 or fake.size == 0:
        raise MetricError(
            f"both classes required (got {real.size} bona fide, {fake.size} spoof)"
        )


def _threshold_grid(real, fake):
    scores = np.unique(np.concatenate([real, fake]))
    return np.concatenate(([-np.inf], scores, [np.inf]))


def _far_frr(real_sorted, fake_sorted, thresholds):
    far = (fake_sorted.size - np.searchsorted(fake_sorted, thresholds, side="left"))
    far = far / fake_sorted.size
    frr = np.searchsorted(real_sorted, thresholds, side="left") / real_sorted.size
    return far, frr


@dataclass
class RocCurve:
    """DET data at every distinct score plus sentinel thresholds.

    far is non-increasing and frr non-decreasing in the threshold;
    the -inf sentinel gives (far=1, frr=0), the +inf one (far=0, frr=1).
    """

    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray
    n_real: int
    n_fake: int
    _real_sorted: np.ndarray = field(repr=False, default=None)
    _fake_sorted: np.ndarray = field(repr=False, default=None)

    def points(self):
        return list(zip(self.thresholds, self.far, self.frr))

    def far_at(self, tau):
        """Fraction of spoof trials accepted at threshold tau."""
        return float(
            (self._fake_sorted.size - np.searchsorted(self._fake_sorted, tau, side="left"))
            / self._fake_sorted.size
        )

    def frr_at(self, tau):
        """Fraction of bona fide trials rejected at threshold tau."""
        return float(np.searchsorted(self._real_sorted, tau, side="left") / self._real_sorted.size)


def roc(trials) -> RocCurve:
    real, fake = split_scores(trials)
    _require_both_classes(real, fake)
    real_sorted = np.sort(real)
    fake_sorted = np.sort(fake)
    thresholds = _threshold_grid(real, fake)
    far, frr = _far_frr(real_sorted, fake_sorted, thresholds)
    return RocCurve(thresholds, far, frr, real.size, fake.size, real_sorted, fake_sorted)


def _average_ranks(values):
    """1-based ranks with ties averaged; exact for dyadic half-integers."""
    order = np.argsort(values, kind="stable")
    ranked = values[order]
    n = values.size
    boundary = np.empty(n, dtype=bool)
    boundary[0] = True
    np.not_equal(ranked[1:], ranked[:-1], out=boundary[1:])
    starts = np.flatnonzero(boundary)
    ends = np.append(starts[1:], n)
    run_rank = (starts + ends - 1) / 2.0 + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def auc(trials) -> float:
    """P(bona fide score > spoof score) + P(tie)/2, by the rank method."""
    real, fake = split_scores(trials)
    _require_both_classes(real, fake)
    ranks = _average_ranks(np.concatenate([real, fake]))
    n_r, n_f = real.size, fake.size
    u = ranks[:n_r].sum() - n_r * (n_r + 1) / 2.0
    return float(u / (n_r * n_f))


@dataclass(frozen=True)
class EerResult:
    value: float
    threshold: float


def eer(trials) -> EerResult:
    """Equal error rate: midpoint of FAR/FRR at their closest threshold."""
    real, fake = split_scores(trials)
    _require_both_classes(real, fake)
    thresholds = _threshold_grid(real, fake)
    far, frr = _far_frr(np.sort(real), np.sort(fake), thresholds)
    i = int(np.argmin(np.abs(far - frr)))
    return EerResult(float((far[i] + frr[i]) / 2.0), float(thresholds[i]))


def min_tdcf(trials, cost: CostModel) -> float:
    """Minimum normalized detection cost over all thresholds.

    cost(t) = [c_miss p_target FRR(t) + c_fa p_spoof FAR(t)] / normalizer,
    normalizer = min(c_miss p_target, c_fa p_spoof). The sentinel
    thresholds realize the accept-all / reject-all policies, so an oracle
    detector scores 0 and the best trivial policy exactly 1.
    """
    real, fake = split_scores(trials)
    _require_both_classes(real, fake)
    thresholds = _threshold_grid(real, fake)
    far, frr = _far_frr(np.sort(real), np.sort(fake), thresholds)
    w_miss = cost.c_miss * cost.p_target
    w_fa = cost.c_fa * cost.p_spoof
    norm = min(w_miss, w_fa)
    costs = (w_miss * frr + w_fa * far) / norm
    return float(costs.min())


def accuracy_at(trials, threshold: float) -> float:
    """Fraction of trials whose accept/reject verdict matches the label."""
    if len(trials) == 0:
        raise MetricError("accuracy undefined on empty trials")
    real, fake = split_scores(trials)
    correct = int(np.count_nonzero(real >= threshold)) + int(np.count_nonzero(fake < threshold))
    return correct / (real.size + fake.size)


@dataclass(frozen=True)
class DatasetMetrics:
    eer: float
    eer_threshold: float
    min_tdcf: float
    auc: float
    n_real: int
    n_fake: int

    def to_dict(self):
        return {
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "min_tdcf": self.min_tdcf,
            "auc": self.auc,
            "n_real": self.n_real,
            "n_fake": self.n_fake,
        }


@dataclass(frozen=True)
class MetricsSummary:
    """Per-dataset metrics plus unweighted cross-dataset averages.

    auc_sigma is the population standard deviation of per-dataset AUC,
    defined only when at least two datasets are present.
    """

    per_dataset: dict
    mean_eer: float
    mean_tdcf: float
    mean_auc: float
    auc_sigma: float | None
    cost_model: CostModel

    def to_dict(self):
        return {
            "datasets": {name: m.to_dict() for name, m in self.per_dataset.items()},
            "aggregate": {
                "mean_eer": self.mean_eer,
                "mean_tdcf": self.mean_tdcf,
                "mean_auc": self.mean_auc,
                "auc_sigma": self.auc_sigma,
            },
            "cost_model": self.cost_model.to_dict(),
        }


def summarize(per_dataset: Mapping[str, Sequence], cost: CostModel) -> MetricsSummary:
    """EER / min t-DCF / AUC per dataset plus unweighted means and AUC sigma."""
    if not per_dataset:
        raise MetricError("at least one dataset required")
    blocks = {}
    for name in sorted(per_dataset):
        trials = per_dataset[name]
        real, fake = split_scores(trials)
        e = eer(trials)
        blocks[name] = DatasetMetrics(
            eer=e.value,
            eer_threshold=e.threshold,
            min_tdcf=min_tdcf(trials, cost),
            auc=auc(trials),
            n_real=real.size,
            n_fake=fake.size,
        )
    aucs = np.array([m.auc for m in blocks.values()])
    sigma = float(aucs.std()) if len(blocks) >= 2 else None
    return MetricsSummary(
        per_dataset=blocks,
        mean_eer=float(np.mean([m.eer for m in blocks.values()])),
        mean_tdcf=float(np.mean([m.min_tdcf for m in blocks.values()])),
        mean_auc=float(aucs.mean()),
        auc_sigma=sigma,
        cost_model=cost,
    )
