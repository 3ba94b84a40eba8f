"""Acceptance suite: one test per release criterion, stated tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. Several criteria carry runtime budgets; those are asserted too.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.stats import spearmanr

from pve import (
    CostModel,
    Label,
    TrialScore,
    auc,
    eer,
    histogram,
    ingest_binary,
    ingest_jsonl,
    kernels,
    min_tdcf,
    reference_set,
    reference_sweep,
    score_all,
    score_trials,
    default_threshold_grid,
    threshold_sweep,
    write_binary,
    write_jsonl,
)
from pve.cli import main as cli_main
from pve.similarity import cosine_similarity, max_similarity
from pve.store import EmbeddingStore, ReferenceSet

from conftest import mk_trials, store_from_rows
from test_metrics import auc_brute, eer_oracle, tdcf_oracle

ACCEPT_SEED = 7


@contextmanager
def criterion(name, budget_s=None):
    t0 = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[ACCEPTANCE] {name}: FAIL ({time.perf_counter() - t0:.1f}s)")
        raise
    elapsed = time.perf_counter() - t0
    print(f"[ACCEPTANCE] {name}: PASS ({elapsed:.1f}s)")
    if budget_s is not None:
        assert elapsed < budget_s, f"runtime budget {budget_s}s exceeded: {elapsed:.1f}s"


@pytest.fixture(scope="module")
def fixture_store(big_fixture_store):
    return big_fixture_store


@pytest.fixture(scope="module")
def fixture_store_path(big_fixture_store, tmp_path_factory):
    p = tmp_path_factory.mktemp("accept") / "fixture.pve"
    write_binary(big_fixture_store, p)
    return p


def test_metric_oracle_equivalence():
    """AUC/EER/min t-DCF equal independent oracles exactly, 1000 random sets."""
    with criterion("metric-oracle-equivalence", budget_s=60):
        rng = np.random.default_rng(ACCEPT_SEED)
        cost = CostModel()
        for case in range(1000):
            n_r = int(rng.integers(1, 501))
            n_f = int(rng.integers(1, 501))
            if case % 2:  # tie-heavy draws from a coarse score grid
                levels = int(rng.integers(1, 11))
                real = rng.integers(0, levels + 1, n_r) / levels
                fake = rng.integers(0, levels + 1, n_f) / levels
            else:
                real = rng.normal(0.6, 0.3, n_r)
                fake = rng.normal(0.4, 0.3, n_f)
            trials = mk_trials(real, fake)
            assert auc(trials) == auc_brute(real, fake)
            got = eer(trials)
            want_value, want_tau = eer_oracle(real, fake)
            assert got.value == want_value and got.threshold == want_tau
            assert min_tdcf(trials, cost) == tdcf_oracle(real, fake, cost)


def test_hand_computed_fixtures():
    """Frozen hand-derived metric values hold exactly."""
    with criterion("hand-computed-fixtures"):
        assert auc(mk_trials([0.9, 0.6], [0.7, 0.5])) == 0.75
        assert eer(mk_trials([0.8, 0.6, 0.4], [0.7, 0.5, 0.3])).value == pytest.approx(1 / 3)
        assert min_tdcf(mk_trials([0.9, 0.8], [0.2, 0.1]), CostModel()) == 0.0


def _cosine_scalar_oracle(a, b):
    num = aa = bb = 0.0
    for x, y in zip(a, b):
        num += x * y
        aa += x * x
        bb += y * y
    return num / math.sqrt(aa * bb)


def test_similarity_properties():
    """Scale invariance, symmetry, max monotonicity, brute-force equivalence."""
    with criterion("similarity-properties", budget_s=30):
        rng = np.random.default_rng(ACCEPT_SEED)
        n_cases = 10_000

        # scale invariance within 1e-6 and exact symmetry
        for _ in range(n_cases):
            d = int(rng.integers(1, 33))
            a = rng.normal(0, 1, d) + 0.01
            b = rng.normal(0, 1, d) + 0.01
            alpha, beta = rng.uniform(1e-3, 1e3, 2)
            s_ab = cosine_similarity(a, b)
            assert abs(cosine_similarity(alpha * a, beta * b) - s_ab) <= 1e-6
            assert cosine_similarity(b, a) == s_ab

        # max monotonicity under reference supersets
        for _ in range(n_cases):
            d = int(rng.integers(2, 17))
            test = rng.normal(0, 1, d) + 0.01
            k = int(rng.integers(1, 7))
            vecs = np.asarray(rng.normal(0, 1, (k + 1, d)) + 0.01, dtype=np.float32)
            ids = tuple(f"r{i:02d}" for i in range(k + 1))
            small = ReferenceSet("spk", ids[:k], vecs[:k])
            large = ReferenceSet("spk", ids, vecs)
            assert max_similarity(test, large).value >= max_similarity(test, small).value

        # brute-force scalar-loop equivalence for |R| <= 100, within 1e-6
        for case in range(n_cases):
            if case < 100:  # pin the extremes
                k, d = 100, 64
            else:
                k = int(math.exp(rng.uniform(0, math.log(100))))
                d = int(math.exp(rng.uniform(0, math.log(64))))
            vecs = np.asarray(rng.normal(0, 1, (k, d)) + 0.01, dtype=np.float32)
            test = rng.normal(0, 1, d) + 0.01
            ref = ReferenceSet("spk", tuple(f"r{i:03d}" for i in range(k)), vecs)
            got = max_similarity(test, ref).value
            test_list = test.tolist()
            want = max(_cosine_scalar_oracle(row, test_list)
                       for row in vecs.astype(np.float64).tolist())
            assert abs(got - want) <= 1e-6


def test_leave_one_out_correctness():
    """A bitwise-enrolled bona fide test never matches itself."""
    with criterion("leave-one-out"):
        rng = np.random.default_rng(ACCEPT_SEED)
        base = rng.normal(0, 1, 16)
        rows = [(f"u{i}", "spk", Label.BONAFIDE, "ds",
                 base + rng.normal(0, 0.2, 16)) for i in range(5)]
        store = store_from_rows(rows)
        (out,) = score_trials(store, [("u0", "spk")])
        assert isinstance(out, TrialScore)
        assert out.score < 1.0
        assert out.argmax_reference != "u0"
        # the pool actually used is the enrolled pool minus the test utterance
        ref = reference_set(store, "spk")
        keep = [i for i, u in enumerate(ref.utterance_ids) if u != "u0"]
        assert len(keep) == len(ref) - 1
        manual = ReferenceSet("spk", tuple(ref.utterance_ids[i] for i in keep),
                              ref.vectors[keep])
        assert out.score == max_similarity(store.matrix64[store.row("u0")], manual).value


def test_reference_size_trend(fixture_store):
    """AUC improves with reference-set size and clears 0.9 at five."""
    with criterion("reference-size-trend", budget_s=300):
        sizes = (1, 2, 5, 10, 25, 100)
        result = reference_sweep(fixture_store, sizes, repetitions=10, seed=ACCEPT_SEED)
        means = result.means
        rho = spearmanr(sizes, means).statistic
        assert rho >= 0.9, (rho, means)
        assert np.all(np.diff(means) >= 0), means
        assert means[sizes.index(5)] > 0.9, means


def test_histogram_separation_and_fake_stability(fixture_store):
    """Classes separate at |R|=5; the fake class is stable in |R|."""
    with criterion("histogram-separation"):
        trials5 = score_all(fixture_store, reference_size=5, seed=ACCEPT_SEED)
        trials100 = score_all(fixture_store, reference_size=100, seed=ACCEPT_SEED)
        h5 = histogram(trials5, reference_size=5)
        assert h5.overlap < 0.1, h5.overlap
        fake5 = np.mean([t.score for t in trials5 if t.label is Label.SPOOF])
        fake100 = np.mean([t.score for t in trials100 if t.label is Label.SPOOF])
        assert abs(fake100 - fake5) < 0.02, (fake5, fake100)


def test_threshold_stability(fixture_store):
    """The optimal threshold moves < 0.05 across reference sizes."""
    with criterion("threshold-stability"):
        grid = default_threshold_grid()
        best = []
        for k in (5, 25, 100):
            trials = score_all(fixture_store, reference_size=k, seed=ACCEPT_SEED)
            best.append(threshold_sweep(trials, grid).best_threshold)
        assert max(best) - min(best) < 0.05, best


def _canonical_report(path):
    lines = path.read_text().splitlines()
    return "\n".join(l for l in lines if '"generated_at"' not in l)


def _run_cli(argv):
    code = cli_main(argv)
    assert code == 0


def test_determinism_across_runs_and_threads(fixture_store_path, tmp_path):
    """eval and sweep-ref rerun byte-identically at any parallelism level."""
    with criterion("determinism"):
        store = str(fixture_store_path)
        if kernels.active_backend() == "numba":
            import numba

            max_threads = numba.get_num_threads()
            thread_plan = sorted({1, 2, max_threads})
        else:
            thread_plan = [None, None]

        reports = {"eval": [], "sweep": []}
        eval_out = tmp_path / "eval.json"
        sweep_out = tmp_path / "sweep.json"
        try:
            for n in thread_plan:
                if n is not None:
                    import numba

                    numba.set_num_threads(n)
                _run_cli(["eval", "--store", store, "--out", str(eval_out)])
                reports["eval"].append(_canonical_report(eval_out))
                _run_cli(["sweep-ref", "--store", store, "--sizes", "1,5",
                          "--repetitions", "2", "--seed", str(ACCEPT_SEED),
                          "--out", str(sweep_out)])
                reports["sweep"].append(_canonical_report(sweep_out))
        finally:
            if kernels.active_backend() == "numba":
                import numba

                numba.set_num_threads(max_threads)
        for kind, docs in reports.items():
            assert all(d == docs[0] for d in docs), f"{kind} reports diverged"
            assert '"generated_at"' not in docs[0] and len(docs[0]) > 100


def test_format_round_trips(tmp_path):
    """100 randomized stores survive binary (bitwise) and JSONL round-trips."""
    with criterion("format-round-trips"):
        rng = np.random.default_rng(ACCEPT_SEED)
        for case in range(100):
            store = EmbeddingStore(model_name=f"model-{case}")
            n = int(rng.integers(1, 60))
            dim = int(rng.integers(1, 24))
            for i in range(n):
                label = Label.BONAFIDE if rng.random() < 0.7 else Label.SPOOF
                store.append(
                    f"utt-{case}-{i:03d}", f"spk{rng.integers(0, 5)}", label,
                    f"ds{rng.integers(0, 3)}",
                    rng.normal(0, rng.uniform(0.01, 100), dim) + 1e-3,
                )
            store.freeze()
            b = tmp_path / "rt.pve"
            j = tmp_path / "rt.jsonl"
            write_binary(store, b)
            write_jsonl(store, j)
            back_b = ingest_binary(b)
            back_j = ingest_jsonl(j)
            assert back_b == store and back_b.model_name == store.model_name
            assert back_j == store
            for rec, orig in zip(back_b.records(), store.records()):
                assert rec.embedding.tobytes() == orig.embedding.tobytes()
            for rec, orig in zip(back_j.records(), store.records()):
                assert rec.embedding.tobytes() == orig.embedding.tobytes()
