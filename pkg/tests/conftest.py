import numpy as np
import pytest

from pve import EmbeddingStore, Label, TrialScore, kernels, synthetic_store


def mk_trials(real_scores=(), fake_scores=()):
    """TrialScore lists from raw score values, real class first."""
    trials = []
    for i, s in enumerate(real_scores):
        trials.append(TrialScore(f"r{i:04d}", "spk", float(s), "ref", Label.BONAFIDE))
    for i, s in enumerate(fake_scores):
        trials.append(TrialScore(f"f{i:04d}", "spk", float(s), "ref", Label.SPOOF))
    return trials


def store_from_rows(rows, model_name=""):
    """rows: (utterance_id, identity_id, label, dataset, values)."""
    store = EmbeddingStore(model_name=model_name)
    for r in rows:
        store.append(*r)
    return store.freeze()


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    kernels.warmup()


@pytest.fixture(scope="session")
def big_fixture_store():
    """The acceptance-scale synthetic store (20 identities, 300+100 each)."""
    return synthetic_store()


@pytest.fixture()
def small_store():
    """Two identities, clearly separated, spoofs offset; dim 4."""
    rng = np.random.default_rng(42)
    rows = []
    centers = {"alice": np.array([10.0, 0.0, 0.0, 0.0]),
               "bob": np.array([0.0, 10.0, 0.0, 0.0])}
    for ident, c in centers.items():
        for j in range(6):
            rows.append((f"{ident}-b{j}", ident, Label.BONAFIDE, "ds",
                         c + rng.normal(0, 0.3, 4)))
        for j in range(4):
            rows.append((f"{ident}-s{j}", ident, Label.SPOOF, "ds",
                         c + np.array([0, 0, 8.0, 0]) + rng.normal(0, 0.3, 4)))
    return store_from_rows(rows, model_name="unit-test")
