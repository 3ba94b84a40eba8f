"""Seeded synthetic embedding fixture.

Stands in for the real anti-spoofing corpora at desk scale: each identity
is a Gaussian cluster of bona fide vectors, its spoofs a second cluster
shifted along a random direction, so genuine self-trials outscore spoof
trials without being trivially separable at every reference size.
"""

from __future__ import annotations

import numpy as np

from .store import EmbeddingStore, Label


def synthetic_store(
    n_identities: int = 20,
    bona_per_identity: int = 300,
    spoof_per_identity: int = 100,
    dim: int = 32,
    seed: int = 0,
    *,
    center_scale: float = 10.0,
    within_scale: float = 1.75,
    spoof_shift: float = 0.45,
    spoof_within_scale: float = 1.75,
    hard_spoof_fraction: float = 0.05,
    hard_spoof_factor: float = 0.45,
    dataset: str = "synthetic",
    model_name: str = "synthetic-fixture",
) -> EmbeddingStore:
    """Build a frozen synthetic store, fully determined by the arguments.

    spoof_shift is the spoof-cluster displacement as a fraction of the
    identity center norm, applied orthogonally to the center so every
    identity's spoofs sit at a comparable similarity level (synthesis
    artifacts live off the speaker's own direction). within_scale /
    spoof_within_scale set per-axis cluster spreads, jittered +-20% per
    identity so pools differ in tightness.

    A ``hard_spoof_fraction`` of each identity's spoofs is drawn at
    ``hard_spoof_factor`` times the shift: high-quality fakes inside the
    genuine score range that no reference-set size fully resolves, keeping
    detection imperfect at every size the way real corpora are.
    """
    if n_identities < 1 or bona_per_identity < 1 or spoof_per_identity < 0:
        raise ValueError("fixture needs >= 1 identity with >= 1 bona fide record")
    rng = np.random.default_rng(seed)
    store = EmbeddingStore(model_name=model_name)
    centers = rng.normal(0.0, 1.0, size=(n_identities, dim))
    centers *= center_scale * np.sqrt(dim) / np.linalg.norm(centers, axis=1, keepdims=True)
    for i in range(n_identities):
        ident = f"spk{i:03d}"
        jitter = rng.uniform(0.8, 1.2)
        bona = centers[i] + rng.normal(0.0, within_scale * jitter,
                                       size=(bona_per_identity, dim))
        for j in range(bona_per_identity):
            store.append(f"{ident}-bona{j:04d}", ident, Label.BONAFIDE, dataset, bona[j])
        if spoof_per_identity:
            center_norm = np.sqrt(np.dot(centers[i], centers[i]))
            unit = centers[i] / center_norm
            direction = rng.normal(0.0, 1.0, size=dim)
            direction -= np.dot(direction, unit) * unit
            direction /= np.sqrt(np.dot(direction, direction))
            offset = spoof_shift * center_norm * direction
            noise = rng.normal(0.0, spoof_within_scale * jitter,
                               size=(spoof_per_identity, dim))
            hard = rng.random(spoof_per_identity) < hard_spoof_fraction
            for j in range(spoof_per_identity):
                scale = hard_spoof_factor if hard[j] else 1.0
                vec = centers[i] + scale * offset + noise[j]
                store.append(f"{ident}-spoof{j:04d}", ident, Label.SPOOF, dataset, vec)
    return store.freeze()
