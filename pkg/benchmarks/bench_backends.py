#!/usr/bin/env python3
"""Side-by-side benchmark: numba JIT kernels vs the pure-numpy fallback.

Times the two hot paths (full-pool batch scoring as used by `eval`, and
per-trial subset scoring as used by `sweep-ref`) under both backends and
checks they agree to 1e-9. Run from the repo root:

    python benchmarks/bench_backends.py [--identities 20] [--bona 300] ...

Both backends pay for determinism: the numba loops keep a fixed sequential
accumulation order (no SIMD on the reduction) and the numpy path uses
fixed-order einsum instead of BLAS (whose accumulation varies with matrix
shape, which would break exact max-monotonicity across pool sizes). Expect
numba ahead on the sweep pass and the gap narrowing on large-dim batches.
"""

import argparse
import time

import numpy as np

from pve import kernels, synthetic_store
from pve.protocols import score_at_reference_size
from pve.similarity import score_trials


def time_once(fn):
    t0 = time.perf_counter()
    out = fn()
    return time.perf_counter() - t0, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--identities", type=int, default=20)
    parser.add_argument("--bona", type=int, default=300)
    parser.add_argument("--spoof", type=int, default=100)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--ref-size", type=int, default=25,
                        help="subset size for the sweep-style pass")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not kernels.HAS_NUMBA:
        raise SystemExit("numba not importable; nothing to compare")

    store = synthetic_store(args.identities, args.bona, args.spoof,
                            dim=args.dim, seed=args.seed)
    claims = [(r.utterance_id, r.identity_id) for r in store.records()]
    print(f"store: {len(store)} records, dim {store.dim}, "
          f"{args.identities} identities")

    print("warming up numba JIT (first call compiles)...")
    kernels.use_backend("numba")
    t, _ = time_once(kernels.warmup)
    print(f"JIT warmup: {t:.1f}s\n")

    results = {}
    for backend in ("numpy", "numba"):
        kernels.use_backend(backend)
        kernels.warmup()
        t_batch, trials_batch = time_once(lambda: score_trials(store, claims))
        t_subset, trials_subset = time_once(
            lambda: score_at_reference_size(store, args.ref_size, seed=args.seed))
        results[backend] = {
            "batch": (t_batch, [t.score for t in trials_batch]),
            "subset": (t_subset, [t.score for t in trials_subset]),
        }

    print(f"{'pass':>22}  {'numpy (s)':>10}  {'numba (s)':>10}  {'speedup':>8}  {'agree':>6}")
    print("-" * 66)
    for label, key in (("eval full pools", "batch"),
                       (f"sweep |R|={args.ref_size}", "subset")):
        t_np, s_np = results["numpy"][key]
        t_nb, s_nb = results["numba"][key]
        diff = float(np.max(np.abs(np.asarray(s_np) - np.asarray(s_nb))))
        agree = "ok" if diff <= 1e-9 else f"{diff:.1e}"
        print(f"{label:>22}  {t_np:>10.3f}  {t_nb:>10.3f}  {t_np / t_nb:>7.1f}x  {agree:>6}")


if __name__ == "__main__":
    main()
