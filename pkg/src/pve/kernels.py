"""Hot scoring kernels: max cosine similarity of tests against reference pools.

Two interchangeable backends compute the same contracts:

 - "numba": JIT-compiled scalar loops, parallel across trials only, sequential
   accumulation within a trial. Bit-reproducible at any thread count.
 - "numpy": pure-numpy fallback on fixed-order einsum reductions (not BLAS,
   whose accumulation order varies with matrix shape).

The backend is selected with the ``PVE_BACKEND`` environment variable
(``auto`` | ``numba`` | ``numpy``, default ``auto``), or programmatically with
:func:`use_backend`. Within one backend results are deterministic and a
given (test, reference) pair scores identically whatever the pool around it;
across backends scores agree to <= 1e-9 (reduction orders differ), see
benchmarks/bench_backends.py.

Cosines are computed as dot / sqrt(nsq_a * nsq_b) over float64 with the
norm-squares produced by the same backend (pass them in from
:func:`row_norm_squares`): when a test vector is bitwise equal (or opposite)
to a reference the products coincide exactly and the score snaps to exactly
+-1.0. Everything is clamped to [-1, 1]. Wherever an index is returned, ties
resolve to the first (lowest) index, so callers that order reference rows by
utterance_id get the lexicographically smallest argmax for free.
"""

import math
import os

import numpy as np

ENV_VAR = "PVE_BACKEND"
_CHOICES = ("auto", "numba", "numpy")

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

_active = None


def _resolve(name):
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}, expected one of {_CHOICES}")
    if name == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return name


def active_backend():
    """Resolve (once) and return the active backend name."""
    global _active
    if _active is None:
        _active = _resolve(os.environ.get(ENV_VAR, "auto"))
    return _active


def use_backend(name):
    """Override the active backend ('auto' re-reads the environment)."""
    global _active
    if name == "auto":
        _active = _resolve(os.environ.get(ENV_VAR, "auto"))
    else:
        _active = _resolve(name)
    return _active


# ---------------------------------------------------------------- numpy path
#
# All reductions go through einsum with optimize=False: unlike BLAS matmul,
# its per-element accumulation order depends only on the contracted length,
# never on how many rows are in the call. That keeps a given (test, ref)
# pair's score bit-identical across pool sizes (exact max-monotonicity) and
# makes the batch and subset paths agree bitwise.


def _dot_numpy(a, b):
    return float(np.einsum("d,d->", a, b))


def _row_norm_squares_numpy(mat):
    return np.einsum("ij,ij->i", mat, mat)


def _pairwise_dots_numpy(tests, refs):
    return np.einsum("md,kd->mk", tests, refs)


def _finish_scores_numpy(sims, products):
    snap = sims * sims == products
    out = sims / np.sqrt(products)
    np.clip(out, -1.0, 1.0, out=out)
    out[snap] = np.copysign(1.0, sims[snap])
    return out


def _max_cosine_batch_numpy(tests, tests_nsq, refs, refs_nsq, exclude):
    sims = _pairwise_dots_numpy(tests, refs)
    scores = _finish_scores_numpy(sims, np.outer(tests_nsq, refs_nsq))
    rows = np.flatnonzero(exclude >= 0)
    if rows.size:
        scores[rows, exclude[rows]] = -2.0
    idxs = scores.argmax(axis=1).astype(np.int64)
    vals = scores[np.arange(scores.shape[0]), idxs]
    empty = vals < -1.5  # every column masked (pool of one, excluded)
    vals[empty] = -2.0
    idxs[empty] = -1
    return vals, idxs


def _max_cosine_subset_numpy(x, x_nsq, pool, pool_nsq, subset):
    sims = _pairwise_dots_numpy(x[None, :], pool[subset])[0]
    scores = _finish_scores_numpy(sims, x_nsq * pool_nsq[subset])
    jj = int(scores.argmax())
    return float(scores[jj]), jj


# ---------------------------------------------------------------- numba path

if HAS_NUMBA:

    @njit(cache=True)
    def _dot_numba(a, b):
        acc = 0.0
        for i in range(a.shape[0]):
            acc += a[i] * b[i]
        return acc

    @njit(cache=True)
    def _row_norm_squares_numba(mat):
        out = np.empty(mat.shape[0])
        for i in range(mat.shape[0]):
            acc = 0.0
            for t in range(mat.shape[1]):
                acc += mat[i, t] * mat[i, t]
            out[i] = acc
        return out

    @njit(cache=True, inline="always")
    def _score_numba(acc, prod):
        if acc * acc == prod:
            return 1.0 if acc >= 0.0 else -1.0
        s = acc / math.sqrt(prod)
        if s > 1.0:
            return 1.0
        if s < -1.0:
            return -1.0
        return s

    @njit(cache=True, parallel=True)
    def _max_cosine_batch_numba(tests, tests_nsq, refs, refs_nsq, exclude):
        m = tests.shape[0]
        d = tests.shape[1]
        k = refs.shape[0]
        vals = np.empty(m)
        idxs = np.empty(m, dtype=np.int64)
        for i in prange(m):
            best = -2.0
            best_j = -1
            for j in range(k):
                if j == exclude[i]:
                    continue
                acc = 0.0
                for t in range(d):
                    acc += tests[i, t] * refs[j, t]
                s = _score_numba(acc, tests_nsq[i] * refs_nsq[j])
                if s > best:
                    best = s
                    best_j = j
            vals[i] = best
            idxs[i] = best_j
        return vals, idxs

    @njit(cache=True)
    def _max_cosine_subset_numba(x, x_nsq, pool, pool_nsq, subset):
        best = -2.0
        best_jj = -1
        d = x.shape[0]
        for jj in range(subset.shape[0]):
            j = subset[jj]
            acc = 0.0
            for t in range(d):
                acc += x[t] * pool[j, t]
            s = _score_numba(acc, x_nsq * pool_nsq[j])
            if s > best:
                best = s
                best_jj = jj
        return best, best_jj


# ---------------------------------------------------------------- dispatchers


def dot(a, b):
    """float64 dot product under the active backend (fixed reduction order)."""
    if active_backend() == "numba":
        return float(_dot_numba(a, b))
    return _dot_numpy(a, b)


def row_norm_squares(mat):
    """Squared euclidean norm per row, same accumulation as the dot kernels."""
    if active_backend() == "numba":
        return _row_norm_squares_numba(mat)
    return _row_norm_squares_numpy(mat)


def cosine(a, b):
    """Cosine of two float64 vectors; exactly +-1.0 on bitwise (anti)equality."""
    num = dot(a, b)
    naa = dot(a, a)
    nbb = dot(b, b)
    if naa == 0.0 or nbb == 0.0:
        raise ValueError("cosine similarity undefined for the zero vector")
    prod = naa * nbb
    if num * num == prod:
        return math.copysign(1.0, num)
    return min(1.0, max(-1.0, num / math.sqrt(prod)))


def max_cosine_batch(tests, tests_nsq, refs, refs_nsq, exclude):
    """Max cosine of each test row against all reference rows.

    exclude[i] is a reference row index masked out for test i (-1 for none).
    Returns (values, argmax indices); argmax -1 with value -2.0 marks a test
    whose whole pool was excluded.
    """
    if active_backend() == "numba":
        return _max_cosine_batch_numba(tests, tests_nsq, refs, refs_nsq, exclude)
    return _max_cosine_batch_numpy(tests, tests_nsq, refs, refs_nsq, exclude)


def max_cosine_subset(x, x_nsq, pool, pool_nsq, subset):
    """Max cosine of one test against pool rows listed in ``subset``.

    ``subset`` must be non-empty; returns (value, position within subset).
    """
    if active_backend() == "numba":
        val, jj = _max_cosine_subset_numba(x, x_nsq, pool, pool_nsq, subset)
        return float(val), int(jj)
    return _max_cosine_subset_numpy(x, x_nsq, pool, pool_nsq, subset)


def warmup():
    """Force JIT compilation so timed or threaded code paths start hot."""
    if active_backend() != "numba":
        return
    a = np.ones((2, 3))
    nsq = _row_norm_squares_numba(a)
    _dot_numba(a[0], a[1])
    _max_cosine_batch_numba(a, nsq, a, nsq, np.array([-1, 0], dtype=np.int64))
    _max_cosine_subset_numba(a[0], nsq[0], a, nsq, np.array([0, 1], dtype=np.int64))
