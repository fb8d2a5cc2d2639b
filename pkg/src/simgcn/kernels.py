"""Hot numeric kernels with numba and pure-numpy implementations.

Three inner loops dominate runtime at realistic scale (thousands of nodes,
1024-dimensional embeddings): the dense O(n^2 d) pairwise-distance sweep,
per-row nearest-neighbor selection, and the sparse propagation product used
on every training epoch. Each exists in two bitwise-independent variants:

* ``*_numpy`` -- vectorized numpy, streams row blocks, no extra deps
* ``*_numba`` -- ``@njit`` loops, compiled lazily, cached on disk

The module-level names ``pairwise_distances_impl``, ``knn_select_impl`` and
``csr_matmul_impl`` are bound at import time to the active backend (see
:mod:`simgcn.accel`). Both variants stay importable for equivalence tests
and for ``bench/benchmark_kernels.py``.

Every output entry is produced by exactly one pass over its inputs in a
fixed order, so results are deterministic for a given backend.
"""

import numpy as np

from . import accel


# ---------------------------------------------------------------------------
# pure numpy


def pairwise_distances_numpy(x: np.ndarray) -> np.ndarray:
    """Full Euclidean distance matrix, each unordered pair computed once.

    Streams one source row at a time against the remaining rows; never
    materializes an (n, n, d) intermediate.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros((n, n))
    for i in range(n - 1):
        diff = x[i + 1 :, :] - x[i, :]
        row = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        out[i, i + 1 :] = row
        out[i + 1 :, i] = row
    return out


def knn_select_numpy(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the min(k, n-1) nearest neighbors per row, self excluded.

    Ties broken by ascending node index (stable sort on distance).
    """
    n = dist.shape[0]
    kk = min(k, n - 1)
    if kk <= 0:
        return np.empty((n, 0), dtype=np.int64)
    d = np.array(dist, dtype=np.float64, copy=True)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    return order[:, :kk].astype(np.int64)


# below this many output-contributing elements the reduceat path wins;
# above it, per-row BLAS matvecs avoid materializing an (nnz, d) temporary
_ROW_LOOP_MIN_WORK = 1 << 21


def csr_matmul_numpy(
    indptr: np.ndarray, indices: np.ndarray, data: np.ndarray, dense: np.ndarray
) -> np.ndarray:
    """CSR sparse @ dense product. Every row must hold at least one entry
    (guaranteed here: propagation operators always store their diagonal)."""
    if data.size * dense.shape[1] >= _ROW_LOOP_MIN_WORK:
        n = indptr.shape[0] - 1
        out = np.empty((n, dense.shape[1]))
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            out[i] = data[lo:hi] @ dense[indices[lo:hi]]
        return out
    contrib = data[:, None] * dense[indices, :]
    return np.add.reduceat(contrib, indptr[:-1], axis=0)


# ---------------------------------------------------------------------------
# numba

if accel.HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _pairwise_nb(x):
        n, d = x.shape
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for t in range(d):
                    diff = x[i, t] - x[j, t]
                    s += diff * diff
                r = np.sqrt(s)
                out[i, j] = r
                out[j, i] = r
        return out

    @njit(cache=True)
    def _knn_select_nb(dist, k):
        n = dist.shape[0]
        kk = min(k, n - 1)
        out = np.empty((n, kk), dtype=np.int64)
        taken = np.zeros(n, dtype=np.bool_)
        for i in range(n):
            taken[:] = False
            taken[i] = True
            for m in range(kk):
                best = -1
                best_val = np.inf
                for j in range(n):
                    if not taken[j] and dist[i, j] < best_val:
                        best_val = dist[i, j]
                        best = j
                out[i, m] = best
                taken[best] = True
        return out

    @njit(cache=True)
    def _csr_matmul_nb(indptr, indices, data, dense):
        n = indptr.shape[0] - 1
        d = dense.shape[1]
        out = np.zeros((n, d))
        for i in range(n):
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                w = data[p]
                for t in range(d):
                    out[i, t] += w * dense[j, t]
        return out

    def pairwise_distances_numba(x: np.ndarray) -> np.ndarray:
        return _pairwise_nb(np.ascontiguousarray(x, dtype=np.float64))

    def knn_select_numba(dist: np.ndarray, k: int) -> np.ndarray:
        n = dist.shape[0]
        if min(k, n - 1) <= 0:
            return np.empty((n, 0), dtype=np.int64)
        return _knn_select_nb(np.ascontiguousarray(dist, dtype=np.float64), k)

    def csr_matmul_numba(indptr, indices, data, dense):
        return _csr_matmul_nb(
            np.ascontiguousarray(indptr, dtype=np.int64),
            np.ascontiguousarray(indices, dtype=np.int64),
            np.ascontiguousarray(data, dtype=np.float64),
            np.ascontiguousarray(dense, dtype=np.float64),
        )

else:
    pairwise_distances_numba = None
    knn_select_numba = None
    csr_matmul_numba = None


if accel.numba_enabled():
    BACKEND = "numba"
    pairwise_distances_impl = pairwise_distances_numba
    knn_select_impl = knn_select_numba
    csr_matmul_impl = csr_matmul_numba
else:
    BACKEND = "numpy"
    pairwise_distances_impl = pairwise_distances_numpy
    knn_select_impl = knn_select_numpy
    csr_matmul_impl = csr_matmul_numpy
