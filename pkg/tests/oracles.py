"""Independent brute-force oracles.

Everything here is deliberately naive (per-element Python loops, exhaustive
sorts, dense matrices) and shares no code path with the package internals it
checks.
"""

import math

import numpy as np


def naive_pairwise(x):
    """Double-loop Euclidean distances."""
    n, d = x.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for t in range(d):
                s += (x[i, t] - x[j, t]) ** 2
            out[i, j] = math.sqrt(s)
    return out


def exhaustive_knn(dist, k):
    """Sort every (distance, index) pair per node; take the first k."""
    n = dist.shape[0]
    kk = min(k, n - 1)
    edges = []
    for i in range(n):
        cands = sorted((dist[i, j], j) for j in range(n) if j != i)
        for dval, j in cands[:kk]:
            edges.append((i, j))
    return sorted(edges)


def gaussian_weight(dval, sigma):
    # np.exp, not math.exp: the two libm paths differ in the last ulp and
    # edge weights are compared bit-exactly against the package
    return float(np.exp(-(dval * dval) / (2.0 * sigma * sigma)))


def symmetrize_max_dense(n, edges):
    """Element-wise max(A, A^T) over the union of directed edges."""
    A = np.zeros((n, n))
    for s, d, w in edges:
        A[s, d] = w
    return np.maximum(A, A.T)


def normalized_operator_dense(n, edges, binary=False):
    """Direct per-entry evaluation of the propagation rule on a dense
    adjacency built from (src, dst, weight) triples."""
    A = np.zeros((n, n))
    for s, d, w in edges:
        A[s, d] = 1.0 if binary else w
    deg = A.sum(axis=1)
    S = np.zeros((n, n))
    for i in range(n):
        S[i, i] = 1.0 / (deg[i] + 1.0)
        for j in range(n):
            if A[i, j] > 0.0:
                S[i, j] = A[i, j] / (math.sqrt(deg[i] + 1.0) * math.sqrt(deg[j] + 1.0))
    return S


def per_row_mlp(X, model):
    """Plain 2-layer MLP applied independently to each row."""
    out = np.zeros((X.shape[0], model.W2.shape[1]))
    for i in range(X.shape[0]):
        h = np.maximum(X[i] @ model.W1 + model.b1, 0.0)
        z = h @ model.W2 + model.b2
        e = np.exp(z - z.max())
        out[i] = e / e.sum()
    return out


def masked_ce_direct(probs, y, mask):
    """Mean negative log-probability over masked nodes, python loop."""
    total = 0.0
    count = 0
    for i in range(len(y)):
        if mask[i]:
            total += -math.log(probs[i, y[i]])
            count += 1
    return total / count, count


def central_diff_grads(loss_fn, model, step=1e-5):
    """Central finite differences over every model parameter."""
    grads = {}
    for key, p in model.params().items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            hi = loss_fn(model)
            p[idx] = orig - step
            lo = loss_fn(model)
            p[idx] = orig
            g[idx] = (hi - lo) / (2 * step)
            it.iternext()
        grads[key] = g
    return grads


def tally_metrics(pred, actual, idx, C):
    """Per-sample accuracy tally and confusion counts."""
    correct = 0
    confusion = np.zeros((C, C), dtype=np.int64)
    for i in idx:
        confusion[actual[i], pred[i]] += 1
        if actual[i] == pred[i]:
            correct += 1
    return correct / len(idx), confusion


def power_iteration(S, iters=500, seed=0):
    """Largest-magnitude eigenvalue estimate of a dense symmetric matrix."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=S.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = S @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ (S @ v))
    return abs(lam)
