"""Similarity graph construction and the normalized propagation operator.

Pipeline: pairwise Euclidean distances -> Gaussian similarity weights ->
directed kNN edge selection -> optional symmetrization -> the self-looped,
degree-normalized operator applied by each GCN layer:

    S[i][i] = 1 / (d_i + 1)
    S[i][j] = a_ij / sqrt((d_i + 1) (d_j + 1))   for each edge (i, j)

with d_i the weighted row-sum of the adjacency. ``binary_weights=True``
replaces a_ij by 1 on the selected edges (propagation ignores the similarity
values while keeping the kNN topology).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .dataset import FeatureMatrix
from .errors import DegenerateGeometry, DegenerateGraph, InvalidConfig, ShapeError
from .serialize import read_json, write_json

AUTO_SIGMA = "auto"


@dataclass
class GraphConfig:
    """Knobs shared by every graph build."""

    k: int = 3
    sigma: float | None = None  # None -> median-distance bandwidth
    symmetrize: str = "max"  # "max" | "none"
    binary_weights: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidConfig(f"sigma must be > 0, got {self.sigma}")
        if self.symmetrize not in ("max", "none"):
            raise InvalidConfig(f"unknown symmetrize policy {self.symmetrize!r}")


@dataclass
class DistanceMatrix:
    """Symmetric non-negative distances with a zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ShapeError(f"distance matrix must be square, got {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise InvalidConfig("distance matrix contains non-finite entries")
        if np.any(np.diag(self.entries) != 0.0):
            raise InvalidConfig("distance matrix diagonal must be zero")
        if self.entries.size and self.entries.min() < 0.0:
            raise InvalidConfig("distances must be non-negative")
        if not np.array_equal(self.entries, self.entries.T):
            raise InvalidConfig("distance matrix must be symmetric")

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass
class SimilarityGraph:
    """Directed weighted kNN graph stored as parallel edge arrays sorted by
    (src, dst). ``node_ids`` maps graph rows back to dataset indices."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    k: int
    kernel_sigma: float
    node_ids: np.ndarray
    symmetrized: bool = False

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.node_ids = np.asarray(self.node_ids, dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return self.src.size

    def edges(self):
        """Iterate (src, dst, weight) triples in canonical order."""
        for s, d, w in zip(self.src, self.dst, self.weight):
            yield int(s), int(d), float(w)

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    def validate(self) -> None:
        if np.any(self.src == self.dst):
            raise InvalidConfig("self-edge in similarity graph")
        if self.weight.size and (self.weight.min() <= 0.0 or self.weight.max() > 1.0):
            raise InvalidConfig("edge weight outside (0, 1]")
        expected = min(self.k, self.n - 1)
        deg = self.out_degrees()
        if self.symmetrized:
            if self.n > 1 and deg.min() < expected:
                raise InvalidConfig("out-degree below k after symmetrization")
        elif self.n > 1 and (deg.min() != expected or deg.max() != expected):
            raise InvalidConfig(f"out-degree must be exactly {expected} for every node")


@dataclass
class PropagationOperator:
    """Sparse CSR form of the normalized, self-looped propagation matrix."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    symmetrized: bool

    def __post_init__(self):
        self._transpose = None

    def matmul(self, dense: np.ndarray) -> np.ndarray:
        """S @ dense, row-deterministic."""
        dense = np.ascontiguousarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != self.n:
            raise ShapeError(f"operand rows {dense.shape} do not match n={self.n}")
        return kernels.csr_matmul_impl(self.indptr, self.indices, self.data, dense)

    def t_matmul(self, dense: np.ndarray) -> np.ndarray:
        """S.T @ dense using an explicitly built (cached) transpose."""
        dense = np.ascontiguousarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != self.n:
            raise ShapeError(f"operand rows {dense.shape} do not match n={self.n}")
        if self._transpose is None:
            self._transpose = self._build_transpose()
        tp, ti, td = self._transpose
        return kernels.csr_matmul_impl(tp, ti, td, dense)

    def _build_transpose(self):
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        order = np.lexsort((rows, self.indices))
        t_rows = self.indices[order]
        t_cols = rows[order]
        t_data = self.data[order]
        t_indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(t_rows, minlength=self.n), out=t_indptr[1:])
        return t_indptr, t_cols, t_data

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out


# ---------------------------------------------------------------------------
# operations


def pairwise_distances(features: FeatureMatrix) -> DistanceMatrix:
    """Euclidean distances, each unordered pair evaluated exactly once."""
    return DistanceMatrix(kernels.pairwise_distances_impl(features.values))


def auto_sigma(dist: DistanceMatrix) -> float:
    """Median of the strictly positive upper-triangle distances."""
    iu = np.triu_indices(dist.n, k=1)
    vals = dist.entries[iu]
    vals = vals[vals > 0.0]
    if vals.size == 0:
        raise DegenerateGeometry("all pairwise distances are zero; cannot infer sigma")
    return float(np.median(vals))


def _gaussian(dvals: np.ndarray, sigma: float) -> np.ndarray:
    w = np.exp(-(dvals * dvals) / (2.0 * sigma * sigma))
    # exp underflow guard: weights are strictly positive by contract
    return np.maximum(w, np.finfo(np.float64).tiny)


def distance_to_similarity(dist: DistanceMatrix, sigma=AUTO_SIGMA) -> np.ndarray:
    """Gaussian kernel similarities exp(-d^2 / 2 sigma^2) for the full matrix."""
    sigma_val = _resolve_sigma(dist, sigma)
    return _gaussian(dist.entries, sigma_val)


def _resolve_sigma(dist: DistanceMatrix, sigma) -> float:
    if sigma is None or (isinstance(sigma, str) and sigma == AUTO_SIGMA):
        return auto_sigma(dist)
    sigma = float(sigma)
    if not sigma > 0:
        raise InvalidConfig(f"sigma must be > 0, got {sigma}")
    return sigma


def knn_edges(dist: DistanceMatrix, k: int, sigma=AUTO_SIGMA) -> SimilarityGraph:
    """Directed kNN graph: node i points at its k closest nodes (self excluded),
    distance ties broken by ascending node index."""
    if k < 1:
        raise InvalidConfig(f"k must be >= 1, got {k}")
    n = dist.n
    if n == 1:
        # no candidate neighbors; sigma is a placeholder, no weight uses it
        return SimilarityGraph(
            n=1,
            src=np.empty(0, np.int64),
            dst=np.empty(0, np.int64),
            weight=np.empty(0, np.float64),
            k=k,
            kernel_sigma=1.0,
            node_ids=np.arange(1, dtype=np.int64),
        )
    sigma_val = _resolve_sigma(dist, sigma)
    neighbors = kernels.knn_select_impl(dist.entries, k)
    kk = neighbors.shape[1]
    src = np.repeat(np.arange(n, dtype=np.int64), kk)
    dst = neighbors.reshape(-1)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    weight = _gaussian(dist.entries[src, dst], sigma_val)
    return SimilarityGraph(
        n=n,
        src=src,
        dst=dst,
        weight=weight,
        k=k,
        kernel_sigma=sigma_val,
        node_ids=np.arange(n, dtype=np.int64),
    )


def symmetrize(graph: SimilarityGraph, policy: str = "max") -> SimilarityGraph:
    """``max``: every edge becomes mutual with weight max(a_ij, a_ji) over the
    union of directed edges. ``none``: identity."""
    if policy == "none":
        return graph
    if policy != "max":
        raise InvalidConfig(f"unknown symmetrize policy {policy!r}")
    pair_weight: dict = {}
    for s, d, w in zip(graph.src, graph.dst, graph.weight):
        key = (int(s), int(d)) if s < d else (int(d), int(s))
        prev = pair_weight.get(key)
        if prev is None or w > prev:
            pair_weight[key] = w
    src = np.empty(2 * len(pair_weight), np.int64)
    dst = np.empty(2 * len(pair_weight), np.int64)
    weight = np.empty(2 * len(pair_weight), np.float64)
    for i, ((a, b), w) in enumerate(pair_weight.items()):
        src[2 * i], dst[2 * i], weight[2 * i] = a, b, w
        src[2 * i + 1], dst[2 * i + 1], weight[2 * i + 1] = b, a, w
    order = np.lexsort((dst, src))
    return SimilarityGraph(
        n=graph.n,
        src=src[order],
        dst=dst[order],
        weight=weight[order],
        k=graph.k,
        kernel_sigma=graph.kernel_sigma,
        node_ids=graph.node_ids,
        symmetrized=True,
    )


def propagation_operator(
    graph: SimilarityGraph, binary_weights: bool = False
) -> PropagationOperator:
    """Normalized self-looped operator; see module docstring for the entry
    formulas. An isolated node reduces to an identity row."""
    n = graph.n
    w = np.ones_like(graph.weight) if binary_weights else graph.weight
    if w.size and w.min() <= 0.0:
        raise InvalidConfig("adjacency weights must be strictly positive")
    deg = np.bincount(graph.src, weights=w, minlength=n)
    dplus = deg + 1.0
    edge_data = w / np.sqrt(dplus[graph.src] * dplus[graph.dst])
    rows = np.concatenate([graph.src, np.arange(n, dtype=np.int64)])
    cols = np.concatenate([graph.dst, np.arange(n, dtype=np.int64)])
    vals = np.concatenate([edge_data, 1.0 / dplus])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return PropagationOperator(
        n=n, indptr=indptr, indices=cols, data=vals, symmetrized=graph.symmetrized
    )


def identity_operator(n: int) -> PropagationOperator:
    """The edgeless-graph operator: plain identity."""
    return PropagationOperator(
        n=n,
        indptr=np.arange(n + 1, dtype=np.int64),
        indices=np.arange(n, dtype=np.int64),
        data=np.ones(n),
        symmetrized=True,
    )


_MODES = ("supervised_train", "supervised_test", "semi_supervised")


def build_graph(
    features: FeatureMatrix,
    mode: str,
    node_subset=None,
    config: GraphConfig | None = None,
):
    """Distances, kNN selection, symmetrization and the operator over exactly
    the selected nodes.

    Semi-supervised mode uses the whole feature matrix (node_subset must be
    absent); the supervised modes require a subset. The median-distance
    bandwidth is computed within the selected subset only.
    """
    config = config or GraphConfig()
    if mode not in _MODES:
        raise InvalidConfig(f"unknown graph mode {mode!r}")
    if mode == "semi_supervised":
        if node_subset is not None:
            raise InvalidConfig("semi_supervised mode builds the full graph; no node_subset")
        node_ids = np.arange(features.n, dtype=np.int64)
        sub = features
    else:
        if node_subset is None or len(node_subset) == 0:
            raise InvalidConfig(f"{mode} mode requires a non-empty node_subset")
        node_ids = np.asarray(node_subset, dtype=np.int64)
        if node_ids.min() < 0 or node_ids.max() >= features.n:
            raise InvalidConfig("node_subset index out of range")
        if np.unique(node_ids).size != node_ids.size:
            raise InvalidConfig("node_subset contains duplicates")
        if node_ids.size < 2:
            raise DegenerateGraph(f"subset of {node_ids.size} node(s) cannot form a graph")
        sub = FeatureMatrix(features.values[node_ids])
    dist = pairwise_distances(sub)
    graph = knn_edges(dist, config.k, sigma=config.sigma if config.sigma else AUTO_SIGMA)
    graph = symmetrize(graph, config.symmetrize)
    graph = replace(graph, node_ids=node_ids)
    operator = propagation_operator(graph, binary_weights=config.binary_weights)
    return graph, operator


# ---------------------------------------------------------------------------
# JSON persistence


def save_graph(graph: SimilarityGraph, path) -> None:
    doc = {
        "n": graph.n,
        "k": graph.k,
        "sigma": graph.kernel_sigma,
        "symmetrized": graph.symmetrized,
        "node_ids": graph.node_ids,
        "edges": [[int(s), int(d), float(w)] for s, d, w in graph.edges()],
    }
    write_json(doc, path)


def load_graph(path) -> SimilarityGraph:
    doc = read_json(path)
    edges = doc["edges"]
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    weight = np.array([e[2] for e in edges], dtype=np.float64)
    return SimilarityGraph(
        n=int(doc["n"]),
        src=src,
        dst=dst,
        weight=weight,
        k=int(doc["k"]),
        kernel_sigma=float(doc["sigma"]),
        node_ids=np.asarray(doc["node_ids"], dtype=np.int64),
        symmetrized=bool(doc["symmetrized"]),
    )
