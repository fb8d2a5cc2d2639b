"""Distances, similarity kernel, kNN edges, symmetrization, the operator."""

import json
import math

import numpy as np
import pytest

from simgcn import dataset, graph
from simgcn.errors import DegenerateGeometry, DegenerateGraph, InvalidConfig

from oracles import (
    normalized_operator_dense,
    exhaustive_knn,
    gaussian_weight,
    naive_pairwise,
    power_iteration,
    symmetrize_max_dense,
)


def _fm(values):
    return dataset.FeatureMatrix(np.asarray(values, dtype=float))


def _manual_graph(n, edges, k=1, sigma=1.0, symmetrized=False):
    edges = sorted(edges)
    return graph.SimilarityGraph(
        n=n,
        src=np.array([e[0] for e in edges], dtype=np.int64),
        dst=np.array([e[1] for e in edges], dtype=np.int64),
        weight=np.array([e[2] for e in edges], dtype=np.float64),
        k=k,
        kernel_sigma=sigma,
        node_ids=np.arange(n, dtype=np.int64),
        symmetrized=symmetrized,
    )


def _edge_set(g):
    return {(int(s), int(d)): float(w) for s, d, w in g.edges()}


# ---------------------------------------------------------------------------
# distances


def test_pairwise_hand_example():
    dm = graph.pairwise_distances(_fm([[0.0], [1.0], [5.0]]))
    assert dm.entries[0, 1] == 1.0
    assert dm.entries[0, 2] == 5.0
    assert dm.entries[1, 2] == 4.0
    assert np.all(np.diag(dm.entries) == 0.0)


def test_pairwise_identical_rows():
    dm = graph.pairwise_distances(_fm([[2.0, 3.0], [2.0, 3.0], [0.0, 0.0]]))
    assert dm.entries[0, 1] == 0.0
    assert dm.entries[1, 0] == 0.0


def test_pairwise_matches_oracle(rng):
    x = rng.normal(size=(50, 8))
    dm = graph.pairwise_distances(_fm(x))
    assert np.max(np.abs(dm.entries - naive_pairwise(x))) < 1e-12


# ---------------------------------------------------------------------------
# similarity kernel


def test_similarity_kernel_values():
    dm = graph.DistanceMatrix(np.array([[0.0, 2.0], [2.0, 0.0]]))
    sims = graph.distance_to_similarity(dm, sigma=2.0)
    assert sims[0, 0] == 1.0  # d = 0
    half = 2.0 * math.sqrt(2.0 * math.log(2.0))
    dm2 = graph.DistanceMatrix(np.array([[0.0, half], [half, 0.0]]))
    sims2 = graph.distance_to_similarity(dm2, sigma=2.0)
    assert abs(sims2[0, 1] - 0.5) < 1e-12


def test_auto_sigma_median_rule():
    dm = graph.pairwise_distances(_fm([[0.0], [1.0], [5.0]]))
    assert graph.auto_sigma(dm) == 4.0  # median of {1, 4, 5}
    sims = graph.distance_to_similarity(dm)
    # exp(-1 / 32), value pinned after independent evaluation
    assert abs(sims[0, 1] - 0.9692332344763441) < 1e-9


def test_auto_sigma_degenerate():
    dm = graph.DistanceMatrix(np.zeros((3, 3)))
    with pytest.raises(DegenerateGeometry):
        graph.auto_sigma(dm)


# ---------------------------------------------------------------------------
# kNN edges


def test_knn_hand_example():
    dm = graph.pairwise_distances(_fm([[0.0], [1.0], [5.0]]))
    g = graph.knn_edges(dm, k=1)
    assert set(_edge_set(g)) == {(0, 1), (1, 0), (2, 1)}
    in_deg = np.bincount(g.dst, minlength=3)
    assert in_deg[1] == 2
    assert g.kernel_sigma == 4.0
    assert abs(_edge_set(g)[(0, 1)] - 0.9692332344763441) < 1e-9
    assert abs(_edge_set(g)[(2, 1)] - math.exp(-0.5)) < 1e-12


def test_knn_coincident_tie_break():
    dm = graph.DistanceMatrix(np.zeros((3, 3)))
    g = graph.knn_edges(dm, k=1, sigma=1.0)
    assert set(_edge_set(g)) == {(0, 1), (1, 0), (2, 0)}
    assert np.allclose(g.weight, 1.0)


def test_knn_matches_exhaustive_oracle(rng):
    x = rng.normal(size=(100, 16))
    dm = graph.pairwise_distances(_fm(x))
    g = graph.knn_edges(dm, k=3, sigma=1.5)
    got = sorted(zip(g.src.tolist(), g.dst.tolist()))
    assert got == exhaustive_knn(dm.entries, 3)
    for s, d, w in g.edges():
        assert w == gaussian_weight(dm.entries[s, d], 1.5)


def test_knn_k_exceeding_n():
    dm = graph.pairwise_distances(_fm([[0.0], [1.0], [3.0]]))
    g = graph.knn_edges(dm, k=10, sigma=1.0)
    assert g.edge_count == 6  # everyone connects to everyone
    g.validate()


def test_knn_single_node_graph():
    dm = graph.DistanceMatrix(np.zeros((1, 1)))
    g = graph.knn_edges(dm, k=1, sigma=None)
    assert g.n == 1 and g.edge_count == 0
    g.validate()


def test_knn_validates():
    dm = graph.pairwise_distances(_fm(np.random.default_rng(5).normal(size=(20, 3))))
    g = graph.knn_edges(dm, k=4)
    g.validate()
    assert np.all(g.out_degrees() == 4)


# ---------------------------------------------------------------------------
# symmetrization


def test_symmetrize_single_edge():
    g = _manual_graph(2, [(0, 1, 0.9)])
    sg = graph.symmetrize(g, "max")
    assert _edge_set(sg) == {(0, 1): 0.9, (1, 0): 0.9}
    assert sg.symmetrized


def test_symmetrize_fixed_point():
    g = _manual_graph(2, [(0, 1, 0.7), (1, 0, 0.7)])
    sg = graph.symmetrize(g, "max")
    assert _edge_set(sg) == _edge_set(g)


def test_symmetrize_fig3_style_matches_dense_oracle():
    edges = [(0, 1, 0.9), (1, 0, 0.8), (2, 1, 0.7)]
    g = _manual_graph(3, edges)
    sg = graph.symmetrize(g, "max")
    assert _edge_set(sg) == {(0, 1): 0.9, (1, 0): 0.9, (1, 2): 0.7, (2, 1): 0.7}
    dense = symmetrize_max_dense(3, edges)
    for (s, d), w in _edge_set(sg).items():
        assert dense[s, d] == w


def test_symmetrize_none_is_identity():
    g = _manual_graph(3, [(0, 1, 0.9), (1, 0, 0.8), (2, 1, 0.7)])
    assert graph.symmetrize(g, "none") is g


# ---------------------------------------------------------------------------
# propagation operator


def test_operator_empty_graph_is_exact_identity():
    g = _manual_graph(4, [], k=1)
    S = graph.propagation_operator(g)
    assert np.array_equal(S.to_dense(), np.eye(4))


def test_operator_two_node_unit_edge():
    g = _manual_graph(2, [(0, 1, 1.0), (1, 0, 1.0)], symmetrized=True)
    S = graph.propagation_operator(g)
    assert np.max(np.abs(S.to_dense() - 0.5)) < 1e-12


def test_operator_two_node_half_edge():
    g = _manual_graph(2, [(0, 1, 0.5), (1, 0, 0.5)], symmetrized=True)
    S = graph.propagation_operator(g).to_dense()
    assert abs(S[0, 0] - 2.0 / 3.0) < 1e-12
    assert abs(S[1, 1] - 2.0 / 3.0) < 1e-12
    assert abs(S[0, 1] - 1.0 / 3.0) < 1e-12
    assert abs(S[1, 0] - 1.0 / 3.0) < 1e-12


def test_operator_matches_dense_oracle(rng):
    for _ in range(5):
        n = int(rng.integers(3, 25))
        x = rng.normal(size=(n, 4))
        dm = graph.pairwise_distances(_fm(x))
        g = graph.symmetrize(graph.knn_edges(dm, k=2), "max")
        edges = list(g.edges())
        S = graph.propagation_operator(g).to_dense()
        assert np.max(np.abs(S - normalized_operator_dense(n, edges))) < 1e-12
        Sb = graph.propagation_operator(g, binary_weights=True).to_dense()
        assert np.max(np.abs(Sb - normalized_operator_dense(n, edges, binary=True))) < 1e-12


def test_operator_diag_positive_entries_bounded(rng):
    x = rng.normal(size=(30, 3))
    g, S = graph.build_graph(_fm(x), "semi_supervised", config=graph.GraphConfig(k=3))
    dense = S.to_dense()
    assert np.all(np.diag(dense) > 0.0)
    assert dense.min() >= 0.0 and dense.max() <= 1.0


def test_operator_exactly_symmetric_under_max_policy(rng):
    x = rng.normal(size=(40, 5))
    g, S = graph.build_graph(_fm(x), "semi_supervised", config=graph.GraphConfig(k=3))
    dense = S.to_dense()
    assert np.array_equal(dense, dense.T)
    assert S.symmetrized


def test_operator_weight_regular_rows_sum_to_one():
    # directed ring + reverse: every node has weighted out-degree 2w
    n, w = 6, 0.4
    edges = []
    for i in range(n):
        edges.append((i, (i + 1) % n, w))
        edges.append(((i + 1) % n, i, w))
    g = _manual_graph(n, edges, symmetrized=True)
    S = graph.propagation_operator(g).to_dense()
    assert np.max(np.abs(S.sum(axis=1) - 1.0)) < 1e-12


def test_operator_isolated_node_identity_row():
    g = _manual_graph(3, [(0, 1, 0.8), (1, 0, 0.8)], symmetrized=True)
    S = graph.propagation_operator(g).to_dense()
    assert np.array_equal(S[2], [0.0, 0.0, 1.0])


def test_operator_spectral_radius_bounded(rng):
    for _ in range(20):
        n = int(rng.integers(4, 51))
        x = rng.normal(size=(n, 3))
        _, S = graph.build_graph(_fm(x), "semi_supervised", config=graph.GraphConfig(k=2))
        lam = power_iteration(S.to_dense())
        assert lam <= 1.0 + 1e-9


def test_operator_transpose_product(rng):
    x = rng.normal(size=(15, 3))
    g = graph.knn_edges(graph.pairwise_distances(_fm(x)), k=2)  # directed, asymmetric
    S = graph.propagation_operator(g)
    X = rng.normal(size=(15, 4))
    assert np.max(np.abs(S.t_matmul(X) - S.to_dense().T @ X)) < 1e-12
    assert np.max(np.abs(S.matmul(X) - S.to_dense() @ X)) < 1e-12


def test_knn_topology_scale_invariant(rng):
    x = rng.normal(size=(40, 6))
    dm1 = graph.pairwise_distances(_fm(x))
    dm2 = graph.pairwise_distances(_fm(x * 37.5))
    g1 = graph.knn_edges(dm1, k=3)
    g2 = graph.knn_edges(dm2, k=3)
    assert np.array_equal(g1.src, g2.src)
    assert np.array_equal(g1.dst, g2.dst)


# ---------------------------------------------------------------------------
# build_graph


def test_build_graph_semi_covers_all_nodes(rng):
    x = rng.normal(size=(25, 4))
    g, _ = graph.build_graph(_fm(x), "semi_supervised", config=graph.GraphConfig(k=2))
    assert g.n == 25
    assert np.array_equal(g.node_ids, np.arange(25))


def test_build_graph_semi_rejects_subset(rng):
    x = rng.normal(size=(10, 2))
    with pytest.raises(InvalidConfig):
        graph.build_graph(_fm(x), "semi_supervised", node_subset=[0, 1])


def test_build_graph_supervised_split(rng):
    x = rng.normal(size=(100, 4))
    train_idx = np.arange(80)
    test_idx = np.arange(80, 100)
    g_tr, _ = graph.build_graph(_fm(x), "supervised_train", train_idx, graph.GraphConfig(k=3))
    g_te, _ = graph.build_graph(_fm(x), "supervised_test", test_idx, graph.GraphConfig(k=3))
    assert g_tr.n == 80 and g_te.n == 20
    assert np.intersect1d(g_tr.node_ids, g_te.node_ids).size == 0


def test_build_graph_subset_too_small(rng):
    x = rng.normal(size=(10, 2))
    with pytest.raises(DegenerateGraph):
        graph.build_graph(_fm(x), "supervised_test", [4], graph.GraphConfig(k=1))


def test_build_graph_auto_sigma_is_subset_local(rng):
    x = rng.normal(size=(30, 3))
    subset = np.arange(10)
    g_sub, _ = graph.build_graph(_fm(x), "supervised_train", subset, graph.GraphConfig(k=2))
    dm_sub = graph.pairwise_distances(_fm(x[:10]))
    assert g_sub.kernel_sigma == graph.auto_sigma(dm_sub)


def test_build_graph_requires_subset_for_supervised(rng):
    x = rng.normal(size=(10, 2))
    with pytest.raises(InvalidConfig):
        graph.build_graph(_fm(x), "supervised_train")


# ---------------------------------------------------------------------------
# serialization


def test_graph_json_round_trip(tmp_path, rng):
    x = rng.normal(size=(12, 3))
    g, _ = graph.build_graph(_fm(x), "semi_supervised", config=graph.GraphConfig(k=2))
    path = tmp_path / "g.json"
    graph.save_graph(g, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"n", "k", "sigma", "symmetrized", "node_ids", "edges"}
    pairs = [(e[0], e[1]) for e in doc["edges"]]
    assert pairs == sorted(pairs)
    back = graph.load_graph(path)
    assert back.n == g.n and back.k == g.k
    assert back.kernel_sigma == g.kernel_sigma  # 17 sig digits round-trip
    assert np.array_equal(back.src, g.src)
    assert np.array_equal(back.dst, g.dst)
    assert np.array_equal(back.weight, g.weight)
