import numpy as np
import pytest
import scipy.sparse as sp

from censusdiffmap.errors import (
    DisconnectedGraphWarning,
    IndexOutOfRange,
    IsolatedNode,
    SpectrumExhausted,
)
from censusdiffmap.graph import SimilarityGraph
from censusdiffmap.spectral import (
    apply_sign_convention,
    build_laplacian,
    compute_embedding,
    count_components,
    select_eigenvector,
)

from conftest import random_graph, weighted_graph


def dense_laplacian_oracle(c):
    """Entry-by-entry evaluation of the column-normalized Laplacian."""
    c = np.asarray(c, dtype=float)
    m = len(c)
    out = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            out[i, j] = 1.0 if i == j else -c[i, j] / sum(c[k, j] for k in range(m))
    return out


class TestLaplacian:
    def test_two_nodes_any_weight(self):
        for c in (0.1, 1.0, 37.0):
            lap = build_laplacian(weighted_graph([(0, 1, c)], 2))
            np.testing.assert_array_equal(lap.to_dense(), [[1, -1], [-1, 1]])

    def test_path_of_three(self):
        g = weighted_graph([(0, 1, 1.0), (1, 2, 1.0)], 3)
        lap = build_laplacian(g)
        expected = [[1, -0.5, 0], [-1, 1, -1], [0, -0.5, 1]]
        np.testing.assert_array_equal(lap.to_dense(), expected)
        np.testing.assert_allclose(lap.to_dense(), dense_laplacian_oracle(g.to_dense()), atol=0)
        np.testing.assert_array_equal(lap.degree_vector, [1, 2, 1])

    def test_matches_oracle_on_random_graph(self):
        g, _ = random_graph(np.random.default_rng(0), m_max=40)
        np.testing.assert_allclose(build_laplacian(g).to_dense(),
                                   dense_laplacian_oracle(g.to_dense()), atol=1e-15)

    def test_disconnected_pairs_block_diagonal(self):
        g = weighted_graph([(0, 1, 1.0), (2, 3, 2.0)], 4)
        lap = build_laplacian(g).to_dense()
        assert np.all(lap[:2, 2:] == 0) and np.all(lap[2:, :2] == 0)
        with pytest.warns(DisconnectedGraphWarning):
            emb = compute_embedding(build_laplacian(g), 1)
        assert emb.n_components == 2
        assert count_components(g) == 2

    def test_isolated_node(self):
        g = weighted_graph([(0, 1, 1.0)], 3)
        with pytest.raises(IsolatedNode):
            build_laplacian(g)

    def test_empty_graph_rejected(self):
        g = SimilarityGraph(tuple("abcde"), sp.csr_matrix((5, 5)))
        with pytest.raises(IsolatedNode):
            build_laplacian(g)

    def test_scale_invariance(self):
        g, _ = random_graph(np.random.default_rng(4), m_max=60)
        scaled = SimilarityGraph(g.area_ids, g.weights * 123.5)
        a, b = build_laplacian(g), build_laplacian(scaled)
        np.testing.assert_allclose(a.to_dense(), b.to_dense(), atol=1e-12)
        ea, eb = compute_embedding(a, 3), compute_embedding(b, 3)
        np.testing.assert_allclose(ea.eigenvalues, eb.eigenvalues, atol=1e-12)
        np.testing.assert_allclose(ea.eigenvectors, eb.eigenvectors, atol=1e-10)


class TestEmbedding:
    def test_two_nodes(self):
        # oracle: closed form of [[1,-1],[-1,1]] -> eigenvalues 0 and 2
        emb = compute_embedding(build_laplacian(weighted_graph([(0, 1, 3.0)], 2)), 1)
        np.testing.assert_allclose(emb.eigenvalues, [0, 2], atol=1e-14)
        np.testing.assert_allclose(emb.eigenvectors[:, 1], [0.70710678118654752, -0.70710678118654752],
                                   atol=1e-12)
        v = select_eigenvector(emb, 1)
        assert list(v.index) == ["0", "1"]
        assert v.iloc[0] == pytest.approx(0.70711, abs=1e-5)
        assert v.iloc[1] == pytest.approx(-0.70711, abs=1e-5)

    def test_complete_graph_k4(self):
        g = weighted_graph([(i, j, 1.0) for i in range(4) for j in range(i + 1, 4)], 4)
        lap = build_laplacian(g)
        oracle = np.sort(np.linalg.eigvals(lap.to_dense()).real)
        np.testing.assert_allclose(oracle, [0, 4 / 3, 4 / 3, 4 / 3], atol=1e-12)
        emb = compute_embedding(lap, 3)
        assert emb.n_components == 1
        np.testing.assert_allclose(emb.eigenvalues, [0, 4 / 3, 4 / 3, 4 / 3], atol=1e-12)

    def test_spectrum_exhausted(self):
        lap = build_laplacian(weighted_graph([(0, 1, 1.0)], 2))
        with pytest.raises(SpectrumExhausted):
            compute_embedding(lap, 2)

    def test_residual_norm_and_sign(self):
        g, _ = random_graph(np.random.default_rng(7), m_max=120)
        lap = build_laplacian(g)
        emb = compute_embedding(lap, 3)
        L = lap.to_dense()
        for lam, v in zip(emb.eigenvalues, emb.eigenvectors.T):
            assert np.abs(L @ v - lam * v).max() < 1e-8 * np.abs(v).max()
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
            assert v[np.argmax(np.abs(v))] > 0
        assert np.all(np.diff(emb.eigenvalues) >= 0)

    def test_deterministic(self):
        g, _ = random_graph(np.random.default_rng(8), m_max=150)
        lap = build_laplacian(g)
        for solver in ("dense", "iterative"):
            a = compute_embedding(lap, 3, solver=solver)
            b = compute_embedding(lap, 3, solver=solver)
            assert np.array_equal(a.eigenvectors, b.eigenvectors)

    def test_iterative_large_graph_matches_dense(self):
        rng = np.random.default_rng(9)
        from conftest import knn_graph_from_points

        g = knn_graph_from_points(rng.standard_normal((700, 4)), 10)
        lap = build_laplacian(g)
        it = compute_embedding(lap, 4)  # above the dense cutoff
        de = compute_embedding(lap, 4, solver="dense")
        np.testing.assert_allclose(it.eigenvalues, de.eigenvalues, atol=1e-10)
        cos = np.abs(np.sum(it.eigenvectors * de.eigenvectors, axis=0))
        assert np.all(cos > 1 - 1e-6)

    def test_explicit_zero_tolerance(self):
        lap = build_laplacian(weighted_graph([(0, 1, 1.0), (1, 2, 1.0)], 3))
        emb = compute_embedding(lap, 1, zero_tolerance=1e-3)
        assert emb.zero_tolerance == 1e-3
        assert emb.n_components == 1

    def test_to_frame(self):
        lap = build_laplacian(weighted_graph([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 0.5)], 3))
        frame = compute_embedding(lap, 2).to_frame()
        assert list(frame.columns) == ["ev1", "ev2"]
        assert frame.index.name == "area_code"


class TestSelect:
    def test_index_rules(self):
        emb = compute_embedding(build_laplacian(weighted_graph([(0, 1, 1.0)], 2)), 1)
        with pytest.raises(IndexOutOfRange):
            select_eigenvector(emb, 0)
        with pytest.raises(IndexOutOfRange):
            select_eigenvector(emb, 2)


class TestComponents:
    def test_path(self):
        assert count_components(weighted_graph([(0, 1, 1.0), (1, 2, 1.0)], 3)) == 1

    def test_two_edges(self):
        assert count_components(weighted_graph([(0, 1, 1.0), (2, 3, 1.0)], 4)) == 2


class TestSignConvention:
    def test_flip(self):
        np.testing.assert_array_equal(apply_sign_convention(np.array([0.1, -0.9, 0.2])),
                                      [-0.1, 0.9, -0.2])

    def test_tie_uses_first_index(self):
        v = np.array([-0.5, 0.5 * (1 + 1e-13), 0.1])
        assert apply_sign_convention(v)[0] > 0

    def test_zero_vector_untouched(self):
        np.testing.assert_array_equal(apply_sign_convention(np.zeros(3)), np.zeros(3))
