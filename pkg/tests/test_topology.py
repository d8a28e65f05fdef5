import csv

import numpy as np
import pytest

from p2d2.errors import DegenerateSpectrum, DisconnectedGraph, EmptyGraph, InvalidCombinationMatrix
from p2d2.topology import (
    CombinationMatrix,
    Graph,
    complete_graph,
    consensus_matrix,
    graph_from_edges,
    graph_from_spec,
    load_combination_csv,
    metropolis_weights,
    path_graph,
    random_connected_graph,
    ring_graph,
    spectral_bounds,
)


def brute_force_metropolis(K, edges):
    deg = [sum(1 for e in edges if k in e) for k in range(K)]
    A = [[0.0] * K for _ in range(K)]
    for s, k in edges:
        A[s][k] = A[k][s] = 1.0 / (1 + max(deg[s], deg[k]))
    for k in range(K):
        A[k][k] = 1.0 - sum(A[k][s] for s in range(K) if s != k)
    return np.array(A)


def test_metropolis_path_graph():
    A = metropolis_weights(path_graph(3)).A
    expected = np.array([[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])
    np.testing.assert_allclose(A, expected, atol=1e-15)
    np.testing.assert_allclose(A.sum(axis=0), 1.0, atol=1e-15)
    np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-15)


def test_metropolis_complete_graph():
    np.testing.assert_allclose(metropolis_weights(complete_graph(3)).A, np.full((3, 3), 1 / 3), atol=1e-15)


def test_metropolis_matches_brute_force_on_random_graphs():
    for seed in range(10):
        g = random_connected_graph(12, 0.3, seed)
        np.testing.assert_allclose(metropolis_weights(g).A, brute_force_metropolis(12, g.sorted_edges()),
                                   atol=1e-15)


def test_metropolis_rejects_disconnected_and_tiny():
    with pytest.raises(DisconnectedGraph):
        metropolis_weights(Graph(2))
    with pytest.raises(EmptyGraph):
        metropolis_weights(Graph(1))


@pytest.mark.parametrize("seed", range(20))
def test_combination_matrix_invariants(seed):
    g = random_connected_graph(15, 0.25, seed)
    A = metropolis_weights(g).A
    assert np.max(np.abs(A - A.T)) <= 1e-12
    assert np.max(np.abs(A.sum(axis=0) - 1)) <= 1e-12
    assert np.max(np.abs(A.sum(axis=1) - 1)) <= 1e-12
    off = ~(g.adjacency() | np.eye(15, dtype=bool))
    assert np.all(A[off] == 0)
    eig = np.linalg.eigvalsh(A)
    assert eig[0] > -1 and eig[-1] <= 1 + 1e-12
    assert metropolis_weights(g).primitivity_power() <= 15


def test_invalid_matrices_rejected():
    with pytest.raises(InvalidCombinationMatrix):
        CombinationMatrix(np.array([[0.5, 0.5], [0.4, 0.6]]))
    with pytest.raises(InvalidCombinationMatrix):
        CombinationMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))  # eigenvalue -1
    with pytest.raises(InvalidCombinationMatrix):
        CombinationMatrix(np.full((3, 3), 1 / 3), path_graph(3))  # weight on non-edge


def test_consensus_matrix_identity_case():
    B = consensus_matrix(np.eye(1))
    assert np.all(B.B == 0)


@pytest.mark.parametrize(
    "graph, expected",
    [(complete_graph(3), [0, 0.5, 0.5]), (path_graph(3), [0, 1 / 6, 0.5])],
)
def test_consensus_eigenvalues(graph, expected):
    B = consensus_matrix(metropolis_weights(graph))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(B.B)), expected, atol=1e-14)


@pytest.mark.parametrize(
    "graph, expected",
    [(path_graph(3), (0.5, 1 / 6)), (complete_graph(3), (0.5, 0.5)), (complete_graph(2), (0.5, 0.5))],
)
def test_spectral_bounds_examples(graph, expected):
    sb = spectral_bounds(consensus_matrix(metropolis_weights(graph)))
    assert sb.sigma_max == pytest.approx(expected[0], abs=1e-14)
    assert sb.sigma_under == pytest.approx(expected[1], abs=1e-14)


def test_spectral_bounds_degenerate():
    with pytest.raises(DegenerateSpectrum):
        spectral_bounds(consensus_matrix(np.eye(1)))


def test_consensus_properties_random(rng):
    for seed in range(5):
        B = consensus_matrix(metropolis_weights(random_connected_graph(10, 0.3, seed)))
        K = B.num_agents
        np.testing.assert_allclose(B.B @ np.ones(K), 0, atol=1e-15)
        assert np.max(np.abs(B.B_sqrt @ B.B_sqrt - B.B)) < 1e-10
        sb = spectral_bounds(B)
        assert 0 < sb.sigma_under <= sb.sigma_max < 1
        for _ in range(100):
            x = rng.standard_normal(K)
            x -= x.mean()
            x /= np.linalg.norm(x)
            q = x @ B.B @ x
            assert q > 0
            assert sb.sigma_under - 1e-12 <= q <= sb.sigma_max + 1e-12


def test_pinv_of_square_root():
    B = consensus_matrix(metropolis_weights(ring_graph(6)))
    P = B.B_sqrt @ B.B_sqrt_pinv
    np.testing.assert_allclose(P, B.range_projector(), atol=1e-12)
    np.testing.assert_allclose(P, np.eye(6) - np.full((6, 6), 1 / 6), atol=1e-12)


def test_random_graph_forced_and_deterministic():
    assert random_connected_graph(2, 1.0, 3).edges == {(0, 1)}
    assert len(random_connected_graph(5, 1.0, 99).edges) == 10
    g1, g2 = random_connected_graph(20, 0.2, 7), random_connected_graph(20, 0.2, 7)
    assert g1.edges == g2.edges
    assert g1.is_connected()


def test_graph_validation():
    with pytest.raises(ValueError):
        graph_from_edges(3, [(0, 0)])
    with pytest.raises(ValueError):
        graph_from_edges(3, [(0, 3)])
    assert graph_from_edges(3, [(1, 0), (0, 1)]).edges == {(0, 1)}


def test_graph_from_spec():
    assert graph_from_spec({"type": "ring", "K": 5}).edges == ring_graph(5).edges
    assert graph_from_spec({"type": "edges", "K": 3, "edges": [[0, 1], [1, 2]]}).edges == path_graph(3).edges
    assert graph_from_spec({"type": "random", "K": 8, "p": 0.4, "seed": 1}).edges == \
        random_connected_graph(8, 0.4, 1).edges
    with pytest.raises(ValueError):
        graph_from_spec({"type": "star", "K": 3})


def test_load_combination_csv(tmp_path):
    A = metropolis_weights(ring_graph(5)).A
    path = tmp_path / "A.csv"
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows([[repr(float(v)) for v in row] for row in A])
    loaded = load_combination_csv(path)
    np.testing.assert_array_equal(loaded.A, A)
    assert loaded.graph.edges == ring_graph(5).edges


@pytest.mark.parametrize("seed", range(10))
def test_sqrt_annihilates_consensus_vector(seed):
    B = consensus_matrix(metropolis_weights(random_connected_graph(12, 0.3, seed)))
    ones = np.ones(12)
    assert np.linalg.norm(B.B_sqrt @ ones) < 1e-13
    np.testing.assert_allclose(B.B_sqrt @ B.B_sqrt, B.B, atol=1e-13)
