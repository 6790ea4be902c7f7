import math

import numpy as np
import pytest

from linksync.graph import (
    CommGraph,
    graph_from_positions,
    incidence_matrix,
    is_connected,
    weighted_laplacian,
)

LINE_POSITIONS = [1.0, 1.5, 2.1, 2.7, 3.2]

JOINT_POSITIONS = np.array(
    [
        [np.pi / 12, -5 * np.pi / 12],
        [np.pi / 6, -5 * np.pi / 12],
        [5 * np.pi / 24, -7 * np.pi / 24],
        [np.pi / 4, -5 * np.pi / 24],
        [3 * np.pi / 8, -5 * np.pi / 12],
    ]
)


def brute_force_edges(positions, threshold):
    """Independent oracle: all-pairs distances, isclose ties count as inside."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    n = pos.shape[0]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            d = math.dist(pos[i], pos[j])
            if d <= threshold or math.isclose(d, threshold, rel_tol=1e-9):
                edges.append((i, j))
    return tuple(edges)


def random_graph(rng):
    n = int(rng.integers(2, 12))
    edges = []
    weights = []
    p_edge = rng.uniform(0.1, 0.9)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_edge:
                edges.append((i, j))
                weights.append(float(rng.uniform(0.1, 3.0)))
    return CommGraph(n, tuple(edges), tuple(weights))


def test_line_positions_build_a_path():
    g = graph_from_positions(LINE_POSITIONS, radius=1.0, threshold=0.6)
    assert g.edges == ((0, 1), (1, 2), (2, 3), (3, 4))
    assert g.edges == brute_force_edges(LINE_POSITIONS, 0.6)
    assert is_connected(g)


def test_single_agent_has_no_edges():
    g = graph_from_positions([0.7], radius=1.0, threshold=0.6)
    assert g.edges == ()


def test_joint_configuration_edge_sets():
    # at the full radius every pair qualifies (largest distance ~0.9163)
    g_full = graph_from_positions(JOINT_POSITIONS, radius=1.0, threshold=1.0)
    assert g_full.edges == brute_force_edges(JOINT_POSITIONS, 1.0)
    assert g_full.n_edges == 10
    assert (0, 3) in g_full.edges and (0, 4) in g_full.edges
    # a 0.8 threshold drops exactly the two longest pairs
    g_08 = graph_from_positions(JOINT_POSITIONS, radius=1.0, threshold=0.8)
    assert g_08.edges == brute_force_edges(JOINT_POSITIONS, 0.8)
    assert g_08.edges == (
        (0, 1), (0, 2), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4),
    )
    # the (3, 4) pair sits at ~0.763, past the default radius - buffer cut
    d45 = float(np.linalg.norm(JOINT_POSITIONS[3] - JOINT_POSITIONS[4]))
    assert 0.6 < d45 < 0.8


@pytest.mark.parametrize("threshold", [0.0, -0.5, 1.2])
def test_bad_threshold_rejected(threshold):
    with pytest.raises(ValueError):
        graph_from_positions(LINE_POSITIONS, radius=1.0, threshold=threshold)


def test_build_is_deterministic_and_symmetric():
    g1 = graph_from_positions(JOINT_POSITIONS, 1.0, 0.8)
    g2 = graph_from_positions(JOINT_POSITIONS, 1.0, 0.8)
    assert g1.edges == g2.edges
    for i in range(g1.n_agents):
        for j in g1.neighbors(i):
            assert i in g1.neighbors(j)


def test_graph_validation():
    with pytest.raises(ValueError):
        CommGraph(3, ((0, 0),))
    with pytest.raises(ValueError):
        CommGraph(3, ((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        CommGraph(3, ((1, 0),))
    with pytest.raises(ValueError):
        CommGraph(3, ((0, 1),), (0.0,))
    with pytest.raises(ValueError):
        CommGraph(2, ((0, 5),))


def test_incidence_two_agents():
    g = CommGraph(2, ((0, 1),))
    d = incidence_matrix(g)
    assert d.shape == (2, 1)
    assert d[0, 0] == -1.0 and d[1, 0] == 1.0


def test_incidence_empty_edge_set():
    g = CommGraph(4, ())
    assert incidence_matrix(g).shape == (4, 0)


def test_incidence_columns_sum_to_zero():
    g = graph_from_positions([0.0, 0.5, 1.0], radius=1.0, threshold=0.6)
    d = incidence_matrix(g)
    assert np.all(d.sum(axis=0) == 0.0)


def test_laplacian_two_agents():
    g = CommGraph(2, ((0, 1),))
    assert np.array_equal(weighted_laplacian(g), [[1.0, -1.0], [-1.0, 1.0]])


def test_laplacian_path_of_three():
    g = CommGraph(3, ((0, 1), (1, 2)))
    lap = weighted_laplacian(g)
    assert np.array_equal(np.diag(lap), [1.0, 2.0, 1.0])
    assert lap[0, 1] == lap[1, 0] == -1.0
    assert lap[0, 2] == 0.0


def test_laplacian_equals_incidence_factorization():
    rng = np.random.Generator(np.random.PCG64(42))
    for _ in range(100):
        g = random_graph(rng)
        d = incidence_matrix(g)
        w = np.diag(g.weights) if g.n_edges else np.zeros((0, 0))
        assert np.max(np.abs(weighted_laplacian(g) - d @ w @ d.T), initial=0.0) <= 1e-12


def test_connectivity_basics():
    assert is_connected(CommGraph(5, ((0, 1), (1, 2), (2, 3), (3, 4))))
    assert not is_connected(CommGraph(4, ((0, 1), (2, 3))))
    assert is_connected(CommGraph(1, ()))
    assert not is_connected(CommGraph(2, ()))


def test_connectivity_matches_spectral_test():
    rng = np.random.Generator(np.random.PCG64(7))
    for _ in range(50):
        g = random_graph(rng)
        lam = np.linalg.eigvalsh(weighted_laplacian(g))
        spectral = lam[1] > 1e-8 * max(1.0, float(lam[-1]))
        assert is_connected(g) == spectral
