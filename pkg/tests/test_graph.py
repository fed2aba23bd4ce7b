import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphelastic.graph import (
    PAPER_LAPLACIAN,
    RENORMALIZED_ADJACENCY,
    GraphError,
    build_graph,
    descriptor_matrices,
    feature_matrix,
    permute_graph,
    propagation_operator,
)
from graphelastic.microstructure import generate_polycrystal

# five-crystal example, 1-based contacts 1-2, 2-3, 3-4, 3-5, 4-5
FIVE = build_graph(5, [(0, 1), (1, 2), (2, 3), (2, 4), (3, 4)])

A_EXPECTED = np.array([
    [0, 1, 0, 0, 0],
    [1, 0, 1, 0, 0],
    [0, 1, 0, 1, 1],
    [0, 0, 1, 0, 1],
    [0, 0, 1, 1, 0],
], dtype=float)
r2, r6 = np.sqrt(2) / 2, np.sqrt(6) / 6
L_SYM_EXPECTED = np.array([
    [1, -r2, 0, 0, 0],
    [-r2, 1, -r6, 0, 0],
    [0, -r6, 1, -r6, -r6],
    [0, 0, -r6, 1, -0.5],
    [0, 0, -r6, -0.5, 1],
])


def test_five_crystal_matrices():
    m = descriptor_matrices(FIVE)
    np.testing.assert_array_equal(m.A, A_EXPECTED)
    np.testing.assert_array_equal(m.A_hat, A_EXPECTED + np.eye(5))
    np.testing.assert_array_equal(m.D, np.diag([1, 2, 3, 2, 2]))
    np.testing.assert_array_equal(m.L, np.diag([1, 2, 3, 2, 2]) - A_EXPECTED)
    np.testing.assert_allclose(m.L_sym, L_SYM_EXPECTED, atol=1e-12, rtol=0)


def test_edge_normalization():
    g = build_graph(3, [(1, 0), (0, 1), (2, 1)])
    assert g.sorted_edges() == [(0, 1), (1, 2)]


@pytest.mark.parametrize("bad", [[(0, 0)], [(0, 3)], [(-1, 1)]])
def test_rejects_bad_contacts(bad):
    with pytest.raises(GraphError):
        build_graph(3, bad)


def test_rejects_empty_graph():
    with pytest.raises(GraphError):
        build_graph(0, [])


def test_isolated_node_has_zero_row():
    m = descriptor_matrices(build_graph(3, [(0, 1)]))
    assert np.all(m.L_sym[2] == 0)
    assert m.L_sym[0, 0] == 1.0


def test_single_node_operator():
    g = build_graph(1, [])
    assert propagation_operator(g)[0, 0] == 1.0
    assert propagation_operator(g, PAPER_LAPLACIAN)[0, 0] == 0.0


def test_operator_modes_complement():
    a = propagation_operator(FIVE, RENORMALIZED_ADJACENCY)
    b = propagation_operator(FIVE, PAPER_LAPLACIAN)
    np.testing.assert_allclose(a + b, np.eye(5), atol=1e-15)


def test_unknown_mode():
    with pytest.raises(GraphError):
        propagation_operator(FIVE, "spectral")


def test_feature_matrix():
    p = generate_polycrystal(3, 6, (8, 8, 8))
    X = feature_matrix(p)
    assert X.shape == (6, 4)
    assert X[:, 0].sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(X[:, 1:], p.orientations)


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 9))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return build_graph(n, chosen)


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_descriptor_invariants(g):
    m = descriptor_matrices(g)
    for M in (m.A, m.A_hat, m.L, m.L_sym):
        np.testing.assert_array_equal(M, M.T)
    assert np.all(np.diag(m.A) == 0)
    np.testing.assert_allclose(m.L.sum(axis=1), 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(m.L).min() > -1e-12
    ev = np.linalg.eigvalsh(m.L_sym)
    assert ev.min() > -1e-12 and ev.max() < 2 + 1e-12


@settings(max_examples=40, deadline=None)
@given(graphs(), st.randoms(use_true_random=False))
def test_relabelling_equivariance(g, rnd):
    perm = list(range(g.n_nodes))
    rnd.shuffle(perm)
    perm = np.array(perm)
    P = np.eye(g.n_nodes)[perm]  # row i is e_perm[i]; P.T maps old->new
    h = permute_graph(g, perm)
    for mode in (RENORMALIZED_ADJACENCY, PAPER_LAPLACIAN):
        a = propagation_operator(g, mode)
        b = propagation_operator(h, mode)
        np.testing.assert_allclose(b, P.T @ a @ P, atol=1e-14)
