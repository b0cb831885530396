import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copt.errors import (
    DuplicateEdge,
    KTooLarge,
    NonPositiveWeight,
    NotConnected,
    SelfLoop,
    SingularBeyondOnes,
    VertexOutOfRange,
)
from copt.graph import (
    Graph,
    fiedler_partition,
    is_valid,
    laplacian,
    pseudoinverse,
    spectral_projection,
    spectral_values,
    validate,
)

from helpers import complete, path, random_connected, star


def test_validate_accepts_path():
    assert validate(path(3)) is None


@pytest.mark.parametrize(
    "graph, error",
    [
        (Graph.from_edges(4, [(0, 1), (2, 3)]), NotConnected),
        (Graph.from_edges(2, [(0, 0), (0, 1)]), SelfLoop),
        (Graph.from_edges(2, [(0, 1), (1, 0)]), DuplicateEdge),
        (Graph.from_edges(2, [(0, 1, 0.0)]), NonPositiveWeight),
        (Graph.from_edges(2, [(0, 1, -1.0)]), NonPositiveWeight),
        (Graph.from_edges(2, [(0, 2)]), VertexOutOfRange),
    ],
)
def test_validate_rejects(graph, error):
    with pytest.raises(error):
        validate(graph)
    assert not is_valid(graph)


def test_validate_reports_first_violation():
    # a self-loop comes before the missing connectivity
    with pytest.raises(SelfLoop):
        validate(Graph.from_edges(4, [(0, 0), (2, 3)]))


def test_laplacian_examples():
    np.testing.assert_array_equal(laplacian(path(2)), [[1, -1], [-1, 1]])
    np.testing.assert_array_equal(laplacian(complete(3)), [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    L = laplacian(star(4))
    assert L[0, 0] == 3
    np.testing.assert_array_equal(L[0, 1:], [-1, -1, -1])


def test_weighted_laplacian():
    L = laplacian(Graph.from_edges(3, [(0, 1, 2.0), (1, 2, 0.5)]))
    np.testing.assert_allclose(L, [[2, -2, 0], [-2, 2.5, -0.5], [0, -0.5, 0.5]])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 12), p=st.floats(0.2, 0.9), seed=st.integers(0, 10**6))
def test_laplacian_invariants(n, p, seed):
    L = laplacian(random_connected(n, p, seed))
    assert np.array_equal(L, L.T)
    off = L[~np.eye(n, dtype=bool)]
    assert np.all(off <= 0)
    assert np.max(np.abs(L.sum(axis=1))) <= 1e-10
    assert np.linalg.eigvalsh(L)[0] >= -1e-8


def test_pseudoinverse_examples():
    np.testing.assert_allclose(pseudoinverse(laplacian(path(2))), [[0.25, -0.25], [-0.25, 0.25]], atol=1e-12)
    expected = (3 * np.eye(3) - np.ones((3, 3))) / 9
    np.testing.assert_allclose(pseudoinverse(laplacian(complete(3))), expected, atol=1e-12)


def test_pseudoinverse_routes_agree():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 31))
        L = laplacian(random_connected(n, 0.3, int(rng.integers(10**6))))
        a = pseudoinverse(L, "projection")
        b = pseudoinverse(L, "eigh")
        assert np.linalg.norm(a - b) <= 1e-8
        assert np.linalg.norm(a @ np.ones(n)) <= 1e-8
        assert np.linalg.norm(L @ a @ L - L) <= 1e-6 * np.linalg.norm(L)
        evals = np.linalg.eigvalsh(L)[1:]
        assert abs(np.trace(a) - np.sum(1 / evals)) <= 1e-8


def test_pseudoinverse_is_symmetric_psd():
    K = pseudoinverse(laplacian(random_connected(15, 0.3, 1)))
    assert np.array_equal(K, K.T)
    assert np.linalg.eigvalsh(K)[0] >= -1e-10


@pytest.mark.parametrize("method", ["projection", "eigh"])
def test_pseudoinverse_rejects_disconnected(method):
    L = laplacian(Graph.from_edges(4, [(0, 1), (2, 3)]), check=False)
    with pytest.raises(SingularBeyondOnes):
        pseudoinverse(L, method)


def test_spectral_projection_path3():
    vec = spectral_projection(laplacian(path(3)), 1)[:, 0]
    np.testing.assert_allclose(vec, np.array([1, 0, -1]) / np.sqrt(2), atol=1e-12)


def test_spectral_projection_orthogonal_to_ones():
    V = spectral_projection(laplacian(random_connected(20, 0.3, 5)), 4)
    assert V.shape == (20, 4)
    np.testing.assert_allclose(V.T @ np.ones(20), 0, atol=1e-8)
    np.testing.assert_allclose(V.T @ V, np.eye(4), atol=1e-10)
    for j in range(4):
        lead = np.flatnonzero(np.abs(V[:, j]) > 1e-10)[0]
        assert V[lead, j] > 0


def test_spectral_values_k3():
    np.testing.assert_allclose(spectral_values(laplacian(complete(3)), 2), [3, 3])


def test_spectral_projection_k_too_large():
    with pytest.raises(KTooLarge):
        spectral_projection(laplacian(path(3)), 3)


def test_fiedler_partition_splits_barbell():
    import networkx as nx

    g = Graph.from_networkx(nx.barbell_graph(5, 0))
    parts = fiedler_partition(laplacian(g))
    assert len(set(parts[:5])) == 1 and len(set(parts[5:])) == 1
    assert parts[0] != parts[9]


def test_relabel_carries_labels_and_edges():
    g = Graph.from_edges(3, [(0, 1), (1, 2, 2.0)], labels=[7, 8, 9])
    h = g.relabel([2, 0, 1])
    assert h.canonical_edges() == [(0, 1, 2.0), (0, 2, 1.0)]
    assert h.labels == (8, 9, 7)


def test_digest_ignores_edge_order():
    a = Graph.from_edges(3, [(0, 1), (1, 2)])
    b = Graph.from_edges(3, [(2, 1), (1, 0)])
    assert a.digest() == b.digest()
    assert a.digest() != path(4).digest()
