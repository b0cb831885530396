"""Graphs, Laplacians, pseudoinverses and spectral projections.

Everything here works on dense ``numpy`` arrays; the graphs this package deals
with have at most a few hundred vertices.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DuplicateEdge,
    KTooLarge,
    NonPositiveWeight,
    NotConnected,
    SelfLoop,
    SingularBeyondOnes,
    VertexOutOfRange,
)

# eigenvalues below ZERO_RTOL * largest eigenvalue count as zero
ZERO_RTOL = 1e-8


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on vertices ``0 .. n-1``.

    ``edges`` holds ``(u, v, w)`` triples. Construction does not validate;
    call :func:`validate` (or any operation that needs a valid graph).
    ``labels`` optionally carries one community id per vertex.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    labels: tuple[int, ...] | None = field(default=None, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence], labels=None) -> "Graph":
        triples = []
        for e in edges:
            if len(e) == 2:
                u, v = e
                w = 1.0
            else:
                u, v, w = e
            triples.append((int(u), int(v), float(w)))
        if labels is not None:
            labels = tuple(int(c) for c in labels)
        return cls(int(n), tuple(triples), labels)

    @classmethod
    def from_networkx(cls, G, labels=None) -> "Graph":
        nodes = list(G.nodes())
        index = {v: i for i, v in enumerate(nodes)}
        edges = [(index[u], index[v], float(d.get("weight", 1.0))) for u, v, d in G.edges(data=True)]
        return cls.from_edges(len(nodes), edges, labels)

    def to_networkx(self):
        import networkx as nx

        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        G.add_weighted_edges_from(self.edges)
        return G

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for u, v, w in self.edges:
            A[u, v] += w
            A[v, u] += w
        return A

    def canonical_edges(self) -> list[tuple[int, int, float]]:
        return sorted((min(u, v), max(u, v), w) for u, v, w in self.edges)

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with vertex ``v`` renamed to ``perm[v]``."""
        perm = [int(p) for p in perm]
        edges = [(perm[u], perm[v], w) for u, v, w in self.edges]
        labels = None
        if self.labels is not None:
            new = [0] * self.n
            for v, c in enumerate(self.labels):
                new[perm[v]] = c
            labels = new
        return Graph.from_edges(self.n, sorted((min(u, v), max(u, v), w) for u, v, w in edges), labels)

    def digest(self) -> str:
        """Stable content hash of the vertex count and edge set."""
        h = hashlib.sha256(f"n {self.n}\n".encode())
        for u, v, w in self.canonical_edges():
            h.update(f"{u} {v} {w!r}\n".encode())
        return h.hexdigest()


def count_components(n: int, edges) -> int:
    if n == 0:
        return 0
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return int(ncomp)


def validate(g: Graph) -> None:
    """Raise on the first violated graph invariant; return ``None`` if valid.

    Checks run in the order vertex range, self-loops, duplicate edges,
    weights, connectivity.
    """
    if g.n < 1:
        raise VertexOutOfRange(f"graph must have at least one vertex, got n={g.n}")
    seen = set()
    for u, v, w in g.edges:
        if not (0 <= u < g.n and 0 <= v < g.n):
            raise VertexOutOfRange(f"edge ({u}, {v}) references a vertex outside 0..{g.n - 1}")
        if u == v:
            raise SelfLoop(f"self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"edge {key} appears more than once")
        seen.add(key)
        if not w > 0:
            raise NonPositiveWeight(f"edge {key} has weight {w}")
    ncomp = count_components(g.n, g.edges)
    if ncomp != 1:
        raise NotConnected(f"graph has {ncomp} connected components")


def is_valid(g: Graph) -> bool:
    try:
        validate(g)
    except (NotConnected, SelfLoop, DuplicateEdge, NonPositiveWeight, VertexOutOfRange):
        return False
    return True


def laplacian(g: Graph, check: bool = True) -> np.ndarray:
    """Combinatorial Laplacian ``D - A`` with weighted degrees."""
    if check:
        validate(g)
    A = g.adjacency()
    return np.diag(A.sum(axis=1)) - A


def _zero_mask(evals: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(evals))), np.finfo(float).tiny)
    return evals < ZERO_RTOL * scale


def pseudoinverse(L: np.ndarray, method: str = "projection", check: bool = True) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a connected-graph Laplacian.

    Parameters
    ----------
    L : ndarray, shape (n, n)
        Laplacian with the all-ones vector as its only kernel direction.
    method : {"projection", "eigh"}
        ``"projection"`` inverts ``L + J/n`` and subtracts ``J/n`` again
        (``J`` the all-ones matrix). ``"eigh"`` inverts the nonzero part of
        the spectrum.
    check : bool
        Verify that ``L`` has a single zero eigenvalue.

    Raises
    ------
    SingularBeyondOnes
        If more than one eigenvalue is numerically zero.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if method == "eigh":
        evals, evecs = np.linalg.eigh(L)
        zero = _zero_mask(evals)
        if check and zero.sum() > 1:
            raise SingularBeyondOnes(f"{int(zero.sum())} zero eigenvalues; graph is disconnected")
        inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, evals))
        out = (evecs * inv) @ evecs.T
    elif method == "projection":
        if check:
            evals = np.linalg.eigvalsh(L)
            zero = _zero_mask(evals)
            if zero.sum() > 1:
                raise SingularBeyondOnes(f"{int(zero.sum())} zero eigenvalues; graph is disconnected")
        J = np.full((n, n), 1.0 / n)
        out = np.linalg.inv(L + J) - J
    else:
        raise ValueError(f"unknown pseudoinverse method {method!r}")
    return 0.5 * (out + out.T)


def spectral_projection(L: np.ndarray, k: int) -> np.ndarray:
    """Eigenvectors of the ``k`` smallest nonzero eigenvalues, as columns.

    Columns are ordered by ascending eigenvalue and each is flipped so its
    first nonzero entry is positive.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if k >= n:
        raise KTooLarge(f"k={k} must be smaller than the dimension {n}")
    evals, evecs = np.linalg.eigh(L)
    zero = _zero_mask(evals)
    nonzero = np.flatnonzero(~zero)
    if len(nonzero) < k:
        raise KTooLarge(f"only {len(nonzero)} nonzero eigenvalues available, asked for {k}")
    vecs = evecs[:, nonzero[:k]].copy()
    for j in range(k):
        col = vecs[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-10)
        if len(lead) and col[lead[0]] < 0:
            vecs[:, j] = -col
    return vecs


def spectral_values(L: np.ndarray, k: int) -> np.ndarray:
    """The ``k`` smallest nonzero eigenvalues of ``L``, ascending."""
    evals = np.linalg.eigvalsh(np.asarray(L, dtype=float))
    return evals[~_zero_mask(evals)][:k]


def fiedler_partition(L: np.ndarray) -> np.ndarray:
    """Two-way spectral bisection by the sign of the Fiedler vector."""
    vec = spectral_projection(L, 1)[:, 0]
    return (vec >= 0).astype(int)
