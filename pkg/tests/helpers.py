"""Independent oracles and small graph builders shared by the tests."""
import itertools

import networkx as nx
import numpy as np
from scipy.optimize import minimize

from copt.graph import Graph


def random_connected(n, p=0.4, seed=0):
    rng = np.random.default_rng(seed)
    while True:
        G = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
        if nx.is_connected(G):
            return Graph.from_networkx(G)


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete(n):
    return Graph.from_edges(n, list(itertools.combinations(range(n), 2)))


def star(n):
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def cycle(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def finite_difference(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _sqrt_psd(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    w = np.where(w > 1e-12 * w.max(), w, 0.0)
    return (V * np.sqrt(w)) @ V.T


def gaussian_wasserstein_cost(K, B, P):
    """Squared 2-Wasserstein distance between the lifted Gaussians on X x Y.

    Signals on X and on Y are pulled back to functions on X x Y weighted by
    sqrt(P); the cost is then the usual Gaussian formula
    tr V1 + tr V2 - 2 tr (V2^1/2 V1 V2^1/2)^1/2.
    """
    N, M = P.shape
    A = np.zeros((N * M, N))
    C = np.zeros((N * M, M))
    for x in range(N):
        for y in range(M):
            A[x * M + y, x] = np.sqrt(P[x, y])
            C[x * M + y, y] = np.sqrt(P[x, y])
    V1 = A @ K @ A.T
    V2 = C @ B @ C.T
    cross = np.linalg.svd(_sqrt_psd(V2) @ _sqrt_psd(V1), compute_uv=False).sum()
    return np.trace(V1) + np.trace(V2) - 2 * cross


def nuclear_objective(K, B):
    """``M tr K + N tr B - 2 ||K^1/2 P B^1/2||_*`` built from symmetric square roots."""
    Kh, Bh = _sqrt_psd(K), _sqrt_psd(B)
    tk, tb = np.trace(K), np.trace(B)

    def f(P):
        N, M = P.shape
        return M * tk + N * tb - 2 * np.linalg.svd(Kh @ P @ Bh, compute_uv=False).sum()

    return f


def transport_vertices(N, M):
    """All vertices of {P >= 0, row sums M, column sums N} by basis enumeration."""
    cells = [(x, y) for x in range(N) for y in range(M)]
    A = np.zeros((N + M, N * M))
    for k, (x, y) in enumerate(cells):
        A[x, k] = 1.0
        A[N + y, k] = 1.0
    b = np.concatenate([np.full(N, float(M)), np.full(M, float(N))])
    found = {}
    for support in itertools.combinations(range(N * M), N + M - 1):
        sub = A[:, support]
        if np.linalg.matrix_rank(sub) < N + M - 1:
            continue
        sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.allclose(sub @ sol, b, atol=1e-9) and np.all(sol >= -1e-9):
            P = np.zeros(N * M)
            P[list(support)] = np.maximum(sol, 0.0)
            found[tuple(np.round(P, 9))] = P.reshape(N, M)
    return list(found.values())


def brute_force_objective(objective, N, M, starts=100):
    """Smallest objective over polytope vertices and multi-start SLSQP descents."""
    best = min(objective(P) for P in transport_vertices(N, M))
    cons = [
        {"type": "eq", "fun": lambda v: v.reshape(N, M).sum(axis=1) - M},
        {"type": "eq", "fun": lambda v: v.reshape(N, M).sum(axis=0) - N},
    ]
    for seed in range(starts):
        x0 = np.random.default_rng(seed).uniform(0.1, 2.0, N * M)
        res = minimize(lambda v: objective(v.reshape(N, M)), x0, method="SLSQP", bounds=[(0, None)] * (N * M),
                       constraints=cons, options={"maxiter": 200, "ftol": 1e-12})
        P = res.x.reshape(N, M)
        if np.allclose(P.sum(axis=1), M, atol=1e-6) and np.allclose(P.sum(axis=0), N, atol=1e-6) and P.min() > -1e-8:
            best = min(best, objective(np.maximum(P, 0.0)))
    return best
