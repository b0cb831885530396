"""The closed-form COPT objective, its gradients, and plan normalization.

For Laplacian pseudoinverses ``K`` (``N x N``) and ``B`` (``M x M``) and a
transport plan ``P`` (``N x M``, row sums ``M``, column sums ``N``)::

    f(P, B) = M tr(K) + N tr(B) - 2 tr sqrt(B^1/2 P^T K P B^1/2)

The optimal linear map between the two Gaussian graph signals has already
been eliminated, so only ``P`` (and, when sketching, ``B``) remain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPSD, ZeroLine

# eigenvalues of the inner matrix below this fraction of the largest one are
# left out of its inverse square root
INNER_RTOL = 1e-8
# consecutive retained eigenvalues closer than this flag a degenerate spectrum
DEGENERATE_GAP = 1e-10


def num_params(m: int) -> int:
    return m * (m - 1) // 2


@dataclass
class SketchParams:
    """Free parameters of an ``m``-vertex weighted Laplacian.

    ``values[k]`` parametrizes the pair ``np.triu_indices(m, 1)[k]``; the
    off-diagonal entry is ``-values[k]**2``.
    """

    m: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (num_params(self.m),):
            raise DimensionMismatch(
                f"sketch of size {self.m} needs {num_params(self.m)} values, got shape {self.values.shape}"
            )

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "SketchParams":
        return cls(m, rng.standard_normal(num_params(m)))

    @classmethod
    def from_laplacian(cls, L: np.ndarray) -> "SketchParams":
        L = np.asarray(L, dtype=float)
        iu = np.triu_indices(L.shape[0], 1)
        return cls(L.shape[0], np.sqrt(np.maximum(-L[iu], 0.0)))


def laplacian_from_params(params: SketchParams) -> np.ndarray:
    """Weighted Laplacian with off-diagonals ``-values**2`` and zero row sums."""
    m = params.m
    L = np.zeros((m, m))
    iu = np.triu_indices(m, 1)
    L[iu] = -params.values**2
    L = L + L.T
    L[np.diag_indices(m)] = -L.sum(axis=1)
    return L


def sinkhorn_normalize(raw: np.ndarray, iters: int) -> np.ndarray:
    """Scale rows to sum ``M`` and columns to sum ``N``, ``iters`` sweeps.

    One sweep rescales every row and then every column, so after any
    positive number of sweeps the column sums are exact.
    """
    P = np.array(raw, dtype=float)
    if P.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {P.shape}")
    if np.any(P < 0):
        raise ValueError("Sinkhorn input must be nonnegative")
    N, M = P.shape
    if np.any(P.sum(axis=1) <= 0) or np.any(P.sum(axis=0) <= 0):
        raise ZeroLine("a row or column of the plan is entirely zero")
    for _ in range(iters):
        P *= (M / P.sum(axis=1))[:, None]
        P *= (N / P.sum(axis=0))[None, :]
    return P


def sinkhorn_forward(raw: np.ndarray, iters: int):
    """:func:`sinkhorn_normalize` that also records what the backward pass needs.

    Returns ``(P, tape)``; pass ``tape`` to :func:`sinkhorn_backward`.
    """
    X = np.asarray(raw, dtype=float)
    N, M = X.shape
    tape = []
    for _ in range(iters):
        r = X.sum(axis=1)
        X1 = X * (M / r)[:, None]
        c = X1.sum(axis=0)
        X2 = X1 * (N / c)[None, :]
        tape.append((X, r, X1, c))
        X = X2
    return X, tape


def sinkhorn_backward(grad: np.ndarray, tape) -> np.ndarray:
    """Pull a gradient on the normalized plan back to the raw input."""
    G = np.asarray(grad, dtype=float)
    for X, r, X1, c in reversed(tape):
        N, M = X.shape
        G1 = G * (N / c)[None, :] - (N / c**2)[None, :] * (G * X1).sum(axis=0)[None, :]
        G = G1 * (M / r)[:, None] - (M / r**2)[:, None] * (G1 * X).sum(axis=1)[:, None]
    return G


def marginal_residual(P: np.ndarray) -> float:
    """Largest absolute deviation of a row sum from ``M`` or column sum from ``N``."""
    N, M = P.shape
    return float(max(np.max(np.abs(P.sum(axis=1) - M)), np.max(np.abs(P.sum(axis=0) - N))))


def sinkhorn_until(raw: np.ndarray, tol: float = 1e-9, max_iters: int = 10000) -> np.ndarray:
    """Sinkhorn sweeps until :func:`marginal_residual` drops to ``tol``."""
    P = sinkhorn_normalize(raw, 1)
    done = 1
    while marginal_residual(P) > tol and done < max_iters:
        P = sinkhorn_normalize(P, 10)
        done += 10
    return P


def trace_sqrt(S: np.ndarray) -> float:
    """Sum of the square roots of the (clamped) eigenvalues of symmetric ``S``."""
    evals = np.linalg.eigvalsh(np.asarray(S, dtype=float))
    scale = float(np.max(np.abs(evals))) if evals.size else 0.0
    if evals.size and evals[0] < -1e-6 * scale:
        raise NotPSD(f"smallest eigenvalue {evals[0]:.3e} is below -1e-6 * {scale:.3e}")
    return float(np.sum(np.sqrt(np.maximum(evals, 0.0))))


@dataclass
class _Factors:
    """A pseudoinverse restricted to its nonzero eigenspace.

    ``basis`` (``n x r``) spans the range and ``root`` holds the square
    roots of the nonzero eigenvalues of ``pinv``.
    """

    pinv: np.ndarray
    basis: np.ndarray
    root: np.ndarray
    trace: float

    @property
    def half(self) -> np.ndarray:
        # sqrt(pinv) == half @ basis.T
        return self.basis * self.root

    @property
    def half_inv(self) -> np.ndarray:
        # pinv(sqrt(pinv)) == half_inv @ basis.T
        return self.basis / self.root


def factors_from_pinv(B: np.ndarray) -> _Factors:
    B = 0.5 * (B + B.T)
    mu, V = np.linalg.eigh(B)
    keep = mu > INNER_RTOL * max(float(mu[-1]), np.finfo(float).tiny)
    return _Factors(B, V[:, keep], np.sqrt(mu[keep]), float(np.trace(B)))


def factors_from_laplacian(L: np.ndarray) -> _Factors:
    lam, V = np.linalg.eigh(0.5 * (L + L.T))
    keep = lam > INNER_RTOL * max(float(lam[-1]), np.finfo(float).tiny)
    Vk, lk = V[:, keep], lam[keep]
    B = (Vk / lk) @ Vk.T
    return _Factors(B, Vk, 1.0 / np.sqrt(lk), float(np.sum(1.0 / lk)))


def _sqrt_parts(S: np.ndarray):
    """Eigen-split of a PSD matrix: trace of its root, kept eigenpairs, degeneracy."""
    S = 0.5 * (S + S.T)
    mu, U = np.linalg.eigh(S)
    value = float(np.sum(np.sqrt(np.maximum(mu, 0.0))))
    keep = mu > INNER_RTOL * max(float(mu[-1]), np.finfo(float).tiny)
    Uk, mk = U[:, keep], mu[keep]
    root = np.sqrt(mk)
    degenerate = bool(mk.size > 1 and np.min(np.diff(mk)) < DEGENERATE_GAP)
    return value, Uk, root, degenerate


def _cross_term(K: _Factors, B: _Factors, P: np.ndarray, want_b: bool):
    """``h = tr sqrt(B^1/2 P^T K P B^1/2)`` and its gradients in ``P`` and ``B``.

    The trace is taken on the smaller of the two equivalent inner matrices,
    written in the range basis of the pseudoinverse so the all-ones kernel
    does not contribute roundoff under the square root.
    """
    N, M = P.shape
    if M <= N:
        Rh = B.half
        KP = K.pinv @ P
        C = Rh.T @ (P.T @ KP) @ Rh
        h, U, root, degen = _sqrt_parts(C)
        grad_p = KP @ (Rh @ ((U / root) @ U.T) @ Rh.T)
        grad_b = None
        if want_b:
            Ri = B.half_inv
            grad_b = 0.5 * Ri @ ((U * root) @ U.T) @ Ri.T
    else:
        SP = K.half.T @ P
        D = SP @ B.pinv @ SP.T
        h, U, root, degen = _sqrt_parts(D)
        inner = K.half @ ((U / root) @ U.T) @ K.half.T
        grad_p = inner @ P @ B.pinv
        grad_b = 0.5 * P.T @ inner @ P if want_b else None
    return h, grad_p, grad_b, degen


def _check_dims(K: np.ndarray, B: np.ndarray, P: np.ndarray) -> None:
    if K.ndim != 2 or K.shape[0] != K.shape[1] or B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DimensionMismatch("pseudoinverses must be square")
    if P.shape != (K.shape[0], B.shape[0]):
        raise DimensionMismatch(f"plan shape {P.shape} does not match ({K.shape[0]}, {B.shape[0]})")


def copt_objective(lx_pinv: np.ndarray, ly_pinv: np.ndarray, plan: np.ndarray) -> float:
    """Closed-form transport cost for a fixed plan (``N M Delta^2`` at the optimum)."""
    K = np.asarray(lx_pinv, dtype=float)
    B = np.asarray(ly_pinv, dtype=float)
    P = np.asarray(plan, dtype=float)
    _check_dims(K, B, P)
    N, M = P.shape
    Kf, Bf = factors_from_pinv(K), factors_from_pinv(B)
    h, _, _, _ = _cross_term(Kf, Bf, P, want_b=False)
    return M * Kf.trace + N * Bf.trace - 2.0 * h


def copt_distance_value(objective: float, n: int, m: int) -> float:
    """``sqrt(objective / (n m))`` with small negative roundoff clamped to zero."""
    return float(np.sqrt(max(objective, 0.0) / (n * m)))


@dataclass
class CoptGradient:
    """Objective value with its gradients.

    ``plan`` is the gradient in ``P``; ``params`` the gradient in the sketch
    parameters (sketch mode only). ``degenerate`` flags nearly repeated
    eigenvalues of the inner matrix, where the gradient is only a
    subgradient.
    """

    value: float
    plan: np.ndarray
    params: np.ndarray | None = None
    degenerate: bool = False


def _objective_and_grads(K: _Factors, B: _Factors, P: np.ndarray, want_b: bool):
    N, M = P.shape
    h, gp, gb, degen = _cross_term(K, B, P, want_b)
    value = M * K.trace + N * B.trace - 2.0 * h
    grad_b = None
    if want_b:
        grad_b = N * np.eye(M) - 2.0 * gb
    return value, -2.0 * gp, grad_b, degen


def params_gradient(params: SketchParams, B: _Factors, grad_b: np.ndarray) -> np.ndarray:
    """Chain a gradient in ``B = pinv(L(values))`` back to ``values``."""
    g = -B.pinv @ grad_b @ B.pinv
    g = 0.5 * (g + g.T)
    i, j = np.triu_indices(params.m, 1)
    return 2.0 * params.values * (g[i, i] + g[j, j] - 2.0 * g[i, j])


def sketch_value_and_grad(K: _Factors, params: SketchParams, P: np.ndarray) -> CoptGradient:
    B = factors_from_laplacian(laplacian_from_params(params))
    value, gp, gb, degen = _objective_and_grads(K, B, P, want_b=True)
    return CoptGradient(value, gp, params_gradient(params, B, gb), degen)


def copt_gradient(lx_pinv: np.ndarray, target, plan: np.ndarray) -> CoptGradient:
    """Objective and analytic gradients.

    ``target`` is either the pseudoinverse of the second Laplacian (distance
    mode, gradient in ``P`` only) or a :class:`SketchParams` (sketch mode,
    gradients in ``P`` and in the parameters).
    """
    K = np.asarray(lx_pinv, dtype=float)
    P = np.asarray(plan, dtype=float)
    Kf = factors_from_pinv(K)
    if isinstance(target, SketchParams):
        _check_dims(K, np.zeros((target.m, target.m)), P)
        return sketch_value_and_grad(Kf, target, P)
    B = np.asarray(target, dtype=float)
    _check_dims(K, B, P)
    value, gp, _, degen = _objective_and_grads(Kf, factors_from_pinv(B), P, want_b=False)
    return CoptGradient(value, gp, None, degen)


def tangent_projection(G: np.ndarray) -> np.ndarray:
    """Project onto matrices with zero row and column sums."""
    return G - G.mean(axis=1, keepdims=True) - G.mean(axis=0, keepdims=True) + G.mean()
