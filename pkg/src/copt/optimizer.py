"""Adam loops for the COPT distance and for COPT sketching.

Both loops follow the same per-iteration recipe: take ``abs`` of the raw
plan, run a few Sinkhorn sweeps, evaluate the closed-form objective, carry
its gradient back through Sinkhorn and ``abs``, and take an Adam step on
the raw plan (and on the sketch parameters). The learning rate decays geometrically and
is "hiked" when the loss plateaus, which lets the iterate escape poor local
minima early in the run.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CoptError, DegenerateSketchSize, NotSquare, SingularSketch
from .graph import Graph, laplacian, pseudoinverse, validate
from .objective import (
    SketchParams,
    _objective_and_grads,
    copt_distance_value,
    factors_from_pinv,
    laplacian_from_params,
    sinkhorn_backward,
    sinkhorn_forward,
    sinkhorn_until,
    sketch_value_and_grad,
    tangent_projection,
)


@dataclass
class OptimConfig:
    n_iter: int | None = None  # None: 300 for distances, 1000 for sketches
    lr0: float = 0.4
    decay_factor: float = 0.7
    decay_every: int = 100
    hike_factor: float = 5.0
    lr_cap: float = 4.0
    plateau_delta: float = 0.002
    plateau_count: int = 10
    hike_cutoff: int = 200
    sinkhorn_iters: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    restarts: int = 1
    hikes: bool = True
    tangent_grad: bool = False

    def __post_init__(self):
        for name in ("lr0", "decay_factor", "hike_factor", "lr_cap", "plateau_delta", "adam_eps"):
            if not getattr(self, name) > 0:
                raise CoptError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("decay_every", "plateau_count", "sinkhorn_iters", "restarts"):
            if getattr(self, name) < 1:
                raise CoptError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.n_iter is not None and self.n_iter < 1:
            raise CoptError(f"n_iter must be at least 1, got {self.n_iter}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise CoptError("Adam betas must lie in [0, 1)")
        if self.hike_cutoff < 0:
            raise CoptError("hike_cutoff must be nonnegative")

    def iterations(self, default: int) -> int:
        return default if self.n_iter is None else self.n_iter

    def replace(self, **changes) -> "OptimConfig":
        return dataclasses.replace(self, **changes)


# ----------------------------------------------------------------------------
# Adam and the learning-rate schedule


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, x: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(x, dtype=float), np.zeros_like(x, dtype=float), 0)


def adam_step(params, grads, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    g = np.asarray(grads, dtype=float)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new = np.asarray(params, dtype=float) - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


@dataclass
class ScheduleState:
    lr: float
    decays: int = 0
    plateaus: int = 0
    seen: int = 0
    hikes: list = field(default_factory=list)

    @classmethod
    def fresh(cls, cfg: OptimConfig) -> "ScheduleState":
        return cls(cfg.lr0)


def lr_at(iteration: int, loss_history, state: ScheduleState, cfg: OptimConfig, n_iter: int):
    """Learning rate for ``iteration``; updates ``state`` in place.

    The rate is multiplied by ``decay_factor`` once per ``decay_every``
    iterations. Every new loss whose change from the previous one is below
    ``plateau_delta`` counts as a plateau; after ``plateau_count`` of them
    (counted since the last hike) the rate is multiplied by ``hike_factor``
    and capped at ``lr_cap``, unless fewer than ``hike_cutoff`` iterations
    remain. Returns ``(lr, hiked)``.
    """
    owed = iteration // cfg.decay_every - state.decays
    if owed > 0:
        state.lr *= cfg.decay_factor**owed
        state.decays += owed
    n_seen = len(loss_history)
    if n_seen > state.seen:
        if n_seen >= 2 and abs(loss_history[-1] - loss_history[-2]) < cfg.plateau_delta:
            state.plateaus += 1
        state.seen = n_seen
    hiked = False
    if cfg.hikes and state.plateaus >= cfg.plateau_count and iteration < n_iter - cfg.hike_cutoff:
        state.lr = min(state.lr * cfg.hike_factor, cfg.lr_cap)
        state.plateaus = 0
        state.hikes.append(iteration)
        hiked = True
    return state.lr, hiked


# ----------------------------------------------------------------------------
# optimization loops


@dataclass
class _Run:
    loss: float
    plan: np.ndarray
    values: np.ndarray | None
    loss_history: list
    lr_history: list
    hike_iterations: list
    last_plan: np.ndarray
    last_values: np.ndarray | None


def _optimize(value_and_grad, raw0: np.ndarray, values0, cfg: OptimConfig, n_iter: int) -> _Run:
    # The free variable is the raw matrix; the live plan is Sinkhorn(|raw|)
    # and the gradient is carried back through both maps.
    raw = raw0
    values = values0
    p_state = AdamState.zeros_like(raw)
    v_state = AdamState.zeros_like(values) if values is not None else None
    sched = ScheduleState.fresh(cfg)
    betas = dict(beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    losses, rates = [], []
    best = (np.inf, None, None)
    for it in range(n_iter):
        P, tape = sinkhorn_forward(np.abs(raw), cfg.sinkhorn_iters)
        loss, g_plan, g_values = value_and_grad(P, values)
        losses.append(loss)
        if loss < best[0]:
            best = (loss, P, None if values is None else values.copy())
        lr, _ = lr_at(it, losses, sched, cfg, n_iter)
        rates.append(lr)
        if cfg.tangent_grad:
            g_plan = tangent_projection(g_plan)
        g_raw = sinkhorn_backward(g_plan, tape) * np.sign(raw)
        raw, p_state = adam_step(raw, g_raw, p_state, lr, **betas)
        if values is not None:
            values, v_state = adam_step(values, g_values, v_state, lr, **betas)
    return _Run(best[0], best[1], best[2], losses, rates, list(sched.hikes), P, values)


def _finish(run: _Run, evaluate):
    """Fully normalize the best and the last iterate; keep the lower objective.

    The live loss is measured after only a few Sinkhorn sweeps, where the row
    sums are still off, so it can sit below anything a feasible plan attains.
    Candidates are therefore compared after exact normalization.
    """
    out = None
    for plan, values in ((run.plan, run.values), (run.last_plan, run.last_values)):
        plan = sinkhorn_until(plan)
        objective = float(evaluate(plan, values))
        if out is None or objective < out[0]:
            out = (objective, plan, values)
    return out


def _restart_rngs(cfg: OptimConfig):
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts):
        yield np.random.default_rng(child)


@dataclass
class DistanceResult:
    """Outcome of :func:`optimize_distance`.

    ``objective`` is the closed-form cost at the returned (fully normalized)
    plan and ``distance == copt_distance_value(objective, N, M)``.
    ``loss_history`` belongs to the restart that produced the plan.
    """

    distance: float
    plan: np.ndarray
    loss_history: list
    objective: float
    lr_history: list = field(default_factory=list)
    hike_iterations: list = field(default_factory=list)
    restart_losses: list = field(default_factory=list)

    def __iter__(self):
        # allows ``distance, plan, history = optimize_distance(...)``
        return iter((self.distance, self.plan, self.loss_history))


def distance_from_laplacians(Lx: np.ndarray, Ly: np.ndarray, cfg: OptimConfig | None = None) -> DistanceResult:
    cfg = cfg or OptimConfig()
    n_iter = cfg.iterations(300)
    K = factors_from_pinv(pseudoinverse(Lx))
    B = factors_from_pinv(pseudoinverse(Ly))
    N, M = Lx.shape[0], Ly.shape[0]

    def value_and_grad(P, _values):
        value, g_plan, _, _ = _objective_and_grads(K, B, P, want_b=False)
        return value, g_plan, None

    best, restart_losses = None, []
    for rng in _restart_rngs(cfg):
        run = _optimize(value_and_grad, rng.uniform(1.0, 2.0, (N, M)), None, cfg, n_iter)
        objective, plan, _ = _finish(run, lambda P, _v: value_and_grad(P, None)[0])
        restart_losses.append(objective)
        if best is None or objective < best[0]:
            best = (objective, plan, run)
    objective, plan, best_run = best
    return DistanceResult(
        copt_distance_value(objective, N, M),
        plan,
        best_run.loss_history,
        float(objective),
        best_run.lr_history,
        best_run.hike_iterations,
        restart_losses,
    )


def optimize_distance(x: Graph, y: Graph, cfg: OptimConfig | None = None) -> DistanceResult:
    """Approximate COPT distance between two graphs by optimizing the plan."""
    validate(x)
    validate(y)
    return distance_from_laplacians(laplacian(x), laplacian(y), cfg)


@dataclass
class SketchResult:
    """Outcome of :func:`optimize_sketch`."""

    laplacian: np.ndarray
    plan: np.ndarray
    loss_history: list
    distance: float
    hike_iterations: list
    objective: float
    params: SketchParams | None = None
    lr_history: list = field(default_factory=list)
    connected: bool = True

    @property
    def n(self) -> int:
        return self.plan.shape[0]

    @property
    def m(self) -> int:
        return self.plan.shape[1]


def sketch_from_laplacian(Lx: np.ndarray, m: int, cfg: OptimConfig | None = None) -> SketchResult:
    cfg = cfg or OptimConfig()
    if m < 2:
        raise DegenerateSketchSize(f"sketch size must be at least 2, got {m}")
    n_iter = cfg.iterations(1000)
    K = factors_from_pinv(pseudoinverse(Lx))
    N = Lx.shape[0]

    def value_and_grad(P, values):
        g = sketch_value_and_grad(K, SketchParams(m, values), P)
        return g.value, g.plan, g.params

    best = None
    for rng in _restart_rngs(cfg):
        values0 = SketchParams.random(m, rng).values
        plan0 = rng.uniform(1.0, 2.0, (N, m))
        run = _optimize(value_and_grad, plan0, values0, cfg, n_iter)
        finished = _finish(run, lambda P, v: value_and_grad(P, v)[0])
        if best is None or finished[0] < best[0]:
            best = (*finished, run)
    objective, plan, values, best_run = best
    params = SketchParams(m, values)
    Ly = laplacian_from_params(params)
    evals = np.linalg.eigvalsh(Ly)
    connected = bool(evals[1] >= 1e-8 * max(1.0, evals[-1]))
    if not connected:
        warnings.warn(f"sketch Laplacian is disconnected (second eigenvalue {evals[1]:.2e})", SingularSketch)
    return SketchResult(
        Ly,
        plan,
        best_run.loss_history,
        copt_distance_value(objective, N, m),
        best_run.hike_iterations,
        float(objective),
        params,
        best_run.lr_history,
        connected,
    )


def optimize_sketch(x: Graph, m: int, cfg: OptimConfig | None = None) -> SketchResult:
    """Weighted ``m``-vertex Laplacian minimizing the COPT distance to ``x``."""
    validate(x)
    return sketch_from_laplacian(laplacian(x), m, cfg)


def round_to_permutation(plan: np.ndarray):
    """Nearest permutation to a square plan by maximum-weight assignment.

    Returns ``(perm, residual)`` with ``perm[x]`` the vertex matched to ``x``
    and ``residual = ||P - N * Pi||_1 / (N M)``.
    """
    P = np.asarray(plan, dtype=float)
    N, M = P.shape
    if N != M:
        raise NotSquare(f"plan is {N} x {M}; rounding to a permutation needs a square plan")
    rows, cols = linear_sum_assignment(P, maximize=True)
    perm = np.empty(N, dtype=int)
    perm[rows] = cols
    Pi = np.zeros_like(P)
    Pi[rows, cols] = N
    return perm, float(np.abs(P - Pi).sum() / (N * M))
