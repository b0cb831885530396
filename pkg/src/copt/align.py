"""Summaries of sketches and the graph-alignment experiment.

A summary thresholds the sketched Laplacian into a small graph and names each
sketch vertex after the original vertices that sent it the most mass. The
alignment experiment corrupts and permutes a community graph, aligns it back
with the optimizer and scores the recovered communities by NMI.
"""
from __future__ import annotations

import csv
import dataclasses
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CannotStayConnected, CoptError, EmptySummary, LabelSetMismatch
from .graph import Graph, count_components
from .optimizer import OptimConfig, optimize_distance

MAX_CORRUPTION_ATTEMPTS = 1000
ZERO_RTOL = 1e-12


@dataclass
class SummaryGraph:
    """Thresholded sketch with transport-mass vertex labels.

    ``labels[y]`` lists original vertices by decreasing mass sent to ``y``.
    """

    graph: Graph
    labels: list
    threshold: float

    def to_dot(self, name: str = "summary") -> str:
        lines = [f"graph {name} {{"]
        for y, lab in enumerate(self.labels):
            text = ",".join(str(x) for x in lab)
            lines.append(f'  {y} [label="{y}: {text}"];')
        for u, v, w in self.graph.canonical_edges():
            lines.append(f'  {u} -- {v} [weight={w!r}, label="{w:.3g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def default_threshold(L: np.ndarray) -> float:
    """Half the median magnitude of the nonzero off-diagonal entries.

    Entries below ``ZERO_RTOL`` times the largest magnitude count as zero;
    sketch parameters driven to zero by the optimizer stop at roundoff
    rather than exactly at zero.
    """
    L = np.asarray(L, dtype=float)
    off = np.abs(L[np.triu_indices(L.shape[0], 1)])
    off = off[off > ZERO_RTOL * off.max(initial=0.0)]
    return 0.5 * float(np.median(off)) if off.size else 0.0


def top_sources(plan: np.ndarray, y: int, k: int) -> list[int]:
    """The ``k`` rows with the most mass in column ``y``, ties to lower index."""
    col = np.asarray(plan, dtype=float)[:, y]
    order = np.lexsort((np.arange(col.size), -col))
    return [int(x) for x in order[:k]]


def summarize_laplacian(L: np.ndarray, plan: np.ndarray, edge_threshold: float | None = None, labels_per_node: int = 2) -> SummaryGraph:
    L = np.asarray(L, dtype=float)
    if edge_threshold is None:
        edge_threshold = default_threshold(L)
    if edge_threshold < 0:
        raise CoptError(f"edge threshold must be nonnegative, got {edge_threshold}")
    m = L.shape[0]
    edges = [(i, j, float(abs(L[i, j]))) for i, j in zip(*np.triu_indices(m, 1)) if abs(L[i, j]) > edge_threshold]
    if not edges:
        warnings.warn(f"no sketch entry exceeds the threshold {edge_threshold:.3g}; the summary has no edges", EmptySummary)
    labels = [top_sources(plan, y, labels_per_node) for y in range(m)]
    return SummaryGraph(Graph.from_edges(m, edges), labels, float(edge_threshold))


def summarize(result, edge_threshold: float | None = None, labels_per_node: int = 2) -> SummaryGraph:
    """Summary graph of a :class:`~copt.optimizer.SketchResult`.

    Parameters
    ----------
    result : SketchResult
        Output of :func:`~copt.optimizer.optimize_sketch`.
    edge_threshold : float, optional
        Keep ``(i, j)`` when ``|L_Y[i, j]|`` exceeds this. Defaults to
        :func:`default_threshold`.
    labels_per_node : int
        How many source vertices to list per sketch vertex.
    """
    return summarize_laplacian(result.laplacian, result.plan, edge_threshold, labels_per_node)


# ----------------------------------------------------------------------------
# community scoring


def _contiguous(labels: Sequence) -> np.ndarray:
    _, inv = np.unique(np.asarray(labels), return_inverse=True)
    return inv.ravel()


def nmi(a: Sequence, b: Sequence) -> float:
    """Normalized mutual information ``I(a; b) / sqrt(H(a) H(b))``.

    When either labeling has zero entropy the score is 1 if both induce the
    same partition and 0 otherwise.
    """
    if len(a) != len(b):
        raise LabelSetMismatch(f"labelings cover {len(a)} and {len(b)} vertices")
    if len(a) == 0:
        raise LabelSetMismatch("labelings are empty")
    x, y = _contiguous(a), _contiguous(b)
    table = np.zeros((x.max() + 1, y.max() + 1))
    np.add.at(table, (x, y), 1.0)
    p = table / len(x)
    px, py = p.sum(axis=1), p.sum(axis=0)
    hx = -float(np.sum(px * np.log(px)))
    hy = -float(np.sum(py * np.log(py)))
    if hx <= 0 or hy <= 0:
        same = table.shape[0] == table.shape[1] and np.count_nonzero(table) == table.shape[0]
        return 1.0 if same else 0.0
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log(p[nz] / np.outer(px, py)[nz])))
    return float(min(max(mi / np.sqrt(hx * hy), 0.0), 1.0))


# ----------------------------------------------------------------------------
# corruption


@dataclass
class Corruption:
    """A corrupted and permuted copy of a graph.

    ``perm[v]`` is the new index of original vertex ``v``, or ``-1`` when the
    vertex was deleted.
    """

    graph: Graph
    perm: np.ndarray

    def __iter__(self):
        return iter((self.graph, self.perm))


def _remove_edges(g: Graph, count: int, rng: np.random.Generator) -> Graph:
    edges = g.canonical_edges()
    if count > len(edges) - (g.n - 1) or count < 0:
        raise CannotStayConnected(f"removing {count} of {len(edges)} edges cannot leave {g.n} vertices connected")
    for _ in range(MAX_CORRUPTION_ATTEMPTS):
        drop = set(rng.choice(len(edges), size=count, replace=False).tolist())
        kept = [e for i, e in enumerate(edges) if i not in drop]
        if count_components(g.n, kept) == 1:
            return Graph.from_edges(g.n, kept, g.labels)
    raise CannotStayConnected(f"no connected result after {MAX_CORRUPTION_ATTEMPTS} attempts removing {count} edges")


def _remove_nodes(g: Graph, count: int, rng: np.random.Generator):
    if not 0 <= count < g.n:
        raise CannotStayConnected(f"cannot delete {count} of {g.n} vertices")
    for _ in range(MAX_CORRUPTION_ATTEMPTS):
        drop = set(rng.choice(g.n, size=count, replace=False).tolist())
        keep = [v for v in range(g.n) if v not in drop]
        index = {v: i for i, v in enumerate(keep)}
        edges = [(index[u], index[v], w) for u, v, w in g.canonical_edges() if u in index and v in index]
        if count_components(len(keep), edges) == 1:
            labels = None if g.labels is None else [g.labels[v] for v in keep]
            shrink = np.array([index.get(v, -1) for v in range(g.n)])
            return Graph.from_edges(len(keep), edges, labels), shrink
    raise CannotStayConnected(f"no connected result after {MAX_CORRUPTION_ATTEMPTS} attempts deleting {count} vertices")


def corrupt(g: Graph, removed: int, seed: int = 0, mode: str = "edges") -> Corruption:
    """Remove ``removed`` edges (or vertices), then randomly permute.

    Removals are resampled until the result is connected. Planted labels
    travel with their vertices.
    """
    rng = np.random.default_rng(seed)
    if mode == "edges":
        reduced = _remove_edges(g, removed, rng)
        shrink = np.arange(g.n)
    elif mode == "nodes":
        reduced, shrink = _remove_nodes(g, removed, rng)
    else:
        raise CoptError(f"unknown corruption mode {mode!r}")
    order = rng.permutation(reduced.n)
    perm = np.where(shrink >= 0, order[np.maximum(shrink, 0)], -1)
    return Corruption(reduced.relabel(order), perm)


# ----------------------------------------------------------------------------
# alignment


def assignment_from_plan(plan: np.ndarray) -> np.ndarray:
    """Match rows to columns by maximum transported mass.

    Returns ``match`` with ``match[x]`` the column assigned to row ``x`` or
    ``-1`` for rows left over when there are more rows than columns.
    """
    P = np.asarray(plan, dtype=float)
    rows, cols = linear_sum_assignment(P, maximize=True)
    match = np.full(P.shape[0], -1, dtype=int)
    match[rows] = cols
    return match


def align_and_score(original: Graph, corrupted: Graph, cfg: OptimConfig | None = None) -> float:
    """Align ``corrupted`` to ``original`` and score the recovered communities.

    Both graphs must carry planted labels. Labels of ``corrupted`` are read
    back through the assignment and compared with the planted labels of
    ``original`` by :func:`nmi`; unmatched original vertices are left out.
    """
    if original.labels is None or corrupted.labels is None:
        raise LabelSetMismatch("both graphs need planted community labels")
    result = optimize_distance(original, corrupted, cfg)
    return transported_nmi(original, corrupted, result.plan)


def transported_nmi(original: Graph, corrupted: Graph, plan: np.ndarray) -> float:
    """NMI between planted labels and the labels read back through ``plan``."""
    match = assignment_from_plan(plan)
    rows = np.flatnonzero(match >= 0)
    return nmi([original.labels[x] for x in rows], [corrupted.labels[match[x]] for x in rows])


# ----------------------------------------------------------------------------
# experiment


@dataclass
class AlignmentRun:
    """Repeated corrupt-permute-align trials on one graph family.

    Trial ``t`` draws its graph, corruption and optimizer seed from
    ``seed`` and ``t``; ``family.seed`` is ignored.
    """

    family: object = None
    removed: int = 30
    trials: int = 10
    mode: str = "edges"
    optimizer: OptimConfig = field(default_factory=lambda: OptimConfig(n_iter=1000, restarts=3))
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.family is None:
            from .synthgen import FamilySpec

            self.family = FamilySpec("block_4", 40, dict(ALIGNMENT_BLOCK_PARAMS))
        if self.trials < 1:
            raise CoptError("trials must be positive")
        if self.mode not in ("edges", "nodes"):
            raise CoptError(f"unknown corruption mode {self.mode!r}")


# denser than the generator defaults so that 150 removals can stay connected
ALIGNMENT_BLOCK_PARAMS = {"p_in": 1.0, "p_out": 0.05}


@dataclass
class TrialResult:
    trial: int
    removed: int
    nmi: float
    distance: float


@dataclass
class AlignmentSummary:
    trials: list

    @property
    def scores(self) -> list:
        return [t.nmi for t in self.trials]

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        return float(np.std(self.scores))

    def line(self) -> str:
        return f"nmi: {self.mean:.4f} ± {self.std:.4f}"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "removed", "nmi", "distance"])
            for t in self.trials:
                w.writerow([t.trial, t.removed, repr(t.nmi), repr(t.distance)])


def _trial(args) -> TrialResult:
    run, t, seeds = args
    from .synthgen import generate

    g_seed, c_seed, o_seed = seeds
    g = generate(run.family.with_seed(g_seed))
    corrupted = corrupt(g, run.removed, c_seed, run.mode).graph
    cfg = dataclasses.replace(run.optimizer, seed=o_seed)
    result = optimize_distance(g, corrupted, cfg)
    return TrialResult(t, run.removed, transported_nmi(g, corrupted, result.plan), result.distance)


def run_alignment_experiment(run: AlignmentRun) -> AlignmentSummary:
    rng = np.random.default_rng(run.seed)
    seeds = [tuple(int(s) for s in rng.integers(2**31, size=3)) for _ in range(run.trials)]
    jobs = [(run, t, seeds[t]) for t in range(run.trials)]
    if run.workers > 1:
        with ProcessPoolExecutor(max_workers=run.workers) as pool:
            done = list(pool.map(_trial, jobs))
    else:
        done = [_trial(j) for j in jobs]
    return AlignmentSummary(done)
