"""Fixed-length graph vectors, nearest-neighbor retrieval and its benchmark.

Graphs become vectors either by sketching them to ``m`` vertices and
flattening the upper triangle (diagonal included) of the sketch Laplacian, or
by flattening the ``n x k`` spectral projection. Retrieval predicts the class
of the nearest dataset vector; the pipeline variant re-ranks the ``top_k``
coarse candidates by the full distance.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import CoptError, DimMismatch, EmptyDataset
from .graph import Graph, laplacian, spectral_projection, validate
from .optimizer import OptimConfig, optimize_distance, optimize_sketch
from .synthgen import FamilySpec, generate

METHODS = ("copt_sketch", "copt_sketch_canonical", "spectral")


@dataclass
class GraphVector:
    values: np.ndarray
    method: str
    dim: int = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.method not in METHODS:
            raise CoptError(f"unknown vectorization method {self.method!r}")
        self.dim = int(self.values.size)


def flatten_upper(L: np.ndarray) -> np.ndarray:
    """Row-major upper triangle of a square matrix, diagonal included."""
    L = np.asarray(L, dtype=float)
    return L[np.triu_indices(L.shape[0])]


def config_digest(cfg: OptimConfig) -> str:
    return hashlib.sha256(json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()[:16]


def vectorize(g: Graph, method: str, size: int, cfg: OptimConfig | None = None) -> GraphVector:
    """Fixed-length vector for ``g``.

    Parameters
    ----------
    method : {"copt_sketch", "copt_sketch_canonical", "spectral"}
    size : int
        Sketch size ``m`` for the sketch methods, number of eigenvectors
        ``k`` for ``"spectral"``.
    cfg : OptimConfig, optional
        Optimizer settings for the sketch methods.
    """
    validate(g)
    if method not in METHODS:
        raise CoptError(f"unknown vectorization method {method!r}")
    if size >= g.n:
        raise CoptError(f"size {size} must be smaller than the vertex count {g.n}")
    if method == "spectral":
        return GraphVector(spectral_projection(laplacian(g), size).ravel(order="F"), method)
    values = flatten_upper(optimize_sketch(g, size, cfg).laplacian)
    if method == "copt_sketch_canonical":
        values = np.sort(values)
    return GraphVector(values, method)


def _distances(query: GraphVector, dataset, metric: str) -> np.ndarray:
    if not dataset:
        raise EmptyDataset("retrieval needs at least one dataset vector")
    for v in dataset:
        if v.dim != query.dim or v.method != query.method:
            raise DimMismatch(f"query is {query.method}/{query.dim}, dataset has {v.method}/{v.dim}")
    X = np.stack([v.values for v in dataset])
    diff = X - query.values
    if metric == "l1":
        return np.abs(diff).sum(axis=1)
    if metric == "l2":
        return np.sqrt((diff * diff).sum(axis=1))
    raise CoptError(f"unknown metric {metric!r}")


def nearest(query: GraphVector, dataset, metric: str = "l1") -> int:
    """Index of the closest dataset vector; ties go to the lowest index."""
    return int(np.argmin(_distances(query, dataset, metric)))


def rank(query: GraphVector, dataset, metric: str = "l1") -> np.ndarray:
    """Dataset indices ordered by distance, ties by index."""
    d = _distances(query, dataset, metric)
    return np.lexsort((np.arange(d.size), d))


@dataclass
class Candidate:
    index: int
    coarse_distance: float
    fine_distance: float | None = None


def pipeline_retrieve(
    query: Graph,
    dataset_graphs,
    dataset_vectors,
    query_vector: GraphVector,
    metric: str = "l1",
    top_k: int = 3,
    fine_cfg: OptimConfig | None = None,
) -> list[Candidate]:
    """Coarse vector ranking, then re-ranking of the best ``top_k`` by distance.

    With ``fine_cfg=None`` only the coarse stage runs. Returns candidates
    best first.
    """
    if not 1 <= top_k <= len(dataset_vectors):
        raise CoptError(f"top_k must lie in 1..{len(dataset_vectors)}, got {top_k}")
    d = _distances(query_vector, dataset_vectors, metric)
    order = np.lexsort((np.arange(d.size), d))[:top_k]
    cands = [Candidate(int(i), float(d[i])) for i in order]
    if fine_cfg is None:
        return cands
    for c in cands:
        c.fine_distance = optimize_distance(query, dataset_graphs[c.index], fine_cfg).distance
    # stable sort keeps coarse order among equal fine distances
    return sorted(cands, key=lambda c: c.fine_distance)


# ----------------------------------------------------------------------------
# vector cache


class VectorCache:
    """Append-only store of graph vectors keyed by graph and config digests.

    Each record is a JSON header line followed by ``dim`` little-endian
    float64 values.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._store: dict[tuple, GraphVector] = {}
        if self.path.exists():
            for header, values in read_vector_records(self.path):
                key = (header["graph"], header["config"], header["method"], header["size"])
                self._store[key] = GraphVector(values, header["method"])

    def __len__(self):
        return len(self._store)

    def get(self, key):
        return self._store.get(key)

    def put(self, key, vec: GraphVector):
        if key in self._store:
            return
        self._store[key] = vec
        graph, config, method, size = key
        header = {"graph": graph, "config": config, "method": method, "size": size, "dim": vec.dim}
        with open(self.path, "ab") as fh:
            fh.write(encode_vector_record(header, vec.values))


def encode_vector_record(header: dict, values: np.ndarray) -> bytes:
    line = json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"
    return line.encode() + np.asarray(values, dtype="<f8").tobytes()


def read_vector_records(path):
    data = Path(path).read_bytes()
    pos = 0
    while pos < len(data):
        end = data.index(b"\n", pos)
        header = json.loads(data[pos:end])
        dim = int(header["dim"])
        start = end + 1
        values = np.frombuffer(data[start : start + 8 * dim], dtype="<f8").astype(float)
        if values.size != dim:
            raise CoptError(f"truncated vector record in {path}")
        yield header, values
        pos = start + 8 * dim


# ----------------------------------------------------------------------------
# experiment


@dataclass
class RetrievalRun:
    """Settings of a retrieval experiment.

    ``classes`` are family templates; their seeds are ignored and replaced
    by seeds drawn from ``seed`` and the repeat index.
    """

    classes: list
    n_dataset: int = 120
    n_query: int = 36
    method: str = "copt_sketch"
    size: int = 10
    metric: str = "l1"
    fine: str = "none"
    top_k: int = 3
    repeats: int = 5
    seed: int = 0
    sketch: OptimConfig = field(default_factory=lambda: OptimConfig(n_iter=300))
    fine_cfg: OptimConfig = field(default_factory=OptimConfig)
    workers: int = 1

    def __post_init__(self):
        if not self.classes:
            raise CoptError("a retrieval run needs at least one class")
        if self.method not in METHODS:
            raise CoptError(f"unknown vectorization method {self.method!r}")
        if self.metric not in ("l1", "l2"):
            raise CoptError(f"unknown metric {self.metric!r}")
        if self.fine not in ("none", "copt_distance"):
            raise CoptError(f"unknown fine stage {self.fine!r}")
        if self.n_dataset < 1 or self.n_query < 1 or self.repeats < 1:
            raise CoptError("dataset size, query count and repeats must be positive")


@dataclass
class QueryResult:
    repeat: int
    query_id: int
    true_class: int
    predicted_class: int
    coarse_rank_of_truth: int
    fine_distance: float | None


@dataclass
class RetrievalSummary:
    accuracies: list
    results: list

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def line(self) -> str:
        return f"accuracy: {self.mean:.4f} ± {self.std:.4f}"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["repeat", "query_id", "true_class", "predicted_class", "coarse_rank_of_truth", "fine_distance"])
            for r in self.results:
                fine = "" if r.fine_distance is None else repr(r.fine_distance)
                w.writerow([r.repeat, r.query_id, r.true_class, r.predicted_class, r.coarse_rank_of_truth, fine])


def draw_graphs(classes, count: int, rng: np.random.Generator):
    """``count`` graphs spread evenly over ``classes``, with their class ids."""
    graphs, labels = [], []
    for i in range(count):
        c = i % len(classes)
        spec = classes[c].with_seed(int(rng.integers(2**31)))
        graphs.append(generate(spec))
        labels.append(c)
    return graphs, labels


def _vectorize_job(args):
    g, method, size, cfg = args
    return vectorize(g, method, size, cfg)


def vectorize_all(graphs, method: str, size: int, cfg: OptimConfig, cache: VectorCache | None = None, workers: int = 1):
    """Vectorize many graphs, reusing and filling ``cache`` when given."""
    cdig = config_digest(cfg)
    keys = [(g.digest(), cdig, method, size) for g in graphs]
    out = [cache.get(k) if cache is not None else None for k in keys]
    todo = [i for i, v in enumerate(out) if v is None]
    jobs = [(graphs[i], method, size, cfg) for i in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_vectorize_job, jobs))
    else:
        done = [_vectorize_job(j) for j in jobs]
    for i, vec in zip(todo, done):
        out[i] = vec
        if cache is not None:
            cache.put(keys[i], vec)
    return out


def run_retrieval_experiment(run: RetrievalRun, cache: VectorCache | None = None) -> RetrievalSummary:
    """Nearest-neighbor classification accuracy over ``run.repeats`` fresh draws."""
    accuracies, results = [], []
    children = np.random.SeedSequence(run.seed).spawn(run.repeats)
    for rep, child in enumerate(children):
        rng = np.random.default_rng(child)
        data, data_labels = draw_graphs(run.classes, run.n_dataset, rng)
        queries, query_labels = draw_graphs(run.classes, run.n_query, rng)
        dvecs = vectorize_all(data, run.method, run.size, run.sketch, cache, run.workers)
        qvecs = vectorize_all(queries, run.method, run.size, run.sketch, cache, run.workers)
        correct = 0
        for qi, (q, qv, truth) in enumerate(zip(queries, qvecs, query_labels)):
            order = rank(qv, dvecs, run.metric)
            truth_rank = int(np.flatnonzero(np.asarray(data_labels)[order] == truth)[0])
            fine_cfg = run.fine_cfg if run.fine == "copt_distance" else None
            top_k = min(run.top_k, len(dvecs)) if fine_cfg is not None else 1
            best = pipeline_retrieve(q, data, dvecs, qv, run.metric, top_k, fine_cfg)[0]
            pred = data_labels[best.index]
            correct += int(pred == truth)
            results.append(QueryResult(rep, qi, truth, pred, truth_rank, best.fine_distance))
        accuracies.append(correct / len(queries))
    return RetrievalSummary(accuracies, results)


def default_classes(n: int = 30) -> list[FamilySpec]:
    """The six retrieval classes at ``n`` vertices."""
    return [
        FamilySpec("random_geometric", n, {"radius": 0.35}),
        FamilySpec("block_2", n, {"p_in": 0.7, "p_out": 0.05}),
        FamilySpec("block_3", n, {"p_in": 0.7, "p_out": 0.05}),
        FamilySpec("block_4", n, {"p_in": 0.7, "p_out": 0.05}),
        FamilySpec("barabasi_albert", n, {"m": 2}),
        FamilySpec("random_regular", n, {"d": 3}),
    ]


def cpu_workers() -> int:
    return max(1, (os.cpu_count() or 1))
