import numpy as np
import pytest

from copt.errors import CoptError, DimMismatch, EmptyDataset
from copt.graph import laplacian, spectral_projection
from copt.optimizer import OptimConfig, optimize_sketch
from copt.retrieval import (
    GraphVector,
    RetrievalRun,
    VectorCache,
    default_classes,
    draw_graphs,
    flatten_upper,
    nearest,
    pipeline_retrieve,
    rank,
    run_retrieval_experiment,
    vectorize,
    vectorize_all,
)
from copt.synthgen import generate_family

from helpers import random_connected

FAST = OptimConfig(n_iter=60)


def _vec(values, method="spectral"):
    return GraphVector(np.asarray(values, dtype=float), method)


def test_flatten_upper_includes_diagonal():
    L = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(flatten_upper(L), [0, 1, 2, 4, 5, 8])


def test_sketch_vector_length_120_for_m15():
    g = random_connected(20, 0.3, 1)
    v = vectorize(g, "copt_sketch", 15, FAST)
    assert v.dim == 120


def test_spectral_vector_length_150():
    g = generate_family("barabasi_albert", 50, seed=0)
    v = vectorize(g, "spectral", 3)
    assert v.dim == 150
    V = spectral_projection(laplacian(g), 3)
    np.testing.assert_array_equal(v.values[:50], V[:, 0])


def test_canonical_vector_sorted_and_permutation_invariant():
    g = random_connected(9, 0.4, 2)
    v = vectorize(g, "copt_sketch_canonical", 3, FAST)
    assert v.dim == 6
    assert np.all(np.diff(v.values) >= 0)
    L = optimize_sketch(g, 3, FAST).laplacian
    for perm in ([1, 2, 0], [2, 1, 0]):
        Lp = L[np.ix_(perm, perm)]
        np.testing.assert_array_equal(np.sort(flatten_upper(Lp)), v.values)


def test_vectorize_deterministic():
    g = random_connected(10, 0.4, 3)
    a = vectorize(g, "copt_sketch", 4, OptimConfig(n_iter=50, seed=7))
    b = vectorize(g, "copt_sketch", 4, OptimConfig(n_iter=50, seed=7))
    np.testing.assert_array_equal(a.values, b.values)


def test_vectorize_rejects_large_size():
    with pytest.raises(CoptError):
        vectorize(random_connected(5, 0.5, 0), "spectral", 5)


def test_nearest_examples():
    data = [_vec([0, 0]), _vec([1, 1]), _vec([5, 5]), _vec([2, 3])]
    assert nearest(_vec([2, 3]), data) == 3
    assert nearest(_vec([9, 9]), data[:1]) == 0
    # l1 distances 2, 1, 5 from the origin
    three = [_vec([1, 1]), _vec([0, 1]), _vec([2, 3])]
    assert nearest(_vec([0, 0]), three, "l1") == 1


def test_nearest_ties_go_to_lowest_index():
    data = [_vec([1, 0]), _vec([0, 1]), _vec([-1, 0])]
    assert nearest(_vec([0, 0]), data, "l2") == 0
    assert list(rank(_vec([0, 0]), data, "l2")) == [0, 1, 2]


def test_nearest_errors():
    with pytest.raises(EmptyDataset):
        nearest(_vec([1.0]), [])
    with pytest.raises(DimMismatch):
        nearest(_vec([1.0]), [_vec([1.0, 2.0])])
    with pytest.raises(DimMismatch):
        nearest(_vec([1.0]), [_vec([1.0], "copt_sketch")])


def test_nearest_l2_matches_double_loop():
    rng = np.random.default_rng(4)
    for _ in range(30):
        data = [_vec(rng.standard_normal(12)) for _ in range(15)]
        q = _vec(rng.standard_normal(12))
        best, best_d = None, np.inf
        for i, v in enumerate(data):
            d = np.sqrt(sum((a - b) ** 2 for a, b in zip(q.values, v.values)))
            if d < best_d:
                best, best_d = i, d
        assert nearest(q, data, "l2") == best


# ----------------------------------------------------------------------------
# pipeline


def _small_dataset():
    graphs, labels = draw_graphs(default_classes(12), 12, np.random.default_rng(0))
    vectors = vectorize_all(graphs, "copt_sketch", 4, OptimConfig(n_iter=150))
    return graphs, labels, vectors


def test_pipeline_coarse_only():
    graphs, _, vectors = _small_dataset()
    cands = pipeline_retrieve(graphs[2], graphs, vectors, vectors[2], "l1", 5)
    assert [c.index for c in cands][0] == 2
    assert all(c.fine_distance is None for c in cands)
    d = [c.coarse_distance for c in cands]
    assert d == sorted(d)


def test_pipeline_full_top_k_is_ordered_by_fine_stage():
    graphs, _, vectors = _small_dataset()
    cfg = OptimConfig(n_iter=100)
    cands = pipeline_retrieve(graphs[0], graphs[:5], vectors[:5], vectors[0], "l1", 5, cfg)
    assert sorted(c.index for c in cands) == [0, 1, 2, 3, 4]
    fine = [c.fine_distance for c in cands]
    assert fine == sorted(fine)


def test_pipeline_top1_rescoring_keeps_coarse_winner():
    graphs, _, vectors = _small_dataset()
    q = vectors[5]
    cands = pipeline_retrieve(graphs[5], graphs, vectors, q, "l1", 1, OptimConfig(n_iter=100))
    assert len(cands) == 1 and cands[0].index == nearest(q, vectors, "l1")
    assert cands[0].fine_distance is not None


def test_pipeline_ranks_identical_graph_first():
    graphs, _, vectors = _small_dataset()
    for qi in range(6):
        cands = pipeline_retrieve(graphs[qi], graphs, vectors, vectors[qi], "l1", 3, OptimConfig(restarts=3))
        assert cands[0].index == qi


def test_pipeline_rejects_bad_top_k():
    graphs, _, vectors = _small_dataset()
    with pytest.raises(CoptError):
        pipeline_retrieve(graphs[0], graphs, vectors, vectors[0], "l1", 0)


# ----------------------------------------------------------------------------
# cache and experiment


def test_cache_round_trip(tmp_path):
    graphs = [random_connected(8, 0.4, s) for s in range(3)]
    path = tmp_path / "vectors.bin"
    cache = VectorCache(path)
    first = vectorize_all(graphs, "copt_sketch", 3, FAST, cache)
    size = path.stat().st_size
    reopened = VectorCache(path)
    assert len(reopened) == 3
    again = vectorize_all(graphs, "copt_sketch", 3, FAST, reopened)
    assert path.stat().st_size == size
    for a, b in zip(first, again):
        np.testing.assert_array_equal(a.values, b.values)


def test_self_retrieval_is_exact():
    graphs, labels = draw_graphs(default_classes(16), 18, np.random.default_rng(1))
    for method, size in (("spectral", 3), ("copt_sketch", 5)):
        vectors = vectorize_all(graphs, method, size, FAST)
        metric = "l2" if method == "spectral" else "l1"
        hits = [labels[nearest(v, vectors, metric)] == labels[i] for i, v in enumerate(vectors)]
        assert np.mean(hits) == 1.0


def test_retrieval_experiment_small(tmp_path):
    run = RetrievalRun(default_classes(12), n_dataset=12, n_query=6, method="spectral", size=3, metric="l2", repeats=2, seed=3)
    a = run_retrieval_experiment(run)
    b = run_retrieval_experiment(run)
    assert a.accuracies == b.accuracies
    assert len(a.results) == 12
    assert all(0 <= acc <= 1 for acc in a.accuracies)
    assert a.line().startswith("accuracy: ")
    out = tmp_path / "r.csv"
    a.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "repeat,query_id,true_class,predicted_class,coarse_rank_of_truth,fine_distance"
    assert len(lines) == 13


def test_retrieval_run_validation():
    with pytest.raises(CoptError):
        RetrievalRun([])
    with pytest.raises(CoptError):
        RetrievalRun(default_classes(12), metric="cosine")


def test_pipeline_is_at_least_as_accurate_as_coarse(tmp_path):
    cache = VectorCache(tmp_path / "vectors.bin")
    common = dict(n_dataset=120, n_query=36, method="copt_sketch", size=10, repeats=5, seed=21)
    coarse = run_retrieval_experiment(RetrievalRun(default_classes(30), **common), cache)
    fine = run_retrieval_experiment(RetrievalRun(default_classes(30), fine="copt_distance", top_k=3, **common), cache)
    assert fine.mean >= coarse.mean
