import numpy as np
import pytest

from copt.errors import Unachievable
from copt.graph import is_valid, laplacian, fiedler_partition
from copt.synthgen import FAMILIES, FamilySpec, generate, generate_family

SIZES = {"caveman": 20, "ladder": 20, "grid": 20}


def _degrees(g):
    return sorted((int(d) for d in np.diag(laplacian(g))), reverse=True)


def test_regular_degree_two_on_five_is_the_cycle():
    g = generate_family("random_regular", 5, seed=3, d=2)
    assert len(g.canonical_edges()) == 5
    assert _degrees(g) == [2] * 5


def test_star_degrees():
    assert _degrees(generate_family("star", 6)) == [5, 1, 1, 1, 1, 1]


@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_is_valid_and_seeded(family):
    n = SIZES.get(family, 20)
    a = generate(FamilySpec(family, n, seed=11))
    b = generate(FamilySpec(family, n, seed=11))
    assert is_valid(a)
    assert a.n == n
    assert a.canonical_edges() == b.canonical_edges()


def test_different_seeds_differ():
    a = generate_family("barabasi_albert", 30, seed=1)
    b = generate_family("barabasi_albert", 30, seed=2)
    assert a.canonical_edges() != b.canonical_edges()


@pytest.mark.parametrize(
    "family, n, params",
    [
        ("random_regular", 5, {"d": 3}),
        ("caveman", 11, {"clique": 5}),
        ("ladder", 7, {}),
        ("grid", 12, {"rows": 5}),
        ("block_2", 20, {"p_in": 1.5}),
        ("block_4", 3, {}),
        ("star", 10, {"radius": 0.2}),
    ],
)
def test_unachievable(family, n, params):
    with pytest.raises(Unachievable):
        generate(FamilySpec(family, n, params))


def test_unknown_family():
    with pytest.raises(Unachievable):
        FamilySpec("petersen", 10)


def test_block_labels_are_planted():
    g = generate_family("block_3", 31, seed=0)
    assert g.labels == tuple([0] * 11 + [1] * 10 + [2] * 10)


def test_sparse_block_model_is_bridged():
    # far below the connectivity threshold: resampling fails, bridging joins it
    g = generate_family("block_2", 30, seed=0, p_in=0.02, p_out=0.0)
    assert is_valid(g)


@pytest.mark.parametrize("seed", range(5))
def test_block2_fiedler_split_recovers_partition(seed):
    g = generate_family("block_2", 40, seed=seed, p_in=0.8, p_out=0.05)
    side = fiedler_partition(laplacian(g))
    planted = np.asarray(g.labels)
    agree = max(np.mean(side == planted), np.mean(side != planted))
    assert agree >= 0.9


def test_spec_round_trip():
    spec = FamilySpec("grid", 12, {"rows": 3}, seed=4)
    assert FamilySpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(Unachievable):
        FamilySpec.from_dict({**spec.to_dict(), "colour": 1})


def test_grid_shape():
    g = generate_family("grid", 12)
    # 3 x 4 grid: 3*3 + 2*4 edges
    assert len(g.canonical_edges()) == 17
