"""Seeded generators for the synthetic graph families used in the experiments.

Every generator returns a valid (connected, simple, unit-weight) :class:`Graph`.
Stochastic families are resampled up to ``MAX_RESAMPLES`` times until
connected; if that fails, random bridging edges join the components.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import ConnectivityFailure, Unachievable
from .graph import Graph, validate

MAX_RESAMPLES = 100

BLOCK_DEFAULTS = {"p_in": 0.8, "p_out": 0.05}

FAMILIES = (
    "block_2",
    "block_3",
    "block_4",
    "random_geometric",
    "barabasi_albert",
    "random_regular",
    "powerlaw_tree",
    "caveman",
    "barbell",
    "wheel",
    "ladder",
    "lollipop",
    "star",
    "grid",
    "ring",
)

STOCHASTIC = {"block_2", "block_3", "block_4", "random_geometric", "barabasi_albert", "random_regular", "powerlaw_tree"}

# accepted parameter names per family
_PARAMS = {
    "block_2": {"p_in", "p_out"},
    "block_3": {"p_in", "p_out"},
    "block_4": {"p_in", "p_out"},
    "random_geometric": {"radius"},
    "barabasi_albert": {"m"},
    "random_regular": {"d"},
    "powerlaw_tree": {"gamma"},
    "caveman": {"clique"},
    "barbell": {"clique"},
    "wheel": set(),
    "ladder": set(),
    "lollipop": {"clique"},
    "star": set(),
    "grid": {"rows", "cols"},
    "ring": set(),
}


@dataclass(frozen=True)
class FamilySpec:
    """A graph family, its size, family-specific parameters and a seed."""

    family: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise Unachievable(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if not isinstance(self.n, int) or self.n < 1:
            raise Unachievable(f"vertex count must be a positive integer, got {self.n!r}")
        unknown = set(self.params) - _PARAMS[self.family]
        if unknown:
            raise Unachievable(f"unknown parameters for {self.family}: {sorted(unknown)}")

    def with_seed(self, seed: int) -> "FamilySpec":
        return FamilySpec(self.family, self.n, dict(self.params), int(seed))

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "FamilySpec":
        unknown = set(d) - {"family", "n", "params", "seed"}
        if unknown:
            raise Unachievable(f"unknown family spec keys: {sorted(unknown)}")
        return cls(d["family"], int(d["n"]), dict(d.get("params", {})), int(d.get("seed", 0)))


def _block_sizes(n: int, k: int) -> list[int]:
    return [n // k + (1 if i < n % k else 0) for i in range(k)]


def _grid_shape(n: int, params: dict) -> tuple[int, int]:
    rows, cols = params.get("rows"), params.get("cols")
    if rows is None and cols is None:
        rows = max(r for r in range(1, math.isqrt(n) + 1) if n % r == 0)
        cols = n // rows
    elif rows is None:
        rows = n // cols
    elif cols is None:
        cols = n // rows
    if rows * cols != n:
        raise Unachievable(f"grid {rows} x {cols} does not have {n} vertices")
    return int(rows), int(cols)


def _draw(spec: FamilySpec, seed: int):
    """One networkx draw of the family, plus planted labels (or ``None``)."""
    n, p = spec.n, spec.params
    fam = spec.family
    if fam.startswith("block_"):
        k = int(fam[-1])
        if n < k:
            raise Unachievable(f"{fam} needs at least {k} vertices")
        p_in = p.get("p_in", BLOCK_DEFAULTS["p_in"])
        p_out = p.get("p_out", BLOCK_DEFAULTS["p_out"])
        if not (0 <= p_out <= 1 and 0 <= p_in <= 1):
            raise Unachievable("block probabilities must lie in [0, 1]")
        sizes = _block_sizes(n, k)
        probs = [[p_in if i == j else p_out for j in range(k)] for i in range(k)]
        G = nx.stochastic_block_model(sizes, probs, seed=seed)
        labels = [c for c, s in enumerate(sizes) for _ in range(s)]
        return G, labels
    if fam == "random_geometric":
        radius = p.get("radius", 0.35)
        if radius <= 0:
            raise Unachievable("radius must be positive")
        return nx.random_geometric_graph(n, radius, seed=seed), None
    if fam == "barabasi_albert":
        m = p.get("m", 2)
        if not 1 <= m < n:
            raise Unachievable(f"attachment count must satisfy 1 <= m < n, got m={m}, n={n}")
        return nx.barabasi_albert_graph(n, m, seed=seed), None
    if fam == "random_regular":
        d = p.get("d", 3)
        if (n * d) % 2 or d >= n or d < 0:
            raise Unachievable(f"no {d}-regular graph on {n} vertices")
        return nx.random_regular_graph(d, n, seed=seed), None
    if fam == "powerlaw_tree":
        gamma = p.get("gamma", 3.0)
        if n == 1:
            return nx.empty_graph(1), None
        try:
            return nx.random_powerlaw_tree(n, gamma, seed=seed, tries=1000), None
        except nx.NetworkXError:
            # fall back to a uniformly random labeled tree
            return nx.from_prufer_sequence(list(np.random.default_rng(seed).integers(0, n, n - 2))), None
    if fam == "caveman":
        c = p.get("clique", 5)
        if c < 2 or n % c:
            raise Unachievable(f"caveman cliques of size {c} do not tile {n} vertices")
        return nx.connected_caveman_graph(n // c, c), [v // c for v in range(n)]
    if fam == "barbell":
        c = p.get("clique", 2 * n // 5)
        if c < 3 or 2 * c > n:
            raise Unachievable(f"barbell with cliques of size {c} does not fit {n} vertices")
        labels = [0] * c + [2] * (n - 2 * c) + [1] * c
        return nx.barbell_graph(c, n - 2 * c), labels
    if fam == "lollipop":
        c = p.get("clique", n // 2)
        if c < 3 or c > n:
            raise Unachievable(f"lollipop with a clique of size {c} does not fit {n} vertices")
        return nx.lollipop_graph(c, n - c), None
    if fam == "wheel":
        if n < 4:
            raise Unachievable("a wheel needs at least 4 vertices")
        return nx.wheel_graph(n), None
    if fam == "ladder":
        if n < 4 or n % 2:
            raise Unachievable("a ladder needs an even number of vertices, at least 4")
        return nx.ladder_graph(n // 2), None
    if fam == "star":
        if n < 2:
            raise Unachievable("a star needs at least 2 vertices")
        return nx.star_graph(n - 1), None
    if fam == "grid":
        rows, cols = _grid_shape(n, p)
        G = nx.convert_node_labels_to_integers(nx.grid_2d_graph(rows, cols), ordering="sorted")
        return G, None
    if fam == "ring":
        if n < 3:
            raise Unachievable("a ring needs at least 3 vertices")
        return nx.cycle_graph(n), None
    raise Unachievable(f"unknown family {fam!r}")  # pragma: no cover


def _bridge(G, rng: np.random.Generator):
    """Join components with uniformly random edges until connected."""
    G = G.copy()
    comps = [sorted(c) for c in nx.connected_components(G)]
    while len(comps) > 1:
        a, b = rng.choice(len(comps), size=2, replace=False)
        u = int(rng.choice(comps[a]))
        v = int(rng.choice(comps[b]))
        G.add_edge(u, v)
        comps = [sorted(c) for c in nx.connected_components(G)]
    return G


def _to_graph(G, labels) -> Graph:
    G = nx.convert_node_labels_to_integers(G, ordering="sorted")
    edges = sorted((min(u, v), max(u, v), 1.0) for u, v in G.edges())
    return Graph.from_edges(G.number_of_nodes(), edges, labels)


def generate(spec: FamilySpec) -> Graph:
    """Draw one graph of ``spec.family``; identical specs give identical graphs."""
    rng = np.random.default_rng(spec.seed)
    if spec.family not in STOCHASTIC:
        G, labels = _draw(spec, None)
        g = _to_graph(G, labels)
        validate(g)
        return g
    G = labels = None
    for _ in range(MAX_RESAMPLES):
        G, labels = _draw(spec, int(rng.integers(2**31)))
        if nx.is_connected(G):
            break
    else:
        G = _bridge(G, rng)
    if G.number_of_nodes() != spec.n or not nx.is_connected(G):
        raise ConnectivityFailure(f"could not produce a connected {spec.family} graph on {spec.n} vertices")
    g = _to_graph(G, labels)
    validate(g)
    return g


def generate_family(family: str, n: int, seed: int = 0, **params) -> Graph:
    """Shorthand for ``generate(FamilySpec(family, n, params, seed))``."""
    return generate(FamilySpec(family, n, params, seed))
