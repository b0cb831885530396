"""File formats: edge lists, sketch files, run configurations, CSV and DOT.

Every writer is deterministic, so write -> read -> write reproduces the same
bytes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import CoptError
from .graph import Graph
from .objective import SketchParams
from .optimizer import OptimConfig, SketchResult
from .synthgen import FamilySpec


class FormatError(CoptError):
    """Malformed input file."""


# ----------------------------------------------------------------------------
# edge lists


def parse_edge_list(text: str) -> Graph:
    """Parse ``n <count>`` followed by ``u v [w]`` lines; ``#`` starts a comment."""
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise FormatError(f"line {lineno}: expected 'n <vertex_count>', got {raw!r}")
            try:
                n = int(parts[1])
            except ValueError:
                raise FormatError(f"line {lineno}: bad vertex count {parts[1]!r}") from None
            continue
        if len(parts) not in (2, 3):
            raise FormatError(f"line {lineno}: expected 'u v [w]', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise FormatError(f"line {lineno}: cannot parse {raw!r}") from None
        edges.append((u, v, w))
    if n is None:
        raise FormatError("missing 'n <vertex_count>' header")
    return Graph.from_edges(n, edges)


def format_edge_list(g: Graph) -> str:
    lines = [f"n {g.n}"]
    for u, v, w in g.edges:
        lines.append(f"{u} {v}" if w == 1.0 else f"{u} {v} {w!r}")
    return "\n".join(lines) + "\n"


def read_edge_list(path) -> Graph:
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: not a text file") from e
    return parse_edge_list(text)


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g))


# ----------------------------------------------------------------------------
# sketch files


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def optim_config_to_dict(cfg: OptimConfig) -> dict:
    return asdict(cfg)


def optim_config_from_dict(d: dict) -> OptimConfig:
    names = {f.name for f in dataclasses.fields(OptimConfig)}
    unknown = set(d) - names
    if unknown:
        raise FormatError(f"unknown optimizer keys: {sorted(unknown)}")
    return OptimConfig(**d)


def config_hash(cfg: OptimConfig) -> str:
    return hashlib.sha256(json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()


@dataclass
class SketchFile:
    """Serialized sketch: header fields, ``L_Y``, the plan and the loss curve."""

    n: int
    m: int
    config_hash: str
    distance: float
    objective: float
    hike_iterations: list
    laplacian: np.ndarray
    plan: np.ndarray
    loss_history: list
    lr_history: list = field(default_factory=list)

    @classmethod
    def from_result(cls, result: SketchResult, cfg: OptimConfig) -> "SketchFile":
        return cls(
            result.n,
            result.m,
            config_hash(cfg),
            float(result.distance),
            float(result.objective),
            [int(i) for i in result.hike_iterations],
            np.asarray(result.laplacian, dtype=float),
            np.asarray(result.plan, dtype=float),
            [float(x) for x in result.loss_history],
            [float(x) for x in result.lr_history],
        )

    def to_result(self) -> SketchResult:
        L = np.asarray(self.laplacian, dtype=float)
        evals = np.linalg.eigvalsh(L)
        connected = bool(evals[1] >= 1e-8 * max(1.0, evals[-1])) if self.m > 1 else True
        return SketchResult(
            L,
            np.asarray(self.plan, dtype=float),
            list(self.loss_history),
            self.distance,
            list(self.hike_iterations),
            self.objective,
            SketchParams.from_laplacian(L),
            list(self.lr_history),
            connected,
        )

    def dumps(self) -> str:
        return _dumps(
            {
                "format": "copt-sketch",
                "version": 1,
                "n": self.n,
                "m": self.m,
                "config_hash": self.config_hash,
                "distance": self.distance,
                "objective": self.objective,
                "hike_iterations": self.hike_iterations,
                "laplacian": np.asarray(self.laplacian).tolist(),
                "plan": np.asarray(self.plan).tolist(),
                "loss_history": self.loss_history,
                "lr_history": self.lr_history,
            }
        )

    @classmethod
    def loads(cls, text: str) -> "SketchFile":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"sketch file is not valid JSON: {e}") from None
        expected = {"format", "version", "n", "m", "config_hash", "distance", "objective", "hike_iterations",
                    "laplacian", "plan", "loss_history", "lr_history"}
        if not isinstance(d, dict) or d.get("format") != "copt-sketch":
            raise FormatError("not a sketch file")
        if set(d) != expected:
            raise FormatError(f"sketch file keys differ from the expected set: {sorted(set(d) ^ expected)}")
        L = np.asarray(d["laplacian"], dtype=float)
        P = np.asarray(d["plan"], dtype=float)
        if L.shape != (d["m"], d["m"]) or P.shape != (d["n"], d["m"]):
            raise FormatError("sketch file matrix shapes disagree with its header")
        return cls(d["n"], d["m"], d["config_hash"], d["distance"], d["objective"], d["hike_iterations"], L, P,
                   d["loss_history"], d["lr_history"])


def write_sketch(sf: SketchFile, path) -> None:
    Path(path).write_text(sf.dumps())


def read_sketch(path) -> SketchFile:
    return SketchFile.loads(Path(path).read_text())


# ----------------------------------------------------------------------------
# run configurations


@dataclass
class RunConfig:
    """An experiment description.

    ``experiment`` is ``"retrieval"`` or ``"alignment"``; ``settings`` holds
    the keys of the matching run type (see :func:`build_run`).
    """

    experiment: str
    settings: dict
    seed: int = 0
    output: str | None = None

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "output": self.output, "settings": self.settings}

    def dumps(self) -> str:
        return _dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise FormatError("run configuration must be a JSON object")
        unknown = set(d) - {"experiment", "seed", "output", "settings"}
        if unknown:
            raise FormatError(f"unknown run configuration keys: {sorted(unknown)}")
        if d.get("experiment") not in ("retrieval", "alignment"):
            raise FormatError(f"experiment must be 'retrieval' or 'alignment', got {d.get('experiment')!r}")
        cfg = cls(d["experiment"], dict(d.get("settings", {})), int(d.get("seed", 0)), d.get("output"))
        build_run(cfg)  # reject bad settings early
        return cfg

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise FormatError(f"run configuration is not valid JSON: {e}") from None


def read_run_config(path) -> RunConfig:
    return RunConfig.loads(Path(path).read_text())


def write_run_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(cfg.dumps())


_RETRIEVAL_KEYS = {"classes", "n_dataset", "n_query", "method", "size", "metric", "fine", "top_k", "repeats",
                   "sketch", "fine_cfg", "workers"}
_ALIGNMENT_KEYS = {"family", "removed", "trials", "mode", "optimizer", "workers"}


def build_run(cfg: RunConfig):
    """Turn a :class:`RunConfig` into a retrieval or alignment run object."""
    from .align import AlignmentRun
    from .retrieval import RetrievalRun

    s = dict(cfg.settings)
    if cfg.experiment == "retrieval":
        unknown = set(s) - _RETRIEVAL_KEYS
        if unknown:
            raise FormatError(f"unknown retrieval settings: {sorted(unknown)}")
        if "classes" not in s:
            raise FormatError("retrieval settings need 'classes'")
        s["classes"] = [FamilySpec.from_dict(c) for c in s["classes"]]
        for key in ("sketch", "fine_cfg"):
            if key in s:
                s[key] = optim_config_from_dict(s[key])
        return RetrievalRun(seed=cfg.seed, **s)
    unknown = set(s) - _ALIGNMENT_KEYS
    if unknown:
        raise FormatError(f"unknown alignment settings: {sorted(unknown)}")
    if "family" not in s:
        raise FormatError("alignment settings need 'family'")
    s["family"] = FamilySpec.from_dict(s["family"])
    if "optimizer" in s:
        s["optimizer"] = optim_config_from_dict(s["optimizer"])
    return AlignmentRun(seed=cfg.seed, **s)


# ----------------------------------------------------------------------------
# curves


def format_loss_csv(loss_history, lr_history=(), hike_iterations=()) -> str:
    hikes = set(int(i) for i in hike_iterations)
    lines = ["iteration,loss,lr,hiked"]
    for i, loss in enumerate(loss_history):
        lr = repr(float(lr_history[i])) if i < len(lr_history) else ""
        lines.append(f"{i},{float(loss)!r},{lr},{int(i in hikes)}")
    return "\n".join(lines) + "\n"


def format_plan(plan: np.ndarray) -> str:
    P = np.asarray(plan, dtype=float)
    return "".join(" ".join(repr(float(x)) for x in row) + "\n" for row in P)
