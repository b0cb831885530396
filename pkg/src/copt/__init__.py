"""Graph distances and sketches from coupled vertex and graph-signal transport."""
from .errors import CoptError
from .graph import Graph, laplacian, pseudoinverse, spectral_projection, validate
from .objective import SketchParams, copt_distance_value, copt_gradient, copt_objective, sinkhorn_normalize
from .optimizer import (
    DistanceResult,
    OptimConfig,
    SketchResult,
    optimize_distance,
    optimize_sketch,
    round_to_permutation,
)
from .synthgen import FamilySpec, generate

__all__ = [
    "CoptError",
    "DistanceResult",
    "FamilySpec",
    "Graph",
    "OptimConfig",
    "SketchParams",
    "SketchResult",
    "copt_distance_value",
    "copt_gradient",
    "copt_objective",
    "generate",
    "laplacian",
    "optimize_distance",
    "optimize_sketch",
    "pseudoinverse",
    "round_to_permutation",
    "sinkhorn_normalize",
    "spectral_projection",
    "validate",
]
