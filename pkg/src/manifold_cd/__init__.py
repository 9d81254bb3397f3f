"""Coordinate descent on matrix manifolds.

Cheap per-coordinate retractions (plane and hyperbolic rotations, reciprocal
scalings, local Sinkhorn balancing, single-entry factor updates) together
with coordinate-descent optimizers, full-gradient baselines, and a
flop-counting benchmark CLI.
"""

from .indices import Column, CoordinateIndex, Entry, Pair
from .manifolds import Manifold, ManifoldDescriptor, make_manifold
from .optimize import (
    IterationRecord,
    OptimizerConfig,
    Trace,
    flop_audit,
    optimize,
    run_rcd,
    run_rcdlin,
    run_rgd,
    run_tsd,
)
from .rng import SplitMix64

__all__ = [
    "Column",
    "CoordinateIndex",
    "Entry",
    "Pair",
    "Manifold",
    "ManifoldDescriptor",
    "make_manifold",
    "IterationRecord",
    "OptimizerConfig",
    "Trace",
    "flop_audit",
    "optimize",
    "run_rcd",
    "run_rcdlin",
    "run_rgd",
    "run_tsd",
    "SplitMix64",
]
