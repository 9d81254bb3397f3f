"""Coordinate index labels for the per-manifold tangent bases.

Each manifold enumerates its basis in a fixed, documented total order
(row-major over the valid labels); optimizers address basis directions only
through these labels.  Indices are zero-based everywhere inside the package;
one-based forms appear only in human-facing reports.
"""

from __future__ import annotations

from typing import NamedTuple, Union


class Pair(NamedTuple):
    """Row pair (i, j): rotation-type coordinates; i < j, or i <= j where
    the family admits diagonal labels."""

    i: int
    j: int


class Entry(NamedTuple):
    """Anchored entry (i, j): element-type coordinates (doubly stochastic,
    multinomial, factored SPSD)."""

    i: int
    j: int


class Column(NamedTuple):
    """Column label for the column-wise Stiefel baseline."""

    k: int


CoordinateIndex = Union[Pair, Entry, Column]
