"""Stiefel and Grassmann manifolds with row-rotation coordinate updates.

Points are n x p matrices with orthonormal columns.  The coordinate basis is
the family of row-pair skew directions: B_(i,j) has row i equal to row j of X
and row j equal to minus row i of X.  Retracting along B_(i,j) is a plane
rotation of rows i and j, so a coordinate step touches 2p entries.

A Grassmann point is a Stiefel representative of its column span; the
coordinate update commutes with the right action of the orthogonal group, so
the same step functions serve both families (only the Riemannian gradient
differs: horizontal projection instead of tangent projection).

The column-wise baseline (tsd_* functions) uses the alternative basis of
column-pair rotations plus per-column sphere steps; it is kept for benchmark
comparisons only.
"""

from __future__ import annotations

import math

import numpy as np

from ..indices import Column, CoordinateIndex, Pair
from ..linalg import apply_rotation, thin_qr, thin_svd
from ..rng import SplitMix64
from .base import CoordinateStepReport, Manifold, ManifoldDescriptor, coordinate_step


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def enumerate_pairs(n: int) -> list[Pair]:
    return [Pair(i, j) for i in range(n) for j in range(i + 1, n)]


class Stiefel(Manifold):
    family = "stiefel"

    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.n, self.p = descriptor.dims
        self._basis = enumerate_pairs(self.n)

    @property
    def ambient_shape(self):
        return (self.n, self.p)

    def feasibility_residual(self, x):
        self.check_shape(x)
        return float(np.linalg.norm(x.T @ x - np.eye(self.p)))

    def riemannian_gradient(self, x, g):
        return g - x @ _sym(x.T @ g)

    def enumerate_basis(self):
        return self._basis

    def coordinate_derivative_from_carrier(self, x, d, l):
        i, j = l
        return float(np.dot(d[i], x[j]) - np.dot(d[j], x[i]))

    def coordinate_retract(self, x, l, t, inplace=False):
        i, j = l
        report = CoordinateStepReport(None, self.flop_parts(l)[1], f"rows {i},{j}")
        if t == 0.0:
            return (x if inplace else x.copy()), report
        return apply_rotation(x, i, j, t, "left", "circular", inplace), report

    def full_retract(self, x, u, t):
        q, _ = thin_qr(x + t * u)
        return q

    def flop_parts(self, l):
        return 4 * self.p, 6 * self.p

    def rgd_flops(self):
        n, p = self.n, self.p
        # tangent projection 4np^2 + p^2 + np, step 2np, thin QR 2np^2
        return 6 * n * p * p + p * p + 3 * n * p

    def materialize_basis(self, x, l):
        i, j = l
        b = np.zeros_like(x)
        b[i] = x[j]
        b[j] = -x[i]
        return b

    def renormalize(self, x):
        q, _ = thin_qr(x)
        return q

    def random_point(self, rng: SplitMix64):
        q, _ = thin_qr(rng.gaussian(self.n, self.p))
        return q

    def random_tangent(self, x, rng: SplitMix64):
        z = rng.gaussian(self.n, self.p)
        return z - x @ _sym(x.T @ z)


class Grassmann(Stiefel):
    family = "grassmann"

    def riemannian_gradient(self, x, g):
        return g - x @ (x.T @ g)


def stiefel_coordinate_step(x, i, j, eta, g, inplace=False):
    """One descent step on the frame manifold: theta from rows (i, j) of the
    gradient and point, then a plane rotation by -eta * theta."""
    man = make_stiefel(x.shape)
    return coordinate_step(man, x, Pair(i, j), eta, g, inplace)


def make_stiefel(shape) -> Stiefel:
    return Stiefel(ManifoldDescriptor("stiefel", shape))


# -- canonical-metric helpers (exposed for the derivative-equality check) ---


def stiefel_canonical_gradient(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gradient under the canonical metric <u, (I - xx'/2) v>."""
    return g - x @ (g.T @ x)


def stiefel_canonical_inner(x: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum(u * v) - 0.5 * np.sum((x.T @ u) * (x.T @ v)))


def grassmann_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Subspace distance: 2-norm of the principal angles between spans.

    Small angles come from the sine (singular values of the residual
    Y - X X'Y), large ones from the cosine; arccos alone loses half the
    digits near zero angle.
    """
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    c = x.T @ y
    _, cos_sig, _ = thin_svd(c)
    _, sin_sig, _ = thin_svd(y - x @ c)
    cos_sig = np.clip(cos_sig, -1.0, 1.0)
    sin_asc = np.clip(sin_sig[::-1], 0.0, 1.0)
    angles = np.where(cos_sig >= math.sqrt(0.5),
                      np.arcsin(sin_asc), np.arccos(cos_sig))
    return float(np.linalg.norm(angles))


# -- column-wise baseline ----------------------------------------------------


def tsd_enumerate(p: int) -> list[CoordinateIndex]:
    """Column-pair rotations first, then the p sphere columns."""
    out: list[CoordinateIndex] = [Pair(i, j) for i in range(p) for j in range(i + 1, p)]
    out.extend(Column(k) for k in range(p))
    return out


def tsd_pair_derivative(x: np.ndarray, g: np.ndarray, i: int, j: int) -> float:
    return float(np.dot(g[:, j], x[:, i]) - np.dot(g[:, i], x[:, j]))


def tsd_pair_step(x, i, j, eta, g, inplace=False):
    theta = tsd_pair_derivative(x, g, i, j)
    if theta == 0.0:
        return (x if inplace else x.copy()), theta
    # X @ G_ij(-eta*theta) recombines columns with the opposite sign convention
    return apply_rotation(x, i, j, eta * theta, "right", "circular", inplace), theta


def tsd_column_step(x, k, eta, g, inplace=False):
    """Sphere step on column k along the projected gradient.

    Skipped when the projected gradient norm is below 1e-14 (the sphere
    exponential is singular at zero).
    """
    gk = g[:, k]
    v = -eta * (gk - x @ (x.T @ gk))
    r = float(np.linalg.norm(v))
    out = x if inplace else x.copy()
    if r < 1e-14:
        return out, 0.0
    out[:, k] = math.cos(r) * x[:, k] + (math.sin(r) / r) * v
    return out, r


def tsd_coordinate_step(x, l, eta, g):
    """One baseline step (pure form) for either label kind."""
    if isinstance(l, Pair):
        out, _ = tsd_pair_step(x, l.i, l.j, eta, g, inplace=False)
    elif isinstance(l, Column):
        out, _ = tsd_column_step(x, l.k, eta, g, inplace=False)
    else:
        raise ValueError(f"invalid baseline label {l!r}")
    return out


def tsd_flop_parts(l: CoordinateIndex, n: int, p: int) -> tuple[int, int]:
    if isinstance(l, Pair):
        return 4 * n, 6 * n
    return 4 * n * p + n, 6 * n + 9
