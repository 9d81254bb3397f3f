"""Fixed-rank SPSD matrices (factored) and the SPD manifold under the
Bures-Wasserstein metric.

The factored family represents X = Y Y' by its full-column-rank factor Y;
the factor space is open, so the retraction is plain addition and the
entry basis e_i e_j' is orthonormal.  The coordinate derivative is the
(i, j) entry of the factored gradient (g + g') y; a coordinate step changes
exactly one entry of Y.

The BW family works on the SPD matrix itself.  The basis direction for the
pair (i, j) is B = E_ij X + X E_ij (E_ij the symmetric unit pair, with
E_ii = 2 e_i e_i'); the retraction along t B is the metric exponential
X + t B + t^2 E_ij X E_ij = (I + t E_ij) X (I + t E_ij), which touches only
rows and columns i and j and stays positive definite whenever I + t E_ij is
nonsingular.  The published descent update uses parameter -2 eta theta, so
``step_scale`` is 2.
"""

from __future__ import annotations

import numpy as np

from ..indices import Entry, Pair
from ..linalg import sym_eig, thin_svd
from ..rng import SplitMix64
from .base import CoordinateStepReport, Manifold, ManifoldDescriptor, coordinate_step


class FactoredSpsd(Manifold):
    family = "spsd_factored"

    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.n, self.p = descriptor.dims
        self._basis = [Entry(i, j) for i in range(self.n) for j in range(self.p)]

    @property
    def ambient_shape(self):
        return (self.n, self.p)

    @property
    def gradient_shape(self):
        return (self.n, self.n)

    def feasibility_residual(self, x):
        self.check_shape(x)
        return 0.0

    def riemannian_gradient(self, y, g):
        """Factored gradient (g + g') y of f(Y Y') for ambient gradient g."""
        return (g + g.T) @ y

    def derivative_carrier(self, y, g):
        """(Y-space gradient matrix, symmetrized ambient gradient).

        The matrix is linear in Y for a fixed ambient gradient, so an
        anchored carrier stays exact under single-entry updates via the
        column fix-up in ``update_carrier``; reads are then O(1)."""
        gs = 0.5 * (g + g.T)
        return 2.0 * (gs @ y), gs

    def carrier_flops(self):
        n, p = self.n, self.p
        return n * n + 2 * n * n * p

    def update_carrier(self, carrier, y, l, t):
        r, gs = carrier
        r[:, l.j] += (2.0 * t) * gs[:, l.i]
        return 2 * self.n + 1

    def enumerate_basis(self):
        return self._basis

    def coordinate_derivative_from_carrier(self, y, d, l):
        i, j = l
        return float(d[0][i, j])

    def reference_gradient(self, y, g):
        return (g + g.T) @ y

    def coordinate_retract(self, y, l, t, inplace=False):
        i, j = l
        report = CoordinateStepReport(None, 2, f"entry ({i},{j})")
        if t == 0.0:
            return (y if inplace else y.copy()), report
        out = y if inplace else y.copy()
        out[i, j] += t
        return out, report

    def full_retract(self, y, u, t):
        return y + t * u

    def flop_parts(self, l):
        return 1, 2

    def rgd_flops(self):
        n, p = self.n, self.p
        # gradient projection n^2 + 2n^2 p, additive step 2np
        return n * n + 2 * n * n * p + 2 * n * p

    def materialize_basis(self, y, l):
        i, j = l
        b = np.zeros_like(y)
        b[i, j] = 1.0
        return b

    def random_point(self, rng: SplitMix64):
        y = rng.gaussian(self.n, self.p)
        return y / np.linalg.norm(y)

    def random_tangent(self, y, rng: SplitMix64):
        return rng.gaussian(self.n, self.p)

    def rank_ok(self, y, rtol: float = 1e-10) -> bool:
        """Construction-time rank monitor for the factor."""
        _, sigma, _ = thin_svd(y)
        return bool(sigma[-1] > rtol * sigma[0])


class SpdBuresWasserstein(Manifold):
    family = "spd_bures_wasserstein"
    step_scale = 2.0

    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.n = descriptor.dims[0]
        self._basis = [Pair(i, j) for i in range(self.n) for j in range(i, self.n)]

    @property
    def ambient_shape(self):
        return (self.n, self.n)

    def feasibility_residual(self, x):
        self.check_shape(x)
        return float(np.linalg.norm(x - x.T))

    def riemannian_gradient(self, x, g):
        gs = 0.5 * (g + g.T)
        return 2.0 * (gs @ x + x @ gs)

    def derivative_carrier(self, x, g):
        return 0.5 * (g + g.T)

    def carrier_flops(self):
        return 2 * self.n * self.n

    def enumerate_basis(self):
        return self._basis

    def coordinate_derivative_from_carrier(self, x, d, l):
        i, j = l
        if i == j:
            return 4.0 * float(np.dot(x[i], d[i]))
        return 2.0 * (float(np.dot(x[j], d[i])) + float(np.dot(x[i], d[j])))

    def coordinate_retract(self, x, l, t, inplace=False):
        i, j = l
        _, upd = self.flop_parts(l)
        report = CoordinateStepReport(None, upd, f"rows/cols {i},{j}")
        if t == 0.0:
            return (x if inplace else x.copy()), report
        out = x if inplace else x.copy()
        # (I + t E_ij) X (I + t E_ij): rows are built once and mirrored onto
        # the columns, so the result is symmetric exactly, not on average.
        if i == j:
            a = 1.0 + 2.0 * t
            xii = out[i, i]
            new_row = a * out[i]
            new_row[i] = (a * a) * xii
            out[i] = new_row
            out[:, i] = new_row
        else:
            row_i = out[i].copy()
            row_j = out[j].copy()
            xii, xij, xjj = row_i[i], row_i[j], row_j[j]
            t2 = t * t
            new_i = row_i + t * row_j
            new_j = row_j + t * row_i
            new_i[i] = xii + (2.0 * t) * xij + t2 * xjj
            new_i[j] = xij + t * (xii + xjj) + t2 * xij
            new_j[i] = new_i[j]
            new_j[j] = xjj + (2.0 * t) * xij + t2 * xii
            out[i] = new_i
            out[j] = new_j
            out[:, i] = new_i
            out[:, j] = new_j
        return out, report

    def full_retract(self, x, u, t):
        """BW exponential: X + tU + S X S with S solving S X + X S = t U."""
        v, lam = sym_eig(x)
        s_tilde = (v.T @ (t * u) @ v) / (lam[:, None] + lam[None, :])
        s = v @ s_tilde @ v.T
        return x + t * u + s @ x @ s

    def flop_parts(self, l):
        n = self.n
        if l.i == l.j:
            return 2 * n + 1, n + 4
        return 4 * n + 2, 4 * n + 17

    def rgd_flops(self):
        n = self.n
        # gradient 4n^3 + 2n^2, closed-form quadratic update 6n^3 + 4n^2
        return 10 * n**3 + 6 * n * n

    def materialize_basis(self, x, l):
        i, j = l
        e = np.zeros_like(x)
        if i == j:
            e[i, i] = 2.0
        else:
            e[i, j] = 1.0
            e[j, i] = 1.0
        return e @ x + x @ e

    def renormalize(self, x):
        return 0.5 * (x + x.T)

    def random_point(self, rng: SplitMix64):
        a = rng.gaussian(self.n, self.n)
        return (a @ a.T) / self.n + np.eye(self.n)

    def random_tangent(self, x, rng: SplitMix64):
        z = rng.gaussian(self.n, self.n)
        return z + z.T

    def min_eigenvalue(self, x) -> float:
        _, lam = sym_eig(0.5 * (x + x.T))
        return float(lam[0])


def spsd_coordinate_step(y, i, j, eta, g, inplace=False):
    """One descent step on the factor: theta from the ambient gradient (one
    row/column pair), then a single-entry update."""
    desc = ManifoldDescriptor("spsd_factored", y.shape)
    return coordinate_step(FactoredSpsd(desc), y, Entry(i, j), eta, g, inplace)


def spsd_coordinate_step_entry(y, i, j, eta, theta, inplace=False):
    """Direct-entry variant: the caller supplies theta, the update is O(1)."""
    out = y if inplace else y.copy()
    out[i, j] -= eta * theta
    return out, CoordinateStepReport(theta, 3, f"entry ({i},{j})")


def spd_bw_coordinate_step(x, i, j, eta, g, inplace=False):
    """One descent step under the transport metric: the quadratic two-row /
    two-column update with parameter -2 eta theta."""
    desc = ManifoldDescriptor("spd_bures_wasserstein", x.shape)
    return coordinate_step(SpdBuresWasserstein(desc), x, Pair(i, j), eta, g, inplace)
