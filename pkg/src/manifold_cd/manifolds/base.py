"""The uniform contract every manifold family implements.

A manifold object bundles, for one family and fixed dimensions:

* ``feasibility_residual``: Frobenius norm of the constraint violation;
* ``riemannian_gradient``: metric-dependent projection of the Euclidean
  gradient to the tangent space;
* ``enumerate_basis``: the fixed total order over coordinate labels;
* ``coordinate_derivative``: theta = <gradient, B_l> in the family's closed
  form, without materializing B_l;
* ``coordinate_retract``: the cheap structured retraction along B_l;
* ``full_retract``: the full-gradient retraction used by the RGD baseline;
* ``flop_parts``: the published (derivative, update) flop counts per label.

Derivative carriers.  For most families the object theta is paired with is
the ambient Euclidean gradient itself.  The factored-SPSD family pairs it
with the factored gradient (g + g.T) @ y, and the BW family with the
symmetrized gradient; ``derivative_carrier`` computes that object once so
optimizers that reuse a gradient across many inner steps (the linearized
variant) pay for it once per refresh.  ``coordinate_derivative_from_carrier``
then reads theta from the carrier and the current point.

``materialize_basis`` builds B_l densely; it exists only so tests can check
the closed forms against frobenius_inner(carrier, B_l) and is never on the
hot path.

All operations are pure unless ``inplace=True`` is passed to a retraction,
in which case the caller must hold the array exclusively.  With t = 0 the
retractions return the input bitwise unchanged.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from ..indices import CoordinateIndex
from ..linalg import frobenius_inner
from ..rng import SplitMix64

FAMILIES = (
    "stiefel",
    "grassmann",
    "hyperbolic",
    "symplectic",
    "doubly_stochastic",
    "multinomial",
    "spsd_factored",
    "spd_bures_wasserstein",
)


@dataclass(frozen=True)
class ManifoldDescriptor:
    """Family tag plus dimensions (and marginals for the transport polytope).

    dims is (n, p) for the rotation and factored families ((m, n) for the
    doubly stochastic family); the symplectic ambient is (2n, 2p).
    """

    family: str
    dims: tuple[int, int]
    mu: np.ndarray | None = field(default=None)
    nu: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        a, b = self.dims
        if a < 1 or b < 1:
            raise ValueError(f"dims must be positive, got {self.dims}")
        if self.family in ("stiefel", "grassmann", "hyperbolic", "symplectic",
                           "spsd_factored"):
            if b > a:
                raise ValueError(f"{self.family} needs p <= n, got {self.dims}")
        if self.family == "spd_bures_wasserstein" and a != b:
            raise ValueError("SPD descriptor needs square dims")
        if self.family == "multinomial" and b < 2:
            raise ValueError("multinomial needs at least two columns")
        if self.family == "doubly_stochastic":
            m, n = self.dims
            mu = np.full(m, 1.0 / m) if self.mu is None else np.asarray(self.mu, dtype=float)
            nu = np.full(n, 1.0 / n) if self.nu is None else np.asarray(self.nu, dtype=float)
            if mu.shape != (m,) or nu.shape != (n,):
                raise ValueError("marginal lengths must match dims")
            if np.any(mu <= 0.0) or np.any(nu <= 0.0):
                raise ValueError("marginals must be strictly positive")
            if abs(mu.sum() - 1.0) > 1e-12 or abs(nu.sum() - 1.0) > 1e-12:
                raise ValueError("marginals must sum to one")
            object.__setattr__(self, "mu", mu)
            object.__setattr__(self, "nu", nu)


@dataclass
class CoordinateStepReport:
    """What a coordinate step touched and what it cost under the flop model."""

    theta: float | None
    flops: int
    touched: str
    clamped: bool = False


class Manifold(ABC):
    family: str = ""

    def __init__(self, descriptor: ManifoldDescriptor):
        self.descriptor = descriptor

    @property
    @abstractmethod
    def ambient_shape(self) -> tuple[int, int]: ...

    @property
    def gradient_shape(self) -> tuple[int, int]:
        """Shape of the Euclidean gradient the objective supplies (same as
        the point shape, except the factored family whose objective is a
        function of Y Y' and hands over its n x n ambient gradient)."""
        return self.ambient_shape

    def check_shape(self, x: np.ndarray) -> None:
        if x.shape != self.ambient_shape:
            raise ValueError(
                f"{self.family} point must have shape {self.ambient_shape}, got {x.shape}"
            )

    @abstractmethod
    def feasibility_residual(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def riemannian_gradient(self, x: np.ndarray, g: np.ndarray) -> np.ndarray: ...

    def gradient_norm(self, x: np.ndarray, g: np.ndarray) -> float:
        """Metric norm of the Riemannian gradient (Frobenius by default)."""
        return float(np.linalg.norm(self.riemannian_gradient(x, g)))

    @abstractmethod
    def enumerate_basis(self) -> list[CoordinateIndex]: ...

    def index_count(self) -> int:
        return len(self.enumerate_basis())

    # -- coordinate derivatives ------------------------------------------

    def derivative_carrier(self, x: np.ndarray, g: np.ndarray):
        """The object theta is read from: the gradient itself for most
        families; the factored family bundles its Y-space gradient matrix.
        Optimizers that anchor a gradient across inner steps build the
        carrier once per refresh and keep it consistent via
        ``update_carrier``."""
        return g

    def carrier_flops(self) -> int:
        return 0

    def update_carrier(self, carrier, x: np.ndarray, l: CoordinateIndex, t: float) -> int:
        """Keep an anchored carrier consistent after a coordinate step at
        label l with parameter t; returns the flops spent (0 for families
        whose carrier does not involve the moving point)."""
        return 0

    @abstractmethod
    def coordinate_derivative_from_carrier(
        self, x: np.ndarray, d, l: CoordinateIndex
    ) -> float: ...

    def coordinate_derivative(self, x: np.ndarray, g: np.ndarray, l: CoordinateIndex) -> float:
        return self.coordinate_derivative_from_carrier(x, self.derivative_carrier(x, g), l)

    # -- retractions ------------------------------------------------------

    @abstractmethod
    def coordinate_retract(
        self, x: np.ndarray, l: CoordinateIndex, t: float, inplace: bool = False
    ) -> tuple[np.ndarray, CoordinateStepReport]: ...

    @abstractmethod
    def full_retract(self, x: np.ndarray, u: np.ndarray, t: float) -> np.ndarray: ...

    def renormalize(self, x: np.ndarray) -> np.ndarray:
        """Best-effort feasibility restoration for very long runs (updates are
        exactly feasible up to roundoff, so optimizers apply this only on an
        explicit cadence, off by default).  Families without a cheap
        projection return the input."""
        return x

    # -- cost model --------------------------------------------------------

    @abstractmethod
    def flop_parts(self, l: CoordinateIndex) -> tuple[int, int]:
        """(derivative flops, update flops) for one coordinate step."""

    def flop_cost(self, l: CoordinateIndex) -> int:
        d, u = self.flop_parts(l)
        return d + u

    def rgd_flops(self) -> int:
        """Published model cost of one full-gradient step (projection plus
        full retraction), excluding the gradient oracle."""
        raise NotImplementedError

    # A descent step retracts with parameter -step_scale * eta * theta; the
    # BW family uses 2.0 so its quadratic two-row update comes out in the
    # documented form.
    step_scale: float = 1.0

    # -- test utilities ----------------------------------------------------

    @abstractmethod
    def materialize_basis(self, x: np.ndarray, l: CoordinateIndex) -> np.ndarray: ...

    def reference_gradient(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Array whose Frobenius pairing with the materialized basis gives
        theta (the gradient in the point's own representation space)."""
        return g

    def coordinate_derivative_reference(
        self, x: np.ndarray, g: np.ndarray, l: CoordinateIndex
    ) -> float:
        return frobenius_inner(self.reference_gradient(x, g), self.materialize_basis(x, l))

    @abstractmethod
    def random_point(self, rng: SplitMix64) -> np.ndarray: ...

    def random_tangent(self, x: np.ndarray, rng: SplitMix64) -> np.ndarray:
        """Seeded tangent vector at x (projection of an ambient Gaussian)."""
        raise NotImplementedError


def coordinate_step(
    man: Manifold, x: np.ndarray, l: CoordinateIndex, eta: float, g: np.ndarray,
    inplace: bool = False,
) -> tuple[np.ndarray, CoordinateStepReport]:
    """One full descent step: theta from the closed form, then the cheap
    retraction with parameter -eta * theta (scaled per family convention).
    The report carries theta and the step's total flop cost."""
    theta = man.coordinate_derivative(x, g, l)
    dflops, _ = man.flop_parts(l)
    if abs(theta) < 1e-300:
        out = x if inplace else x.copy()
        return out, CoordinateStepReport(theta, dflops, "skipped (zero derivative)")
    out, report = man.coordinate_retract(x, l, -man.step_scale * eta * theta, inplace)
    report.theta = theta
    report.flops += dflops
    return out, report


def make_manifold(descriptor: ManifoldDescriptor) -> Manifold:
    from .doubly_stochastic import DoublyStochastic, Multinomial
    from .hyperbolic import Hyperbolic
    from .spsd import FactoredSpsd, SpdBuresWasserstein
    from .stiefel import Grassmann, Stiefel
    from .symplectic import Symplectic

    classes = {
        "stiefel": Stiefel,
        "grassmann": Grassmann,
        "hyperbolic": Hyperbolic,
        "symplectic": Symplectic,
        "doubly_stochastic": DoublyStochastic,
        "multinomial": Multinomial,
        "spsd_factored": FactoredSpsd,
        "spd_bures_wasserstein": SpdBuresWasserstein,
    }
    return classes[descriptor.family](descriptor)
