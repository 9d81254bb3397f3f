"""Dense kernels: structured two-row/two-column rotations and small
factorizations.

Matrices are C-contiguous float64 numpy arrays (row-major, matching the
two-row access pattern of the rotation updates).  Rotation kernels touch
exactly the two selected rows or columns and leave every other entry
bitwise unchanged.  Factorizations are thin wrappers over LAPACK with the
sign conventions fixed so results are deterministic.

Rotation conventions (side="left", rows i and j, angle theta):

    circular     row_i' =  cos(theta)*row_i + sin(theta)*row_j
                 row_j' = -sin(theta)*row_i + cos(theta)*row_j
    hyperbolic   row_i' = cosh(theta)*row_i + sinh(theta)*row_j
                 row_j' = sinh(theta)*row_i + cosh(theta)*row_j

side="right" applies the same recombination to columns i and j.
"""

from __future__ import annotations

import math

import numpy as np


class RankDeficiencyError(ValueError):
    """Raised when a factorization meets an (numerically) rank-deficient input."""


def _check_pair(i: int, j: int, limit: int) -> None:
    if not (0 <= i < j < limit):
        raise IndexError(f"need 0 <= i < j < {limit}, got ({i}, {j})")


def rotation_coefficients(theta: float, kind: str) -> tuple[float, float]:
    if kind == "circular":
        return math.cos(theta), math.sin(theta)
    if kind == "hyperbolic":
        return math.cosh(theta), math.sinh(theta)
    raise ValueError(f"unknown rotation kind {kind!r}")


def apply_rotation(
    x: np.ndarray,
    i: int,
    j: int,
    theta: float,
    side: str = "left",
    kind: str = "circular",
    inplace: bool = False,
) -> np.ndarray:
    """Mix rows (or columns) i and j of ``x`` by a plane rotation."""
    if side not in ("left", "right"):
        raise ValueError(f"unknown side {side!r}")
    _check_pair(i, j, x.shape[0] if side == "left" else x.shape[1])
    c, s = rotation_coefficients(theta, kind)
    out = x if inplace else x.copy()
    if side == "left":
        ri, rj = out[i], out[j]
        if kind == "circular":
            new_i = c * ri + s * rj
            new_j = c * rj - s * ri
        else:
            new_i = c * ri + s * rj
            new_j = s * ri + c * rj
        out[i] = new_i
        out[j] = new_j
    else:
        ci, cj = out[:, i], out[:, j]
        if kind == "circular":
            new_i = c * ci + s * cj
            new_j = c * cj - s * ci
        else:
            new_i = c * ci + s * cj
            new_j = s * ci + c * cj
        out[:, i] = new_i
        out[:, j] = new_j
    return out


def apply_disjoint_rotations(
    x: np.ndarray,
    batch: list[tuple],
    inplace: bool = False,
) -> np.ndarray:
    """Apply a batch of left rotations whose index pairs are pairwise disjoint.

    Disjoint rows commute exactly in floating point, so the result is bitwise
    identical to sequential application in any order; the batch is executed as
    one vectorized gather/scatter.  Batch entries are (i, j, theta) or
    (i, j, theta, kind); kind defaults to "circular".
    """
    out = x if inplace else x.copy()
    if not batch:
        return out
    seen: set[int] = set()
    for entry in batch:
        i, j = entry[0], entry[1]
        _check_pair(i, j, x.shape[0])
        if i in seen or j in seen:
            raise ValueError(f"rotation indices overlap at pair ({i}, {j})")
        seen.add(i)
        seen.add(j)
    for kind in ("circular", "hyperbolic"):
        group = [e for e in batch if (e[3] if len(e) > 3 else "circular") == kind]
        if not group:
            continue
        ii = np.array([e[0] for e in group], dtype=np.intp)
        jj = np.array([e[1] for e in group], dtype=np.intp)
        cs = np.array([rotation_coefficients(e[2], kind) for e in group])
        c = cs[:, 0:1]
        s = cs[:, 1:2]
        ri = out[ii]
        rj = out[jj]
        if kind == "circular":
            out[ii] = c * ri + s * rj
            out[jj] = c * rj - s * ri
        else:
            out[ii] = c * ri + s * rj
            out[jj] = s * ri + c * rj
    return out


def frobenius_inner(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.dot(a.reshape(-1), b.reshape(-1)))


def thin_qr(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with the R diagonal forced non-negative (unique for full rank)."""
    m, n = a.shape
    if m < n:
        raise ValueError("thin_qr needs rows >= cols")
    q, r = np.linalg.qr(a, mode="reduced")
    d = np.diagonal(r).copy()
    signs = np.where(d < 0.0, -1.0, 1.0)
    q = q * signs[np.newaxis, :]
    r = r * signs[:, np.newaxis]
    threshold = 1e-12 * np.linalg.norm(a)
    if np.any(np.abs(np.diagonal(r)) < threshold):
        raise RankDeficiencyError("input is numerically rank deficient")
    return q, r


def sym_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    if a.shape[0] != a.shape[1]:
        raise ValueError("sym_eig needs a square matrix")
    asym = np.linalg.norm(a - a.T)
    if asym > 1e-12 * max(1.0, np.linalg.norm(a)):
        raise ValueError(f"input is not symmetric (asymmetry {asym:.3e})")
    lam, v = np.linalg.eigh(a)
    return v, lam


def thin_svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD a = u @ diag(sigma) @ v.T with sigma descending >= 0.

    The zero matrix maps to (leading identity columns, zeros, leading
    identity columns) so the output is fully determined.
    """
    m, n = a.shape
    k = min(m, n)
    if not a.any():
        return np.eye(m, k), np.zeros(k), np.eye(n, k)
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    return u, sigma, vt.T
