"""Small dense linear algebra: orthonormalization, symmetric eigenvalues, determinants."""

from __future__ import annotations

import math
from operator import mul

import numpy as np

GS_DEPENDENCE_TOL = 1e-10
SYMMETRY_TOL = 1e-10
JACOBI_MAX_SWEEPS = 50
JACOBI_TOL = 1e-10


class DegenerateInput(ValueError):
    """Raised when Gram-Schmidt meets a numerically dependent vector."""


class NotSymmetric(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


def as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def as_vector(x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError(f"expected a non-empty vector, got shape {x.shape}")
    if dim is not None and x.size != dim:
        raise ValueError(f"expected dimension {dim}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def gram_schmidt(vectors) -> np.ndarray:
    """Orthonormalize the rows of ``vectors`` in order.

    Each vector is projected off its already-orthonormalized predecessors
    twice (the second pass restores orthogonality lost to rounding), so the
    i-th output only depends on inputs ``0..i``. Returns a ``(k, d)`` array.

    Raises :class:`DegenerateInput` when a residual drops below
    ``1e-10`` times the norm of the vector it came from.
    """
    V = np.array(vectors, dtype=float, ndmin=2)
    k, d = V.shape
    if k > d:
        raise DegenerateInput(f"{k} vectors cannot be independent in dimension {d}")
    if not np.all(np.isfinite(V)):
        raise DegenerateInput("input has non-finite entries")
    if k * k * d <= _SMALL_GS_WORK:
        return np.array(_gram_schmidt_lists(V.tolist()))
    Q = np.empty((k, d))
    for i in range(k):
        v = V[i]
        norm0 = math.sqrt(v @ v)
        if i:
            P = Q[:i]
            v = v - (P @ v) @ P
            v = v - (P @ v) @ P
        r = math.sqrt(v @ v)
        _check_residual(i, r, norm0)
        Q[i] = v / r
    return Q


# below this k*k*d, list arithmetic beats numpy call overhead
_SMALL_GS_WORK = 200


def _gram_schmidt_lists(rows: list[list[float]]) -> list[list[float]]:
    out: list[list[float]] = []
    for i, v in enumerate(rows):
        norm0 = math.sqrt(sum(map(mul, v, v)))
        for _ in range(2):
            for qv in out:
                c = sum(map(mul, qv, v))
                v = [a - c * b for a, b in zip(v, qv)]
        r = math.sqrt(sum(map(mul, v, v)))
        _check_residual(i, r, norm0)
        out.append([a / r for a in v])
    return out


def _check_residual(i: int, r: float, norm0: float) -> None:
    if norm0 == 0.0:
        raise DegenerateInput(f"vector {i} is zero")
    if r < GS_DEPENDENCE_TOL * norm0:
        raise DegenerateInput(f"vector {i} is numerically dependent on its predecessors")


def _check_symmetric(S: np.ndarray) -> None:
    scale = np.max(np.abs(S))
    if scale == 0.0:
        return
    if np.max(np.abs(S - S.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")


def sym_eig(S) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations."""
    S = as_square(S)
    _check_symmetric(S)
    a = 0.5 * (S + S.T)
    n = a.shape[0]
    fro = np.sqrt(np.sum(a * a))
    if n == 1 or fro == 0.0:
        return np.sort(np.diag(a).copy())
    target = JACOBI_TOL * fro
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)
        if off <= target:
            return np.sort(np.diag(a).copy())
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0.0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)
    if off <= target:
        return np.sort(np.diag(a).copy())
    raise NoConvergence(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")


def determinant(M) -> float:
    # LAPACK getrf: LU with partial pivoting; exactly 0.0 for singular input
    return float(np.linalg.det(as_square(M)))


def sym_eigvalsh(S) -> np.ndarray:
    """LAPACK-backed eigenvalues for hot loops; same contract as :func:`sym_eig`."""
    S = as_square(S)
    _check_symmetric(S)
    return np.linalg.eigvalsh(0.5 * (S + S.T))
