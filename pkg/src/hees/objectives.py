"""Convex quadratic objectives, affine pullbacks and the sublevel-set measure f_mu."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_square, as_vector, gram_schmidt, sym_eigvalsh
from .sampling import RngStream


class DimensionMismatch(ValueError):
    pass


class SingularMap(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """``f(x) = 1/2 (x - x*)^T H (x - x*) + f*`` with symmetric positive definite H."""

    hessian: np.ndarray
    optimum: np.ndarray
    optimal_value: float = 0.0
    _logdet: float = field(init=False, repr=False)

    def __post_init__(self):
        H = as_square(self.hessian)
        if sym_eigvalsh(H)[0] <= 0:
            raise ValueError("hessian is not positive definite")
        H = 0.5 * (H + H.T)
        x = as_vector(self.optimum, H.shape[0])
        H.setflags(write=False)
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "hessian", H)
        object.__setattr__(self, "optimum", x)
        object.__setattr__(self, "optimal_value", float(self.optimal_value))
        object.__setattr__(self, "_logdet", float(np.linalg.slogdet(H)[1]))

    @property
    def dim(self) -> int:
        return self.hessian.shape[0]

    @property
    def logdet(self) -> float:
        return self._logdet

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        """Row-wise evaluation of a ``(n, d)`` array."""
        D = X - self.optimum
        return 0.5 * np.einsum("ij,ij->i", D @ self.hessian, D) + self.optimal_value


def evaluate(q: QuadraticProblem, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (q.dim,):
        raise DimensionMismatch(f"point has shape {x.shape}, problem has dimension {q.dim}")
    y = x - q.optimum
    return 0.5 * float(y @ q.hessian @ y) + q.optimal_value


def sphere(d: int) -> QuadraticProblem:
    return QuadraticProblem(np.eye(d), np.zeros(d))


def random_rotation(rng: RngStream, d: int) -> np.ndarray:
    while True:
        try:
            return gram_schmidt(rng.normals(d * d).reshape(d, d))
        except ValueError:
            continue


def geometric_spectrum(d: int, condition: float, normalize_det: bool) -> np.ndarray:
    exps = np.linspace(0.0, 1.0, d)
    if normalize_det:
        exps = exps - 0.5
    return condition ** exps


def make_ellipsoid(
    d: int,
    condition: float,
    normalize_det: bool = False,
    rng: RngStream | None = None,
    rotated: bool = False,
) -> QuadraticProblem:
    """Ellipsoid with eigenvalues spaced geometrically over ``condition``.

    The smallest eigenvalue is 1, or the spectrum is centered so that
    ``det(H) = 1`` when ``normalize_det`` is set. A rotated instance is
    conjugated by a random orthogonal matrix drawn from ``rng``.
    """
    if d < 2:
        raise ValueError("ellipsoid needs d >= 2")
    if condition < 1:
        raise ValueError("condition must be >= 1")
    lam = geometric_spectrum(d, condition, normalize_det)
    if rotated:
        if rng is None:
            raise ValueError("a rotated ellipsoid needs an rng")
        Q = random_rotation(rng, d)
        H = (Q.T * lam) @ Q
    else:
        H = np.diag(lam)
    return QuadraticProblem(H, np.zeros(d))


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``g(x) = M x + b``."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        M = as_square(self.matrix)
        b = as_vector(self.offset, M.shape[0])
        if abs(np.linalg.det(M)) <= 1e-12:
            raise SingularMap("affine map is not invertible")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "offset", b)

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=float) + self.offset

    def inverse(self, y):
        return np.linalg.solve(self.matrix, np.asarray(y, dtype=float) - self.offset)


def affine_pullback(q: QuadraticProblem, g: AffineMap) -> QuadraticProblem:
    """The problem ``f o g^{-1}``: Hessian ``M^-T H M^-1``, optimum ``g(x*)``."""
    Minv = np.linalg.inv(g.matrix)
    H = Minv.T @ q.hessian @ Minv
    return QuadraticProblem(0.5 * (H + H.T), g(q.optimum), q.optimal_value)


def log_unit_ball_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0)


def f_mu(q: QuadraticProblem, m) -> float:
    """d-th root of the volume of ``{x : f(x) < f(m)}``.

    The sublevel set is an ellipsoid of volume
    ``V_d (2 (f(m) - f*))^(d/2) / sqrt(det H)``.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (q.dim,):
        raise DimensionMismatch(f"point has shape {m.shape}, problem has dimension {q.dim}")
    y = m - q.optimum
    return f_mu_from_gap(0.5 * float(y @ q.hessian @ y), q.dim, q.logdet)


def f_mu_from_gap(gap: float, d: int, logdet_h: float) -> float:
    if gap <= 0:
        return 0.0
    return math.exp(log_unit_ball_volume(d) / d - logdet_h / (2 * d)) * math.sqrt(2.0 * gap)
