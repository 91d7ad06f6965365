"""Run traces and the measurements taken on them.

Covariance here means the sampling covariance ``A A^T`` of ``m + sigma A b``;
its eigenvalues relative to H are those of ``A^T H A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .linalg import as_square, sym_eig
from .objectives import QuadraticProblem, f_mu_from_gap


class NotSPD(ValueError):
    pass


class EmptyWindow(ValueError):
    pass


class UnknownColumn(KeyError):
    pass


CSV_COLUMNS = ("f_m", "sigma", "det_C", "tr_normalized", "kappa_HC", "f_mu", "success")


class TraceRecord(NamedTuple):
    t: int
    f_m: float
    sigma: float
    det_C: float
    tr_normalized: float
    kappa_HC: float
    f_mu: float
    success: bool
    # tr_normalized * d - d, kept separately because it underflows 1 + x
    delta: float


@dataclass
class RunTrace:
    seed: int | None = None
    records: list[TraceRecord] = field(default_factory=list)
    error: str | None = None
    final: object = None
    states: list | None = None

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.t != self.records[-1].t + 1:
            raise ValueError("trace iterations must increase by one")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        if name not in TraceRecord._fields:
            raise UnknownColumn(name)
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def _log_spectrum_distance(lam: np.ndarray) -> tuple[float, float]:
    """(delta, kappa) from the positive eigenvalues of ``H C``.

    delta = tr(HC)/det(HC)^(1/d) - d, evaluated as sum(mu - 1 - log mu) over
    det-normalized eigenvalues mu so that it stays accurate near zero.
    """
    loglam = np.log(lam)
    logmu = loglam - loglam.sum() / lam.size
    delta = float(np.sum(np.expm1(logmu) - logmu))
    return max(delta, 0.0), float(lam[-1] / lam[0])


def record_state(q: QuadraticProblem, mean, step_size: float, factor, t: int, success: bool) -> TraceRecord:
    """Diagnostics for one iteration, ``C = A A^T``."""
    A = factor
    d = q.dim
    y = mean - q.optimum
    gap = 0.5 * float(y @ q.hessian @ y)
    M = A.T @ q.hessian @ A
    lam = np.linalg.eigvalsh(M)
    if lam[0] <= 0:
        delta, kappa = math.inf, math.inf
    else:
        delta, kappa = _log_spectrum_distance(lam)
    det_c = np.linalg.det(A) ** 2
    return TraceRecord(
        t=t,
        f_m=gap + q.optimal_value,
        sigma=float(step_size),
        det_C=float(det_c),
        tr_normalized=1.0 + delta / d,
        kappa_HC=kappa,
        f_mu=f_mu_from_gap(gap, d, q.logdet),
        success=bool(success),
        delta=delta,
    )


def record_progress(q: QuadraticProblem, mean, step_size: float, factor, t: int, success: bool) -> TraceRecord:
    """Cheap recorder: f, sigma and f_mu only; matrix columns are NaN."""
    y = mean - q.optimum
    gap = 0.5 * float(y @ q.hessian @ y)
    nan = math.nan
    return TraceRecord(t, gap + q.optimal_value, float(step_size), nan, nan, nan,
                       f_mu_from_gap(gap, q.dim, q.logdet), bool(success), nan)


def _spd_eigs(C, name: str = "matrix") -> np.ndarray:
    lam = sym_eig(C)
    if lam[0] <= 0:
        raise NotSPD(f"{name} is not positive definite")
    return lam


def condition_number(C) -> float:
    lam = _spd_eigs(C)
    return float(lam[-1] / lam[0])


def condition_number_2x2(C) -> float:
    """Closed form from trace and determinant of a 2x2 SPD matrix."""
    C = as_square(C)
    if C.shape != (2, 2):
        raise ValueError("closed form needs a 2x2 matrix")
    tr = C[0, 0] + C[1, 1]
    det = C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0]
    if tr <= 0 or det <= 0:
        raise NotSPD("matrix is not positive definite")
    x = 4.0 * det / (tr * tr)
    s = math.sqrt(max(0.0, 1.0 - x))
    # (1 + s) / (1 - s) with 1 - s = x / (1 + s) to avoid cancellation
    return (1.0 + s) ** 2 / x


def _relative_eigs(C, H) -> np.ndarray:
    C = as_square(C)
    H = as_square(H)
    if C.shape != H.shape:
        raise ValueError("C and H must have the same shape")
    _spd_eigs(C, "C")
    _spd_eigs(H, "H")
    L = np.linalg.cholesky(0.5 * (H + H.T))
    S = L.T @ C @ L
    lam = sym_eig(0.5 * (S + S.T))
    if lam[0] <= 0:
        raise NotSPD("H C has a non-positive eigenvalue")
    return lam


def normalized_trace_distance(C, H) -> float:
    """``tr(C/det(C)^(1/d) H/det(H)^(1/d)) - d``; zero iff C is a multiple of H^-1."""
    delta, _ = _log_spectrum_distance(_relative_eigs(C, H))
    return delta


def alpha_target(C0, H) -> float:
    """Limit scale: ``(det(C0) det(H))^(1/d)``."""
    lc = _spd_eigs(C0, "C0")
    lh = _spd_eigs(H, "H")
    d = lc.size
    return float(math.exp((np.sum(np.log(lc)) + np.sum(np.log(lh))) / d))


def log_progress_rate(trace: RunTrace, window: tuple[int, int] | None = None) -> float:
    """Least-squares slope of ``log f_mu`` against ``t`` over ``records[window]``.

    Defaults to the second half of the trace. Records with ``f_mu == 0``
    are skipped.
    """
    n = len(trace)
    start, stop = window if window is not None else (n // 2, n)
    recs = trace.records[start:stop]
    t = np.array([r.t for r in recs if r.f_mu > 0], dtype=float)
    y = np.array([math.log(r.f_mu) for r in recs if r.f_mu > 0])
    if t.size < 2:
        raise EmptyWindow(f"window {start}:{stop} has fewer than two usable records")
    return linear_fit(t, y)[0]


def linear_fit(x, y) -> tuple[float, float, float]:
    """Ordinary least squares; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    if sxx == 0:
        raise EmptyWindow("need at least two distinct abscissae")
    slope = (xc @ yc) / sxx
    syy = yc @ yc
    r2 = 1.0 if syy == 0 else (slope * slope * sxx) / syy
    return float(slope), float(y.mean() - slope * x.mean()), float(r2)


def first_hitting_time(series: Sequence[float], target: float) -> int | None:
    """Smallest index whose value is below ``target``; None if never reached."""
    for i, v in enumerate(series):
        if v < target:
            return i
    return None
