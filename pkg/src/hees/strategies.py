"""Optimizer loops: full HE-ES with CSA, the elitist (1+4)-HE-ES and the (1+1)-ES.

Each stepper is a pure function ``(state, problem, rng, params) -> state``;
all randomness comes from the ``RngStream`` so runs replay exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .adaptation import DEFAULT_KAPPA_TRUST, ShapeMismatch, compute_g_full, update_exponents
from .diagnostics import RunTrace, TraceRecord, record_state
from .sampling import RngStream, sample_orthogonal

STOP_GAP = 1e-300


@dataclass(frozen=True, eq=False)
class StrategyState:
    """Search distribution ``N(mean, step_size^2 A A^T)`` plus CSA accumulators.

    ``f_mean`` caches f at the mean after the step that produced the state,
    ``success`` whether that step improved (elitist: the 1/5-rule branch).
    """

    mean: np.ndarray
    step_size: float
    factor: np.ndarray
    csa_path: np.ndarray | None = None
    csa_norm: float = 0.0
    iteration: int = 0
    f_mean: float = math.nan
    success: bool = False

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        A = np.asarray(self.factor, dtype=float)
        d = m.size
        if m.ndim != 1 or A.shape != (d, d):
            raise ShapeMismatch(f"mean {m.shape} and factor {A.shape} disagree")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        p = np.zeros(d) if self.csa_path is None else np.asarray(self.csa_path, dtype=float)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "factor", A)
        object.__setattr__(self, "csa_path", p)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def covariance(self) -> np.ndarray:
        return self.factor @ self.factor.T


def initial_state(mean, step_size: float, factor=None) -> StrategyState:
    m = np.asarray(mean, dtype=float)
    A = np.eye(m.size) if factor is None else np.array(factor, dtype=float)
    return StrategyState(m, float(step_size), A)


def _evaluate_rows(q, X: np.ndarray) -> np.ndarray:
    many = getattr(q, "evaluate_many", None)
    if many is not None:
        return many(X)
    return np.array([q(x) for x in X], dtype=float)


def chi_mean(d: int) -> float:
    """Approximate expected norm of a d-dimensional standard normal vector."""
    return math.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))


@dataclass(frozen=True)
class HeEsParams:
    lambda_tilde: int
    c_s: float
    d_s: float
    weights: tuple[float, ...]
    kappa_trust: float = DEFAULT_KAPPA_TRUST
    eta_A: float = 1.0
    # None: recomputed each iteration from the selected mirrored weights
    mu_eff_mirrored: float | None = None
    chi_d: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights)
        if self.lambda_tilde < 1 or w.size != 2 * self.lambda_tilde:
            raise ValueError("weights must have 2 * lambda_tilde entries")
        if np.any(w < 0) or np.any(np.diff(w) > 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("weights must be non-negative, non-increasing and sum to one")
        if not 0 < self.c_s < 1 or self.d_s <= 0:
            raise ValueError("c_s must lie in (0, 1) and d_s must be positive")
        if not 0 < self.eta_A <= 1 or self.kappa_trust <= 1:
            raise ValueError("eta_A must lie in (0, 1] and kappa_trust must exceed 1")

    @classmethod
    def default(cls, d: int, **overrides) -> "HeEsParams":
        lam = overrides.pop("lambda_tilde", None) or 2 + int(math.floor(1.5 * math.log(d)))
        ranks = np.arange(1, lam + 1)
        w = math.log(lam + 0.5) - np.log(ranks)
        w /= w.sum()
        mu_eff = 1.0 / float(w @ w)
        c_s = (mu_eff + 2.0) / (d + mu_eff + 5.0)
        d_s = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (d + 1.0)) - 1.0) + c_s
        base = dict(
            lambda_tilde=lam,
            c_s=c_s,
            d_s=d_s,
            weights=tuple(np.concatenate([w, np.zeros(lam)])),
            chi_d=chi_mean(d),
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class ElitistParams:
    c_sigma: float
    eta_A: float = 1.0
    kappa_trust: float = DEFAULT_KAPPA_TRUST

    def __post_init__(self):
        if not self.c_sigma > 1:
            raise ValueError("c_sigma must exceed 1")
        if not 0 < self.eta_A <= 1 or self.kappa_trust <= 1:
            raise ValueError("eta_A must lie in (0, 1] and kappa_trust must exceed 1")

    @classmethod
    def default(cls, d: int, **overrides) -> "ElitistParams":
        return cls(**{"c_sigma": math.exp(1.0 / d), **overrides})


def he_es_step(state: StrategyState, q, rng: RngStream, p: HeEsParams) -> StrategyState:
    d = state.dim
    lam = p.lambda_tilde
    n_blocks = -(-lam // d)
    blocks = [sample_orthogonal(rng, d) for _ in range(n_blocks)]
    b = np.concatenate([blk.directions for blk in blocks])[:lam]

    m, sigma, A = state.mean, state.step_size, state.factor
    steps = sigma * (b @ A.T)
    X = np.empty((2 * lam + 1, d))
    X[0] = m
    X[1::2] = m + steps
    X[2::2] = m - steps
    f = _evaluate_rows(q, X)
    f_m, f_off = f[0], f[1:]
    G = compute_g_full(blocks, f_m, f_off.reshape(lam, 2), sigma, lam, p.kappa_trust, p.eta_A)

    # offspring order x1+, x1-, x2+, ...; ties keep that order
    order = np.argsort(f_off, kind="stable")
    w = np.empty(2 * lam)
    w[order] = p.weights
    new_mean = w @ X[1:]

    w_pm = w.reshape(lam, 2)
    diff = w_pm[:, 0] - w_pm[:, 1]
    c_s = p.c_s
    csa_norm = (1.0 - c_s) ** 2 * state.csa_norm + c_s * (2.0 - c_s)
    ss = float(diff @ diff)
    mu_mirr = p.mu_eff_mirrored if p.mu_eff_mirrored is not None else (1.0 / ss if ss > 0 else 0.0)
    path = (1.0 - c_s) * state.csa_path + math.sqrt(c_s * (2.0 - c_s) * mu_mirr) * (diff @ b)
    chi_d = p.chi_d or chi_mean(d)
    new_sigma = sigma * math.exp(c_s / p.d_s * (math.sqrt(path @ path) / chi_d - math.sqrt(csa_norm)))

    f_new = float(_evaluate_rows(q, new_mean[None, :])[0])
    return StrategyState(
        new_mean, new_sigma, A @ G, path, csa_norm, state.iteration + 1, f_new, bool(f_new < f_m)
    )


def _elitist_step(state: StrategyState, q, rng: RngStream, p: ElitistParams, adapt: bool) -> StrategyState:
    d = state.dim
    block = sample_orthogonal(rng, d, count=2 if d >= 2 else 1)
    m, sigma, A = state.mean, state.step_size, state.factor
    Ab = block.directions @ A.T
    steps = sigma * Ab
    if adapt:
        X = np.empty((5, d))
        X[0] = m
        X[1::2] = m + steps
        X[2::2] = m - steps
    else:
        X = np.empty((2, d))
        X[0] = m
        X[1] = m + steps[0]
    f = _evaluate_rows(q, X).tolist()
    f_m = f[0]

    new_A = A
    if adapt:
        f1p, f1m, f2p, f2m = f[1], f[2], f[3], f[4]
        n1, n2 = block.norms
        s2 = sigma * sigma
        h = ((f1p + f1m - 2.0 * f_m) / (s2 * n1 * n1), (f2p + f2m - 2.0 * f_m) / (s2 * n2 * n2))
        gamma = update_exponents(h, p.kappa_trust, p.eta_A)
        if gamma is not None:
            # A G with G = I + sum (gamma_i - 1) b_i b_i^T / |b_i|^2, in rank-2 form
            coef = np.array([(gamma[0] - 1.0) / (n1 * n1), (gamma[1] - 1.0) / (n2 * n2)])
            new_A = A + (Ab.T * coef) @ block.directions

    if f[1] <= f_m:
        return StrategyState(X[1], sigma * p.c_sigma, new_A, None, 0.0, state.iteration + 1, float(f[1]), True)
    return StrategyState(m, sigma * p.c_sigma ** -0.25, new_A, None, 0.0, state.iteration + 1, float(f_m), False)


def one_plus_four_step(state: StrategyState, q, rng: RngStream, p: ElitistParams) -> StrategyState:
    """One iteration of the (1+4)-HE-ES.

    Samples a full orthogonal block and uses its first two directions: all
    four mirrored offspring feed the matrix update, only ``x1+`` competes
    with the parent.
    """
    if state.dim < 2:
        raise ShapeMismatch("(1+4)-HE-ES needs d >= 2")
    return _elitist_step(state, q, rng, p, adapt=True)


def one_plus_one_step(state: StrategyState, q, rng: RngStream, p: ElitistParams) -> StrategyState:
    """(1+4)-HE-ES with matrix adaptation switched off; A is never touched.

    Draws the same random block per iteration as :func:`one_plus_four_step`.
    Start it from ``A = I`` (``run`` enforces this).
    """
    return _elitist_step(state, q, rng, p, adapt=False)


STEPPERS: dict[str, Callable] = {
    "he_es": he_es_step,
    "one_plus_four": one_plus_four_step,
    "one_plus_one": one_plus_one_step,
}


def default_params(strategy: str, d: int, **overrides):
    if strategy == "he_es":
        return HeEsParams.default(d, **overrides)
    if strategy in ("one_plus_four", "one_plus_one"):
        return ElitistParams.default(d, **overrides)
    raise ValueError(f"unknown strategy {strategy!r}")


def run(
    strategy: str,
    q,
    initial: StrategyState,
    rng: RngStream,
    budget: int,
    params=None,
    recorder: Callable[..., TraceRecord] | None = record_state,
    seed: int | None = None,
    keep_states: bool = False,
    trace: RunTrace | None = None,
) -> RunTrace:
    """Iterate ``strategy`` for ``budget`` steps and record one row per step.

    Stops early once ``f(m) - f*`` drops below 1e-300. ``recorder`` maps
    ``(q, mean, sigma, A, t, success)`` to a record; pass None to skip
    recording (the final state is still available via ``trace.final``).
    Records go into ``trace`` when given, so a caller keeps the partial
    trace if a step raises.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    step = STEPPERS[strategy]
    if strategy == "one_plus_one" and not np.array_equal(initial.factor, np.eye(initial.dim)):
        raise ValueError("(1+1)-ES runs with the identity transformation")
    if params is None:
        params = default_params(strategy, initial.dim)
    if trace is None:
        trace = RunTrace(seed=seed)
    state = initial
    states = [] if keep_states else None
    for _ in range(budget):
        state = step(state, q, rng, params)
        if states is not None:
            states.append(state)
        if recorder is not None:
            trace.append(recorder(q, state.mean, state.step_size, state.factor, state.iteration, state.success))
        if state.f_mean - getattr(q, "optimal_value", 0.0) < STOP_GAP:
            break
    trace.final = state
    trace.states = states
    return trace
