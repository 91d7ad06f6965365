"""Curvature estimates along mirrored directions and the multiplicative update G.

The update rescales the transformation factor along each sampled direction
so that the curvatures seen through it are equalized, with the determinant
held fixed.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .sampling import OrthogonalSampleBlock

DEFAULT_KAPPA_TRUST = 1e6


class NonPositiveCurvature(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


def estimate_curvature(f_m: float, f_plus: float, f_minus: float, sigma: float, b_norm: float) -> float:
    """Second difference of ``f`` along a mirrored pair, per squared unit step."""
    if sigma <= 0 or b_norm <= 0:
        raise ValueError("sigma and b_norm must be positive")
    return (f_plus + f_minus - 2.0 * f_m) / (sigma * sigma * b_norm * b_norm)


def update_exponents(h, kappa_trust: float = DEFAULT_KAPPA_TRUST, eta_A: float = 1.0) -> list[float] | None:
    """Multiplicative factors ``exp(q)`` for the used directions.

    Returns ``None`` when no curvature is positive (no update). Curvatures
    below ``max(h) / kappa_trust`` are raised to that floor before the
    log-mean is removed, which keeps the product of factors at one.
    """
    # plain floats: lambda_tilde is small and this sits in the inner loop
    h = [float(v) for v in h]
    hmax = max(h)
    if not hmax > 0:
        return None
    floor = hmax / kappa_trust
    q = [math.log(v if v > floor else floor) for v in h]
    mean = sum(q) / len(q)
    scale = -0.5 * eta_A
    return [math.exp(scale * (v - mean)) for v in q]


def compute_g_pair(h1: float, h2: float, u1, u2) -> np.ndarray:
    """Dense ``G = I + (g1 - 1) u1 u1^T + (g2 - 1) u2 u2^T`` with g1 = (h2/h1)^(1/4)."""
    if h1 <= 0 or h2 <= 0:
        raise NonPositiveCurvature(f"curvatures must be positive, got {h1}, {h2}")
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    g1 = (h2 / h1) ** 0.25
    g2 = (h1 / h2) ** 0.25
    return np.eye(u1.size) + (g1 - 1.0) * np.outer(u1, u1) + (g2 - 1.0) * np.outer(u2, u2)


def compute_g_full(
    blocks: Sequence[OrthogonalSampleBlock],
    f_m: float,
    f_values,
    sigma: float,
    lambda_tilde: int,
    kappa_trust: float = DEFAULT_KAPPA_TRUST,
    eta_A: float = 1.0,
) -> np.ndarray:
    """Update matrix from ``B`` blocks of mirrored samples.

    ``f_values`` has shape ``(lambda_tilde, 2)`` with columns
    ``(f(m + sigma A b), f(m - sigma A b))``, ordered block by block. Only
    the first ``lambda_tilde`` directions carry information; the remaining
    directions of the last block get a neutral factor of one.
    """
    B = len(blocks)
    if B == 0:
        raise ShapeMismatch("need at least one block")
    d = blocks[0].dim
    if any(blk.dim != d or blk.directions.shape[0] != d for blk in blocks):
        raise ShapeMismatch("every block must hold d directions of dimension d")
    f_values = np.asarray(f_values, dtype=float)
    if not 1 <= lambda_tilde <= B * d or B != -(-lambda_tilde // d):
        raise ShapeMismatch(f"{B} blocks do not match lambda_tilde={lambda_tilde} in d={d}")
    if f_values.shape != (lambda_tilde, 2):
        raise ShapeMismatch(f"f_values has shape {f_values.shape}, expected ({lambda_tilde}, 2)")

    dirs = np.concatenate([blk.directions for blk in blocks])
    norms = np.concatenate([blk.norms for blk in blocks])
    used = norms[:lambda_tilde]
    h = (f_values[:, 0] + f_values[:, 1] - 2.0 * f_m) / (sigma * sigma * used * used)
    factors = update_exponents(h, kappa_trust, eta_A)
    if factors is None:
        return np.eye(d)
    weights = np.ones(B * d)
    weights[:lambda_tilde] = factors
    weights /= norms * norms
    return (dirs.T * weights) @ dirs / B


def predicted_trace_reduction(h1: float, h2: float) -> float:
    """Drop of ``tr(C)`` under one pair update: ``(sqrt(h1) - sqrt(h2))**2``."""
    if h1 <= 0 or h2 <= 0:
        raise NonPositiveCurvature(f"curvatures must be positive, got {h1}, {h2}")
    return (np.sqrt(h1) - np.sqrt(h2)) ** 2
