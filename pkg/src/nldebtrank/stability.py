"""Spectral stability of the leverage matrix.

Near ``h = 0`` the non-linear map is linearised by ``lam * exp(-alpha)``, so
small shocks die out when ``alpha > ln(lambda_max)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .balance import LeverageMatrix

MARGIN = 1e-9


@dataclass(frozen=True)
class StabilityReport:
    lambda_max: float
    iterations: int
    residual: float
    converged: bool

    @property
    def alpha_critical(self) -> float:
        """``ln(lambda_max)``; ``-inf`` when the matrix is nilpotent."""
        return math.log(self.lambda_max) if self.lambda_max > 0 else -math.inf

    def is_stable_at(self, alpha: float) -> bool:
        return stability_assessment(self.lambda_max, alpha) == "stable"


def _power_iteration(m: np.ndarray, shift: float, tol: float, max_iter: int):
    n = m.shape[0]
    v = np.ones(n)
    lam = 0.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        y = m @ v + shift * v
        lam = float(v @ y) / float(v @ v) - shift
        residual = float(np.max(np.abs(y - (lam + shift) * v)) / np.max(np.abs(v)))
        if residual < tol:
            return lam, it, residual, True
        v = y / np.max(np.abs(y))
    return lam, max_iter, residual, False


def spectral_radius(
    leverage: Union[LeverageMatrix, np.ndarray],
    tol: float = 1e-10,
    max_iter: int = 100000,
    shift: float = 1.0,
) -> StabilityReport:
    """Perron root of a non-negative matrix by shifted power iteration.

    The matrix is split into strongly connected components first: the
    spectral radius is the largest over the irreducible diagonal blocks, a
    single node with zero diagonal contributes exactly 0, and each remaining
    block is primitive after the shift, so power iteration from the all-ones
    vector converges geometrically.
    """
    m = leverage.lam if isinstance(leverage, LeverageMatrix) else np.asarray(leverage, float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"need a square matrix, got shape {m.shape}")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite and non-negative")
    n_comp, labels = connected_components(m != 0, directed=True, connection="strong")
    best, total_it, worst_res, ok = 0.0, 0, 0.0, True
    for k in range(n_comp):
        idx = np.flatnonzero(labels == k)
        block = m[np.ix_(idx, idx)]
        if len(idx) == 1:
            lam, it, res, conv = float(block[0, 0]), 0, 0.0, True
        else:
            lam, it, res, conv = _power_iteration(block, shift, tol, max_iter)
        total_it += it
        worst_res = max(worst_res, res)
        ok = ok and conv
        best = max(best, lam)
    return StabilityReport(max(best, 0.0), total_it, worst_res, ok)


def stability_assessment(lambda_max: float, alpha: float, margin: float = MARGIN) -> str:
    """Classify the non-linear dynamics at ``alpha`` as stable, unstable or marginal."""
    if lambda_max < 0 or alpha < 0:
        raise ValueError("lambda_max and alpha must be non-negative")
    if lambda_max == 0:
        return "stable"
    gap = alpha - math.log(lambda_max)
    if abs(gap) <= margin:
        return "marginal"
    return "stable" if gap > 0 else "unstable"
