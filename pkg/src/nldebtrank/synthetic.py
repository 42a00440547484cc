"""Synthetic balance-sheet generator standing in for proprietary bank data."""

from __future__ import annotations

import numpy as np

from .balance import BankingSystem
from .errors import DataError


def generate_synthetic(
    n: int = 183,
    seed: int = 0,
    size_dispersion: float = 1.0,
    interbank_share: float = 0.135,
    equity_ratio: float = 0.05,
    noise: float = 0.1,
    median_assets: float = 1e4,
    year_label: str | None = "synthetic",
) -> BankingSystem:
    """Draw a banking system with log-normal bank sizes.

    Interbank assets and equity are fixed shares of total assets, each
    perturbed by an independent log-normal factor of scale ``noise``.
    Interbank liabilities are the same share of total liabilities, rescaled
    so aggregate lending equals aggregate borrowing.
    """
    if n < 2:
        raise DataError(f"need at least 2 banks, got {n}")
    for name, val in (("interbank_share", interbank_share), ("equity_ratio", equity_ratio)):
        if not 0 < val < 1:
            raise DataError(f"{name} must lie in (0, 1), got {val!r}")
    if not size_dispersion >= 0:
        raise DataError(f"size_dispersion must be non-negative, got {size_dispersion!r}")

    rng = np.random.default_rng(seed)
    assets = median_assets * np.exp(size_dispersion * rng.standard_normal(n))
    jitter = lambda: np.exp(noise * rng.standard_normal(n) - 0.5 * noise**2)  # noqa: E731
    ib_assets = np.minimum(interbank_share * assets * jitter(), assets)
    equity = np.minimum(equity_ratio * assets * jitter(), 0.5 * assets)
    liabilities = assets - equity
    ib_liab = interbank_share * liabilities * jitter()
    ib_liab *= ib_assets.sum() / ib_liab.sum()
    ib_liab = np.minimum(ib_liab, liabilities)
    return BankingSystem.from_arrays(
        assets, liabilities, ib_assets, ib_liab, year_label=year_label
    )
