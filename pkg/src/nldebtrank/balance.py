"""Balance sheets, exposure networks and the interbank leverage matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from .errors import DataError

_FIELDS = ("total_assets", "total_liabilities", "interbank_assets", "interbank_liabilities")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BalanceSheet:
    """Aggregate balance sheet of a single bank.

    Liabilities exclude equity, so ``equity = total_assets - total_liabilities``.
    """

    bank_id: Hashable
    total_assets: float
    total_liabilities: float
    interbank_assets: float
    interbank_liabilities: float

    def problems(self) -> list[str]:
        """Return human-readable constraint violations (empty when valid)."""
        out = []
        for name in _FIELDS:
            value = getattr(self, name)
            if not np.isfinite(value):
                out.append(f"{name}: not a finite number ({value!r})")
            elif value < 0:
                out.append(f"{name}: negative amount ({value!r})")
        if self.interbank_assets > self.total_assets:
            out.append(
                f"interbank_assets: {self.interbank_assets!r} exceeds "
                f"total_assets {self.total_assets!r}"
            )
        if self.interbank_liabilities > self.total_liabilities:
            out.append(
                f"interbank_liabilities: {self.interbank_liabilities!r} exceeds "
                f"total_liabilities {self.total_liabilities!r}"
            )
        return out

    def check(self) -> None:
        issues = self.problems()
        if issues:
            raise DataError(f"bank {self.bank_id!r}: inconsistent record; " + "; ".join(issues))

    @property
    def external_assets(self) -> float:
        return self.total_assets - self.interbank_assets

    @property
    def external_liabilities(self) -> float:
        return self.total_liabilities - self.interbank_liabilities

    @property
    def equity(self) -> float:
        return self.total_assets - self.total_liabilities


def derive_externals(sheet: BalanceSheet) -> tuple[float, float, float]:
    """Return ``(external_assets, external_liabilities, equity)`` for one bank.

    Raises :class:`DataError` when the record violates the interbank <= total
    constraints.
    """
    sheet.check()
    return sheet.external_assets, sheet.external_liabilities, sheet.equity


@dataclass(frozen=True)
class BankingSystem:
    """An ordered collection of at least two banks with unique ids."""

    banks: tuple[BalanceSheet, ...]
    year_label: Optional[str] = None

    def __post_init__(self):
        banks = tuple(self.banks)
        object.__setattr__(self, "banks", banks)
        if len(banks) < 2:
            raise DataError(f"a banking system needs at least 2 banks, got {len(banks)}")
        seen = set()
        for b in banks:
            if b.bank_id in seen:
                raise DataError(f"duplicate bank_id {b.bank_id!r}")
            seen.add(b.bank_id)
            b.check()
        for name in _FIELDS:
            object.__setattr__(self, f"_{name}", _frozen([getattr(b, name) for b in banks]))

    @classmethod
    def from_arrays(
        cls,
        total_assets: Sequence[float],
        total_liabilities: Sequence[float],
        interbank_assets: Sequence[float],
        interbank_liabilities: Sequence[float],
        bank_ids: Optional[Sequence[Hashable]] = None,
        year_label: Optional[str] = None,
    ) -> "BankingSystem":
        n = len(total_assets)
        if bank_ids is None:
            bank_ids = [f"B{i:03d}" for i in range(n)]
        cols = (total_assets, total_liabilities, interbank_assets, interbank_liabilities)
        if any(len(c) != n for c in cols) or len(bank_ids) != n:
            raise DataError("balance-sheet columns have different lengths")
        banks = tuple(
            BalanceSheet(bid, float(a), float(l), float(ai), float(li))
            for bid, a, l, ai, li in zip(bank_ids, *cols)
        )
        return cls(banks, year_label)

    def __len__(self) -> int:
        return len(self.banks)

    @property
    def n(self) -> int:
        return len(self.banks)

    @property
    def bank_ids(self) -> list:
        return [b.bank_id for b in self.banks]

    @property
    def total_assets(self) -> np.ndarray:
        return self._total_assets

    @property
    def total_liabilities(self) -> np.ndarray:
        return self._total_liabilities

    @property
    def interbank_assets(self) -> np.ndarray:
        return self._interbank_assets

    @property
    def interbank_liabilities(self) -> np.ndarray:
        return self._interbank_liabilities

    @property
    def external_assets(self) -> np.ndarray:
        return self._total_assets - self._interbank_assets

    @property
    def external_liabilities(self) -> np.ndarray:
        return self._total_liabilities - self._interbank_liabilities

    @property
    def equity(self) -> np.ndarray:
        return self._total_assets - self._total_liabilities

    @property
    def defaulted_at_start(self) -> np.ndarray:
        """Boolean mask of banks with non-positive initial equity."""
        return self.equity <= 0

    def equity_weights(self) -> np.ndarray:
        """``E_i(0) / sum_j E_j(0)``, the weights of the aggregate loss."""
        e = self.equity
        total = e.sum()
        if not total > 0:
            raise DataError(f"aggregate equity must be positive, got {total!r}")
        return e / total


@dataclass(frozen=True)
class ExposureNetwork:
    """Bilateral interbank loans; ``weights[i, j]`` is lent by ``i`` to ``j``.

    ``recovery`` holds per-loan recovery rates; the contagion dynamics only
    implements the zero-recovery case so the field is carried as metadata.
    """

    weights: np.ndarray
    recovery: Optional[np.ndarray] = None
    tol: float = 1e-8

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DataError(f"exposure matrix must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("exposure weights must be finite and non-negative")
        if np.any(np.diag(w) != 0):
            raise DataError("exposure matrix must have a zero diagonal (no self-loans)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.recovery is None:
            r = np.zeros_like(w)
        else:
            r = np.array(self.recovery, dtype=float)
            if r.shape != w.shape:
                raise DataError("recovery matrix shape does not match weights")
            if np.any((r < 0) | (r > 1)):
                raise DataError("recovery rates must lie in [0, 1]")
        r.setflags(write=False)
        object.__setattr__(self, "recovery", r)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def margin_residual(self, row_targets, col_targets) -> float:
        """Largest relative deviation of row/column sums from the targets."""
        return margin_residual(self.weights, row_targets, col_targets)

    def edges(self):
        """Iterate over ``(i, j, weight)`` for every positive entry, row-major."""
        ii, jj = np.nonzero(self.weights)
        for i, j in zip(ii, jj):
            yield int(i), int(j), float(self.weights[i, j])


def margin_residual(weights, row_targets, col_targets, eps: float = 1e-300) -> float:
    w = np.asarray(weights)
    r = np.asarray(row_targets, dtype=float)
    c = np.asarray(col_targets, dtype=float)
    row_err = np.abs(w.sum(axis=1) - r) / np.maximum(r, eps)
    col_err = np.abs(w.sum(axis=0) - c) / np.maximum(c, eps)
    # zero target with zero sum: 0/eps == 0
    return float(max(row_err.max(initial=0.0), col_err.max(initial=0.0)))


@dataclass(frozen=True)
class LeverageMatrix:
    """``lam[i, j] = A_ij / E_i`` for banks with positive equity, zero rows otherwise."""

    lam: np.ndarray
    valid: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    @property
    def valid_rows(self) -> set[int]:
        return {int(i) for i in np.flatnonzero(self.valid)}

    @property
    def defaulted(self) -> set[int]:
        return {int(i) for i in np.flatnonzero(~self.valid)}

    @classmethod
    def from_matrix(cls, lam, valid=None) -> "LeverageMatrix":
        """Wrap a raw propagator, e.g. for hand-built test instances."""
        lam = np.array(lam, dtype=float)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise DataError(f"leverage matrix must be square, got shape {lam.shape}")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise DataError("leverage matrix must be finite and non-negative")
        if np.any(np.diag(lam) != 0):
            raise DataError("leverage matrix must have a zero diagonal")
        valid = np.ones(lam.shape[0], bool) if valid is None else np.array(valid, bool)
        lam[~valid] = 0.0
        lam.setflags(write=False)
        valid.setflags(write=False)
        return cls(lam, valid)


def build_leverage(system: BankingSystem, network: ExposureNetwork) -> LeverageMatrix:
    if network.n != system.n:
        raise DataError(
            f"network has {network.n} banks but the balance-sheet system has {system.n}"
        )
    equity = system.equity
    valid = equity > 0
    lam = np.zeros_like(network.weights)
    lam[valid] = network.weights[valid] / equity[valid, None]
    return LeverageMatrix.from_matrix(lam, valid)
