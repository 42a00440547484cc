"""Non-linear DebtRank contagion dynamics.

The state is the vector of relative equity losses ``h``. Each step
re-marks every interbank claim by the change in the borrower's default
probability::

    h_i(t+1) = min(1, h_i(t) + sum_j lam_ij * (pd_j(t) - pd_j(t-1)))

with ``pd = h * exp(alpha * (h - 1))`` for the non-linear rule, ``pd = h`` for
linear DebtRank and a hard default threshold for Furfine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .balance import BankingSystem, LeverageMatrix
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class PropagationRule:
    """How a bank's relative equity loss maps to its default probability.

    Use the constructors :meth:`linear`, :meth:`furfine` and
    :meth:`nonlinear`.
    """

    variant: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.variant not in ("linear", "furfine", "nonlinear"):
            raise ConfigError(f"unknown propagation rule {self.variant!r}")
        if self.variant == "nonlinear" and not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be finite and >= 0, got {self.alpha!r}")

    @classmethod
    def linear(cls) -> "PropagationRule":
        return cls("linear")

    @classmethod
    def furfine(cls) -> "PropagationRule":
        return cls("furfine")

    @classmethod
    def nonlinear(cls, alpha: float) -> "PropagationRule":
        return cls("nonlinear", float(alpha))

    @classmethod
    def parse(cls, name: str, alpha: Optional[float] = None) -> "PropagationRule":
        name = name.lower()
        if name == "nonlinear":
            if alpha is None:
                raise ConfigError("the nonlinear rule needs alpha")
            return cls.nonlinear(alpha)
        return cls(name)

    def __str__(self) -> str:
        return f"nonlinear(alpha={self.alpha:g})" if self.variant == "nonlinear" else self.variant


def default_probability(h, rule: PropagationRule):
    """Default probability for relative equity loss ``h`` (scalar or array) in [0, 1]."""
    h = np.asarray(h, dtype=float)
    if rule.variant == "linear":
        out = h.copy()
    elif rule.variant == "furfine":
        # h never exceeds 1, so >= is equality with the clamped value
        out = (h >= 1.0).astype(float)
    else:
        out = h * np.exp(rule.alpha * (h - 1.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ContagionState:
    h: np.ndarray
    pd_prev: np.ndarray
    t: int = 1


def apply_initial_shock(
    system: BankingSystem,
    leverage: LeverageMatrix,
    shocked: Iterable[int],
    x_shock: float,
) -> ContagionState:
    """Devalue the external assets of ``shocked`` banks by the fraction ``x_shock``.

    Returns the state at ``t = 1``. Banks that start with non-positive
    equity are set to ``h = 1`` and their default counts as already
    transmitted (``pd_prev = 1``), so it is not charged to their lenders.
    """
    if not 0.0 <= x_shock <= 1.0:
        raise ConfigError(f"x_shock must lie in [0, 1], got {x_shock!r}")
    n = system.n
    if leverage.n != n:
        raise DataError("leverage matrix does not match the banking system")
    idx = np.fromiter(shocked, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DataError(f"shocked bank index out of range [0, {n})")
    h = np.zeros(n)
    valid = leverage.valid
    equity = system.equity
    ext = system.external_assets
    sel = idx[valid[idx]]
    h[sel] = np.minimum(1.0, x_shock * ext[sel] / equity[sel])
    h[~valid] = 1.0
    pd_prev = np.where(valid, 0.0, 1.0)
    return ContagionState(h, pd_prev, 1)


def step(state: ContagionState, leverage: LeverageMatrix, rule: PropagationRule) -> ContagionState:
    pd_now = default_probability(state.h, rule)
    h = np.minimum(1.0, state.h + leverage.lam @ (pd_now - state.pd_prev))
    # absorbing clamp; guards against rounding in the difference
    h[state.h >= 1.0] = 1.0
    return ContagionState(h, pd_now, state.t + 1)


@dataclass
class Trajectory:
    """Per-step aggregate metrics of one contagion run.

    ``stressed``, ``defaulted`` and ``loss`` are S(t), D(t) and H(t) for
    ``t = 1 .. t_final``; ``h_final`` is the last loss vector.
    """

    t: np.ndarray
    stressed: np.ndarray
    defaulted: np.ndarray
    loss: np.ndarray
    h_final: np.ndarray
    converged: bool
    steps: int
    h_history: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def H_inf(self) -> float:
        return float(self.loss[-1])

    @property
    def S_inf(self) -> float:
        return float(self.stressed[-1])

    @property
    def D_inf(self) -> float:
        return float(self.defaulted[-1])

    @property
    def H_initial(self) -> float:
        return float(self.loss[0])

    def __len__(self) -> int:
        return len(self.t)


def evolve(
    state: ContagionState,
    leverage: LeverageMatrix,
    rule: PropagationRule,
    equity_weights,
    tol: float = 1e-10,
    t_max: int = 10000,
    keep_history: bool = False,
) -> Trajectory:
    """Iterate :func:`step` from ``state`` until the sup-norm change drops below ``tol``.

    ``t_max`` bounds the final time index. Running out of steps is not an
    error; the trajectory comes back with ``converged=False``.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol!r}")
    if t_max < 1:
        raise ConfigError(f"t_max must be >= 1, got {t_max!r}")
    w = np.asarray(equity_weights, float)
    n = len(state.h)
    hs, records = [], []

    def record(s):
        h = s.h
        records.append((s.t, np.count_nonzero((h > 0) & (h < 1)) / n,
                        np.count_nonzero(h == 1.0) / n, float(w @ h)))
        if keep_history:
            hs.append(h.copy())

    record(state)
    converged = False
    steps = 0
    while state.t < t_max:
        new = step(state, leverage, rule)
        steps += 1
        delta = np.max(np.abs(new.h - state.h)) if n else 0.0
        state = new
        record(state)
        if delta < tol:
            converged = True
            break
    t, s, d, hh = (np.array(col) for col in zip(*records))
    return Trajectory(
        t.astype(int), s, d, hh, state.h, converged, steps,
        np.array(hs) if keep_history else None,
    )


def simulate(
    h_initial,
    leverage: Union[LeverageMatrix, np.ndarray],
    rule: PropagationRule,
    equity_weights=None,
    tol: float = 1e-10,
    t_max: int = 10000,
    keep_history: bool = False,
) -> Trajectory:
    """Run the dynamics from an arbitrary initial loss vector ``h(1)``.

    ``equity_weights`` defaults to uniform weights. Entries equal to 1 are
    treated as fresh defaults that propagate on the first step.
    """
    if not isinstance(leverage, LeverageMatrix):
        leverage = LeverageMatrix.from_matrix(leverage)
    h = np.array(h_initial, dtype=float)
    if h.shape != (leverage.n,) or np.any((h < 0) | (h > 1)):
        raise DataError("initial losses must be a vector in [0, 1] matching the network size")
    if equity_weights is None:
        equity_weights = np.full(leverage.n, 1.0 / leverage.n)
    state = ContagionState(h, np.zeros(leverage.n), 1)
    return evolve(state, leverage, rule, equity_weights, tol, t_max, keep_history)


def run(
    system: BankingSystem,
    leverage: LeverageMatrix,
    shocked: Iterable[int],
    x_shock: float,
    rule: PropagationRule,
    tol: float = 1e-10,
    t_max: int = 10000,
    keep_history: bool = False,
) -> Trajectory:
    """Shock ``shocked`` banks by ``x_shock`` and propagate to the steady state."""
    state = apply_initial_shock(system, leverage, shocked, x_shock)
    return evolve(state, leverage, rule, system.equity_weights(), tol, t_max, keep_history)
