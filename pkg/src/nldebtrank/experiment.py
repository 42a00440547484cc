"""Ensemble stress tests: networks x shock realisations, and (alpha, x_shock) sweeps."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import dynamics
from .balance import BankingSystem, build_leverage
from .dynamics import PropagationRule, Trajectory
from .errors import ConfigError, DataError, DebtRankError
from .reconstruction import (
    ReconstructionSample,
    calibrate_density,
    derive_seed,
    reconstruct_sample,
)

logger = logging.getLogger(__name__)

# salt separating shock-set seeds from network seeds
_SHOCK_STREAM = 0x5EED


@dataclass(frozen=True)
class ScenarioConfig:
    p: float = 0.05
    n_networks: int = 100
    n_shock_realizations: int = 10
    p_shock: float = 0.05
    x_shock: float = 0.005
    rule: PropagationRule = field(default_factory=PropagationRule.linear)
    base_seed: int = 0
    tol: float = 1e-10
    t_max: int = 10000

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ConfigError(f"p must lie in (0, 1], got {self.p!r}")
        if not 0 < self.p_shock <= 1:
            raise ConfigError(f"p_shock must lie in (0, 1], got {self.p_shock!r}")
        if not 0 <= self.x_shock <= 1:
            raise ConfigError(f"x_shock must lie in [0, 1], got {self.x_shock!r}")
        if self.n_networks < 1 or self.n_shock_realizations < 1:
            raise ConfigError("n_networks and n_shock_realizations must be >= 1")
        if not self.tol > 0 or self.t_max < 1:
            raise ConfigError("tol must be positive and t_max >= 1")


def sample_shock_set(n: int, p_shock: float, rng: np.random.Generator) -> np.ndarray:
    """Choose exactly ``round(p_shock * n)`` distinct banks (all of them when ``p_shock == 1``).

    Rounding is half-to-even.
    """
    if not 0 < p_shock <= 1:
        raise ConfigError(f"p_shock must lie in (0, 1], got {p_shock!r}")
    if p_shock == 1:
        return np.arange(n)
    k = int(round(p_shock * n))
    if k == 0:
        raise ConfigError(f"p_shock={p_shock} shocks no bank out of {n} (empty shock set)")
    return np.sort(rng.choice(n, size=k, replace=False))


def shock_seed(base_seed: int, network: int, realization: int) -> int:
    return derive_seed(base_seed, _SHOCK_STREAM, network, realization)


def _mean_stderr(x: np.ndarray, axis=0):
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    if n < 2:
        return mean, np.zeros_like(mean)
    err = x.std(axis=axis, ddof=1) / math.sqrt(n)
    # identical samples: report an exact zero rather than rounding noise
    return mean, np.where(np.ptp(x, axis=axis) == 0, 0.0, err)


def _pad(series: Sequence[np.ndarray], length: int) -> np.ndarray:
    out = np.empty((len(series), length))
    for k, s in enumerate(series):
        out[k, : len(s)] = s
        out[k, len(s):] = s[-1]
    return out


@dataclass
class EnsembleResult:
    """Aggregate statistics over ``n_runs`` contagion runs.

    Time series are padded to the longest run by holding final values.
    Standard errors are sample standard deviations over ``sqrt(n_runs)``.
    """

    mean_H_inf: float
    stderr_H_inf: float
    mean_H_initial: float
    mean_S_t: np.ndarray
    stderr_S_t: np.ndarray
    mean_D_t: np.ndarray
    stderr_D_t: np.ndarray
    mean_H_t: np.ndarray
    stderr_H_t: np.ndarray
    n_runs: int
    n_nonconverged: int
    n_failed: int = 0
    H_inf: np.ndarray = field(default=None, repr=False)
    steps: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_trajectories(cls, trajs: Sequence[Trajectory], n_failed: int = 0) -> "EnsembleResult":
        if not trajs:
            raise DebtRankError("ensemble has no successful runs")
        length = max(len(t) for t in trajs)
        s_mean, s_err = _mean_stderr(_pad([t.stressed for t in trajs], length))
        d_mean, d_err = _mean_stderr(_pad([t.defaulted for t in trajs], length))
        h_mean, h_err = _mean_stderr(_pad([t.loss for t in trajs], length))
        h_inf = np.array([t.H_inf for t in trajs])
        m, e = _mean_stderr(h_inf)
        return cls(
            float(m), float(e), float(np.mean([t.H_initial for t in trajs])),
            s_mean, s_err, d_mean, d_err, h_mean, h_err,
            n_runs=len(trajs),
            n_nonconverged=sum(not t.converged for t in trajs),
            n_failed=n_failed,
            H_inf=h_inf,
            steps=np.array([t.steps for t in trajs]),
        )


@dataclass
class Ensemble:
    """Reconstructed networks plus the fixed shock sets drawn for each.

    Sharing one ``Ensemble`` across parameter cells gives common random
    numbers: every cell sees the same networks and the same shocked banks.
    """

    system: BankingSystem
    samples: list[Optional[ReconstructionSample]]
    leverages: list
    shock_sets: list[list[np.ndarray]]
    failures: dict[int, str]

    @property
    def n_failed_networks(self) -> int:
        return len(self.failures)


def build_ensemble(system: BankingSystem, cfg: ScenarioConfig) -> Ensemble:
    """Reconstruct ``cfg.n_networks`` networks and draw their shock sets.

    A network whose reconstruction fails is recorded in ``failures`` and
    skipped; it is not replaced.
    """
    calib = calibrate_density(system, cfg.p)
    samples, leverages, shocks, failures = [], [], [], {}
    for k in range(cfg.n_networks):
        try:
            smp = reconstruct_sample(system, calib, derive_seed(cfg.base_seed, k))
        except DataError as exc:
            logger.warning("network %d: reconstruction failed: %s", k, exc)
            failures[k] = str(exc)
            samples.append(None)
            leverages.append(None)
            shocks.append([])
            continue
        samples.append(smp)
        leverages.append(build_leverage(system, smp.weights))
        shocks.append([
            sample_shock_set(
                system.n, cfg.p_shock, np.random.default_rng(shock_seed(cfg.base_seed, k, r))
            )
            for r in range(cfg.n_shock_realizations)
        ])
    return Ensemble(system, samples, leverages, shocks, failures)


def run_trajectories(ens: Ensemble, x_shock: float, rule: PropagationRule,
                     tol: float = 1e-10, t_max: int = 10000) -> list[Trajectory]:
    """One trajectory per (network, shock set), in fixed network-major order."""
    trajs = []
    for lev, sets in zip(ens.leverages, ens.shock_sets):
        if lev is None:
            continue
        for shocked in sets:
            trajs.append(dynamics.run(ens.system, lev, shocked, x_shock, rule, tol, t_max))
    return trajs


def run_ensemble(
    system: BankingSystem, cfg: ScenarioConfig, ensemble: Optional[Ensemble] = None
) -> EnsembleResult:
    ens = ensemble if ensemble is not None else build_ensemble(system, cfg)
    trajs = run_trajectories(ens, cfg.x_shock, cfg.rule, cfg.tol, cfg.t_max)
    return EnsembleResult.from_trajectories(
        trajs, n_failed=ens.n_failed_networks * cfg.n_shock_realizations
    )


@dataclass
class SweepCell:
    alpha: float
    x_shock: float
    result: EnsembleResult

    @property
    def mean_H_inf(self) -> float:
        return self.result.mean_H_inf

    @property
    def stderr_H_inf(self) -> float:
        return self.result.stderr_H_inf


@dataclass
class SweepResult:
    alpha_grid: list[float]
    x_shock_grid: list[float]
    cells: list[SweepCell]
    p_shock: float
    p: float

    def surface(self) -> tuple[np.ndarray, np.ndarray]:
        """``(mean, stderr)`` arrays indexed ``[alpha, x_shock]``."""
        shape = (len(self.alpha_grid), len(self.x_shock_grid))
        mean = np.array([c.mean_H_inf for c in self.cells]).reshape(shape)
        err = np.array([c.stderr_H_inf for c in self.cells]).reshape(shape)
        return mean, err


def sweep_H_surface(
    system: BankingSystem,
    cfg_template: ScenarioConfig,
    alpha_grid: Sequence[float],
    x_shock_grid: Sequence[float],
    ensemble: Optional[Ensemble] = None,
) -> SweepResult:
    """Steady-state loss over an (alpha, x_shock) grid with the non-linear rule.

    All cells reuse one reconstruction ensemble and one set of shocked banks.
    Cells are ordered alpha-major.
    """
    if not len(alpha_grid) or not len(x_shock_grid):
        raise ConfigError("sweep grids must be non-empty")
    ens = ensemble if ensemble is not None else build_ensemble(system, cfg_template)
    cells = []
    for alpha in alpha_grid:
        for x in x_shock_grid:
            cfg = replace(cfg_template, x_shock=float(x), rule=PropagationRule.nonlinear(alpha))
            cells.append(SweepCell(float(alpha), float(x), run_ensemble(system, cfg, ens)))
    return SweepResult([float(a) for a in alpha_grid], [float(x) for x in x_shock_grid],
                       cells, cfg_template.p_shock, cfg_template.p)


def total_shock_normalizer(
    p_shock: float, x_shock_range: tuple[float, float], reference_p_shock: float = 1.0
) -> tuple[float, float]:
    """Rescale an x_shock interval so ``p_shock * x_shock`` spans the reference total shock."""
    if not 0 < p_shock <= 1:
        raise ConfigError(f"p_shock must lie in (0, 1], got {p_shock!r}")
    lo, hi = x_shock_range
    f = reference_p_shock / p_shock
    return lo * f, hi * f
