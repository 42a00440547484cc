"""Interbank network reconstruction from aggregate lending/borrowing totals.

Topology is drawn from a fitness model calibrated to a target connectivity;
weights are then fitted to the aggregate margins with RAS (iterative
proportional fitting).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_array
from scipy.sparse.csgraph import maximum_flow

from .balance import BankingSystem, ExposureNetwork, margin_residual
from .errors import DataError, InfeasibleError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DensityCalibration:
    """Fitness coupling ``z`` reproducing a target expected edge count.

    ``z == inf`` means every pair with positive fitness product is linked
    with certainty (the target equals the number of such pairs).
    """

    z: float
    target_connectivity: float
    achieved_expected_edges: float
    lender_fitness: np.ndarray
    borrower_fitness: np.ndarray

    @property
    def n(self) -> int:
        return len(self.lender_fitness)

    def probabilities(self) -> np.ndarray:
        return edge_probabilities(self.z, self.lender_fitness, self.borrower_fitness)


def _fitness_products(a, l) -> np.ndarray:
    m = np.outer(np.asarray(a, float), np.asarray(l, float))
    np.fill_diagonal(m, 0.0)
    return m


def edge_probabilities(z: float, a, l) -> np.ndarray:
    """``p_ij = z a_i l_j / (1 + z a_i l_j)`` off the diagonal."""
    m = _fitness_products(a, l)
    if np.isinf(z):
        return (m > 0).astype(float)
    zm = z * m
    return zm / (1.0 + zm)


def expected_edges(z: float, a, l) -> float:
    return float(edge_probabilities(z, a, l).sum())


def calibrate_density(
    system: BankingSystem, p: float, rel_tol: float = 1e-10, max_iter: int = 2000
) -> DensityCalibration:
    """Solve for the fitness coupling giving ``p * N * (N - 1)`` expected edges.

    Monotone bisection on ``log z``; the bracket is grown geometrically from
    ``z = 1``.
    """
    if not 0 < p <= 1:
        raise DataError(f"connectivity p must lie in (0, 1], got {p!r}")
    a = np.asarray(system.interbank_assets, float)
    l = np.asarray(system.interbank_liabilities, float)
    if not (np.any(a > 0) and np.any(l > 0)):
        raise InfeasibleError("no bank lends or no bank borrows on the interbank market")
    n = len(a)
    m = _fitness_products(a, l)
    target = p * n * (n - 1)
    n_pairs = int(np.count_nonzero(m))
    if target > n_pairs * (1 + 1e-12):
        raise InfeasibleError(
            f"connectivity {p} needs {target:.1f} expected edges but only {n_pairs} "
            f"pairs have positive fitness; maximum achievable density is "
            f"{n_pairs / (n * (n - 1)):.6g}"
        )
    if target >= n_pairs * (1 - 1e-12):
        return DensityCalibration(np.inf, p, float(n_pairs), a, l)

    def f(z):
        zm = z * m
        return float((zm / (1.0 + zm)).sum())

    lo = hi = 1.0
    if f(1.0) < target:
        while f(hi) < target:
            lo, hi = hi, hi * 10.0
    else:
        while f(lo) >= target:
            lo, hi = lo / 10.0, lo
    for _ in range(max_iter):
        mid = np.sqrt(lo * hi)
        val = f(mid)
        if abs(val - target) <= rel_tol * target:
            return DensityCalibration(float(mid), p, val, a, l)
        if val < target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    z = np.sqrt(lo * hi)
    logger.warning("density calibration stopped at bracket limit (z=%g)", z)
    return DensityCalibration(float(z), p, f(z), a, l)


def sample_topology(calib: DensityCalibration, rng: np.random.Generator) -> np.ndarray:
    """Draw each off-diagonal edge independently with its fitness probability."""
    prob = calib.probabilities()
    adj = rng.random(prob.shape) < prob
    np.fill_diagonal(adj, False)
    return adj


def _draw_nonempty(prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli vector with success probabilities ``prob``, conditioned on >= 1 success.

    Exact: draw the index of the first success, then the tail independently.
    """
    prob = np.clip(prob, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        log_fail = np.log1p(-prob)
    survive = np.exp(np.concatenate(([0.0], np.cumsum(log_fail)[:-1])))
    first = prob * survive
    total = first.sum()
    if not total > 0:
        raise InfeasibleError("cannot condition on a non-empty draw: all probabilities are zero")
    k = rng.choice(len(prob), p=first / total)
    out = np.zeros(len(prob), bool)
    out[k] = True
    out[k + 1:] = rng.random(len(prob) - k - 1) < prob[k + 1:]
    return out


def condition_on_support(
    adjacency: np.ndarray,
    prob: np.ndarray,
    row_targets,
    col_targets,
    rng: np.random.Generator,
) -> np.ndarray:
    """Redraw empty rows/columns of banks with positive targets.

    Each such row (column) is replaced by a draw from the fitness model
    conditioned on having at least one edge. Rows are handled first; the
    column pass only adds edges, so it cannot empty a row again.
    """
    adj = adjacency.copy()
    rt = np.asarray(row_targets, float)
    ct = np.asarray(col_targets, float)
    for i in np.flatnonzero((rt > 0) & ~adj.any(axis=1)):
        adj[i] = _draw_nonempty(prob[i], rng)
    for j in np.flatnonzero((ct > 0) & ~adj.any(axis=0)):
        adj[:, j] = _draw_nonempty(prob[:, j], rng)
    np.fill_diagonal(adj, False)
    return adj


@dataclass(frozen=True)
class RasResult:
    network: ExposureNetwork
    residual: float
    iterations: int
    converged: bool


def balance_weights(
    adjacency,
    row_targets,
    col_targets,
    tol: float = 1e-8,
    max_iter: int = 10000,
    bank_ids: Optional[Sequence] = None,
) -> RasResult:
    """Fit non-negative weights on ``adjacency`` to the row/column targets via RAS.

    Column targets are first rescaled so that total lending equals total
    borrowing. Iteration starts from the gravity seed ``r_i * c_j`` on present
    edges and stops once the largest relative margin error is below ``tol``.
    Hitting ``max_iter`` is not an error: the result carries
    ``converged=False`` and the achieved residual.
    """
    adj = np.asarray(adjacency, bool)
    n = adj.shape[0]
    if adj.shape != (n, n):
        raise DataError(f"adjacency must be square, got {adj.shape}")
    if adj.diagonal().any():
        raise DataError("adjacency must have a zero diagonal")
    r = np.asarray(row_targets, float)
    c = np.asarray(col_targets, float)
    if r.shape != (n,) or c.shape != (n,):
        raise DataError("target vectors must match the adjacency size")
    if np.any(r < 0) or np.any(c < 0):
        raise DataError("margin targets must be non-negative")
    ids = list(bank_ids) if bank_ids is not None else list(range(n))

    for i in np.flatnonzero((r > 0) & ~adj.any(axis=1)):
        raise InfeasibleError(f"bank {ids[i]!r} must lend {r[i]!r} but has no out-edges")
    for j in np.flatnonzero((c > 0) & ~adj.any(axis=0)):
        raise InfeasibleError(f"bank {ids[j]!r} must borrow {c[j]!r} but has no in-edges")

    if r.sum() == 0:
        # nothing to lend: borrowing rescales to zero as well
        return RasResult(ExposureNetwork(np.zeros((n, n)), tol=tol), 0.0, 0, True)
    if c.sum() == 0:
        raise InfeasibleError("positive total lending but zero total borrowing")
    c = c * (r.sum() / c.sum())

    # work on the edge list; dense matrices only at the boundary
    ii, jj = np.nonzero(adj)
    w = r[ii] * c[jj]
    safe_r = np.maximum(r, 1e-300)
    safe_c = np.maximum(c, 1e-300)

    def residual_of(w):
        rs = np.bincount(ii, w, minlength=n)
        cs = np.bincount(jj, w, minlength=n)
        return max(np.max(np.abs(rs - r) / safe_r), np.max(np.abs(cs - c) / safe_c))

    residual = residual_of(w)
    it = 0
    while residual >= tol and it < max_iter:
        rs = np.bincount(ii, w, minlength=n)
        w *= np.divide(r, rs, out=np.zeros(n), where=rs > 0)[ii]
        cs = np.bincount(jj, w, minlength=n)
        w *= np.divide(c, cs, out=np.zeros(n), where=cs > 0)[jj]
        it += 1
        residual = residual_of(w)
    converged = bool(residual < tol)
    if not converged:
        logger.debug("RAS hit max_iter=%d with residual %.3e", max_iter, residual)
    dense = np.zeros((n, n))
    dense[ii, jj] = w
    w = dense
    return RasResult(ExposureNetwork(w, tol=tol), residual, it, converged)


@dataclass(frozen=True)
class ReconstructionSample:
    adjacency: np.ndarray
    weights: ExposureNetwork
    seed: int
    ras_residual: float
    ras_converged: bool = True

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self.adjacency))


def derive_seed(*keys: int) -> int:
    """Deterministic hash-combine of integer keys into a 64-bit seed."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def margins_attainable(adjacency, row_targets, col_targets) -> bool:
    """Max-flow test: can some non-negative weighting of the edges meet the margins?

    Column targets are rescaled to the row total first, as in
    :func:`balance_weights`. Capacities are scaled to integers, so the test
    is exact up to a rounding slack of roughly ``2n / 2**30`` of total volume.
    """
    adj = np.asarray(adjacency, bool)
    r = np.asarray(row_targets, float)
    c = np.asarray(col_targets, float)
    total = r.sum()
    if total == 0:
        return True
    if c.sum() == 0:
        return False
    c = c * (total / c.sum())
    n = len(r)
    # csgraph.maximum_flow silently mishandles capacities beyond int32
    unit = 2**30
    scale = unit / total
    r_int = np.floor(r * scale).astype(np.int64)
    c_int = np.floor(c * scale).astype(np.int64)
    ii, jj = np.nonzero(adj)
    # nodes: 0 source, 1..n lenders, n+1..2n borrowers, 2n+1 sink
    src = np.concatenate([np.zeros(n, np.int64), ii + 1, n + 1 + np.arange(n)])
    dst = np.concatenate([1 + np.arange(n), n + 1 + jj, np.full(n, 2 * n + 1)])
    cap = np.concatenate([r_int, np.full(len(ii), unit, np.int64), c_int])
    graph = coo_array((cap, (src, dst)), shape=(2 * n + 2, 2 * n + 2)).tocsr()
    flow = maximum_flow(graph, 0, 2 * n + 1).flow_value
    need = min(r_int.sum(), c_int.sum())
    return flow >= need - 2 * n


def reconstruct_sample(
    system: BankingSystem,
    calib: DensityCalibration,
    seed: int,
    tol: float = 1e-8,
    max_iter: int = 10000,
    conditioned: bool = True,
    max_attempts: int = 100,
) -> ReconstructionSample:
    """Draw one network and fit its weights.

    With ``conditioned`` (the default) the draw is conditioned on the margins
    being reproducible: empty rows/columns of active banks are redrawn, and a
    topology that fails the max-flow test or does not converge under RAS is
    discarded and redrawn, up to ``max_attempts`` times. The returned
    ``seed`` is the one that produced the accepted draw.
    """
    a, l = system.interbank_assets, system.interbank_liabilities
    prob = calib.probabilities()
    attempts = max_attempts if conditioned else 1
    last = None
    for attempt in range(attempts):
        s = seed if attempt == 0 else derive_seed(seed, attempt)
        rng = np.random.default_rng(s)
        adj = sample_topology(calib, rng)
        if conditioned:
            adj = condition_on_support(adj, prob, a, l, rng)
            if not margins_attainable(adj, a, l):
                continue
        ras = balance_weights(adj, a, l, tol=tol, max_iter=max_iter, bank_ids=system.bank_ids)
        last = (adj, ras, s)
        if ras.converged or not conditioned:
            break
    if last is None:
        raise InfeasibleError(
            f"no topology with attainable margins in {max_attempts} draws "
            f"at connectivity {calib.target_connectivity}"
        )
    adj, ras, s = last
    if conditioned and not ras.converged:
        raise InfeasibleError(
            f"RAS did not converge in {max_attempts} draws (last residual {ras.residual:.3e})"
        )
    adj.setflags(write=False)
    return ReconstructionSample(adj, ras.network, s, ras.residual, ras.converged)


def reconstruct_ensemble(
    system: BankingSystem,
    p: float,
    count: int,
    base_seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 10000,
    conditioned: bool = True,
) -> list[ReconstructionSample]:
    """Reconstruct ``count`` networks at connectivity ``p``.

    One density calibration is shared by all samples; sample ``k`` is seeded
    with ``derive_seed(base_seed, k)`` (redraws fold an attempt counter into
    that seed).
    """
    if count < 1:
        raise DataError(f"count must be >= 1, got {count}")
    calib = calibrate_density(system, p)
    samples = []
    for k in range(count):
        try:
            samples.append(
                reconstruct_sample(
                    system, calib, derive_seed(base_seed, k), tol, max_iter, conditioned
                )
            )
        except DataError as exc:
            raise type(exc)(f"sample {k}: {exc}") from exc
    return samples
