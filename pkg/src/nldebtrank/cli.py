"""Command-line driver: ``nldebtrank {generate,reconstruct,run,sweep,stability}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .balance import build_leverage
from .dynamics import PropagationRule
from .errors import ConfigError, DataError, DebtRankError
from .experiment import (
    ScenarioConfig,
    build_ensemble,
    run_ensemble,
    shock_seed,
    sweep_H_surface,
    total_shock_normalizer,
)
from .fileio import (
    EDGE_HEADER,
    RunConfig,
    edge_rows,
    load_balance_sheets,
    load_config,
    load_network,
    write_balance_sheets,
    write_summary,
    write_table,
)
from .reconstruction import calibrate_density, derive_seed, reconstruct_sample
from .stability import spectral_radius
from .synthetic import generate_synthetic

logger = logging.getLogger("nldebtrank")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _system(cfg: RunConfig):
    if cfg.balance_sheets:
        return load_balance_sheets(cfg.balance_sheets)
    logger.info("no balance_sheets given; generating a synthetic system (seed %d)", cfg.seed)
    return _synthetic(cfg)


def _synthetic(cfg: RunConfig):
    return generate_synthetic(
        cfg.n_banks, cfg.seed, cfg.size_dispersion, cfg.interbank_share,
        cfg.equity_ratio, cfg.noise,
    )


def _scenario(cfg: RunConfig) -> ScenarioConfig:
    return ScenarioConfig(
        p=cfg.p, n_networks=cfg.n_networks, n_shock_realizations=cfg.n_shock_realizations,
        p_shock=cfg.p_shock, x_shock=cfg.x_shock,
        rule=PropagationRule.parse(cfg.rule, cfg.alpha), base_seed=cfg.seed,
        tol=cfg.tol, t_max=cfg.t_max,
    )


def _summary(command: str, cfg: RunConfig, **results) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": cfg.as_dict(),
        "seeds": {"base_seed": cfg.seed},
        "results": results,
    }


def cmd_generate(cfg: RunConfig, out: Path) -> None:
    system = _synthetic(cfg)
    write_balance_sheets(system, out / "balance_sheets.csv")
    write_summary(out / "summary.json", _summary(
        "generate", cfg, n_banks=system.n,
        total_equity=float(system.equity.sum()),
        total_interbank_assets=float(system.interbank_assets.sum()),
        total_interbank_liabilities=float(system.interbank_liabilities.sum()),
    ))


def cmd_reconstruct(cfg: RunConfig, out: Path) -> None:
    system = _system(cfg)
    calib = calibrate_density(system, cfg.p)
    n = system.n
    rows, weights, failures = [], [], 0
    for k in range(cfg.n_networks):
        try:
            smp = reconstruct_sample(system, calib, derive_seed(cfg.seed, k))
        except DataError as exc:
            logger.warning("sample %d: %s", k, exc)
            failures += 1
            continue
        rows.append((k, smp.seed, smp.n_edges, smp.n_edges / (n * (n - 1)),
                     smp.ras_residual, smp.ras_converged))
        if cfg.write_weights:
            weights.extend(edge_rows(smp.weights, system.bank_ids, prefix=(k,)))
    write_table(out / "reconstruction.csv",
                ("sample", "seed", "n_edges", "density", "ras_residual", "ras_converged"), rows)
    if cfg.write_weights:
        write_table(out / "weights.csv", ("sample",) + EDGE_HEADER, weights)
    write_summary(out / "summary.json", _summary(
        "reconstruct", cfg, n_samples=len(rows), n_failed=failures,
        fitness_z=_finite_or_none(calib.z),
        expected_edges=calib.achieved_expected_edges,
        mean_edges=float(np.mean([r[2] for r in rows])) if rows else None,
        max_ras_residual=max((r[4] for r in rows), default=None),
    ))


def cmd_run(cfg: RunConfig, out: Path) -> None:
    system = _system(cfg)
    scenario = _scenario(cfg)
    ens = build_ensemble(system, scenario)
    res = run_ensemble(system, scenario, ens)
    rows = [
        (t + 1, res.mean_S_t[t], res.stderr_S_t[t], res.mean_D_t[t], res.stderr_D_t[t],
         res.mean_H_t[t], res.stderr_H_t[t])
        for t in range(len(res.mean_H_t))
    ]
    write_table(out / "trajectory.csv",
                ("t", "S", "S_stderr", "D", "D_stderr", "H", "H_stderr"), rows)
    runs = []
    k_run = 0
    for k, sets in enumerate(ens.shock_sets):
        for r in range(len(sets)):
            runs.append((k, r, res.H_inf[k_run], res.steps[k_run]))
            k_run += 1
    write_table(out / "runs.csv", ("network", "realization", "H_inf", "steps"), runs)
    write_summary(out / "summary.json", _summary(
        "run", cfg, rule=str(scenario.rule), mean_H_inf=res.mean_H_inf,
        stderr_H_inf=res.stderr_H_inf, mean_H_initial=res.mean_H_initial,
        n_runs=res.n_runs, n_nonconverged=res.n_nonconverged, n_failed=res.n_failed,
        shock_set_size="all" if cfg.p_shock == 1 else int(round(cfg.p_shock * system.n)),
        shock_seed_example=shock_seed(cfg.seed, 0, 0),
    ))


def cmd_sweep(cfg: RunConfig, out: Path) -> None:
    system = _system(cfg)
    scenario = _scenario(cfg)
    xs = list(cfg.x_shock_grid)
    if cfg.reference_p_shock is not None:
        xs = [total_shock_normalizer(cfg.p_shock, (0.0, x), cfg.reference_p_shock)[1] for x in xs]
    sw = sweep_H_surface(system, scenario, cfg.alpha_grid, xs)
    rows = [(c.alpha, c.x_shock, c.mean_H_inf, c.stderr_H_inf, c.result.n_runs,
             c.result.n_nonconverged) for c in sw.cells]
    write_table(out / "surface.csv",
                ("alpha", "x_shock", "mean_H_inf", "stderr_H_inf", "n_runs", "n_nonconverged"), rows)
    write_summary(out / "summary.json", _summary(
        "sweep", cfg, n_cells=len(rows), x_shock_grid=xs, alpha_grid=sw.alpha_grid,
    ))


def cmd_stability(cfg: RunConfig, out: Path) -> None:
    system = _system(cfg)
    rows = []
    if cfg.network:
        net = load_network(cfg.network, system)
        rep = spectral_radius(build_leverage(system, net))
        rows.append(("file", rep.lambda_max, rep.alpha_critical, rep.iterations,
                     rep.residual, rep.converged))
    else:
        calib = calibrate_density(system, cfg.p)
        for k in range(cfg.n_networks):
            try:
                smp = reconstruct_sample(system, calib, derive_seed(cfg.seed, k))
            except DataError as exc:
                logger.warning("sample %d: %s", k, exc)
                continue
            rep = spectral_radius(build_leverage(system, smp.weights))
            rows.append((k, rep.lambda_max, rep.alpha_critical, rep.iterations,
                         rep.residual, rep.converged))
    if not rows:
        raise DebtRankError("no network available for stability analysis")
    lam = np.array([r[1] for r in rows])
    mean_lam = float(lam.mean())
    mean_alpha = math.log(mean_lam) if mean_lam > 0 else -math.inf
    table = rows + [("mean", mean_lam, mean_alpha, "", "", "")]
    write_table(out / "stability.csv",
                ("sample", "lambda_max", "alpha_critical", "iterations", "residual", "converged"),
                table)
    write_summary(out / "summary.json", _summary(
        "stability", cfg, n_samples=len(rows), mean_lambda_max=mean_lam,
        alpha_critical_of_mean=_finite_or_none(mean_alpha),
        stderr_lambda_max=float(lam.std(ddof=1) / math.sqrt(len(lam))) if len(lam) > 1 else 0.0,
    ))


COMMANDS = {
    "generate": (cmd_generate, "write a synthetic balance-sheet file"),
    "reconstruct": (cmd_reconstruct, "reconstruct an ensemble of exposure networks"),
    "run": (cmd_run, "one stress-test ensemble; writes the S/D/H trajectory table"),
    "sweep": (cmd_sweep, "steady-state loss surface over (alpha, x_shock)"),
    "stability": (cmd_stability, "largest eigenvalue of the leverage matrix"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nldebtrank", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=Path, help="YAML/JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
        sp.add_argument("--input", type=Path, help="balance-sheet file (overrides balance_sheets)")
        if name == "stability":
            sp.add_argument("--network", type=Path, help="edge-list file (lender,borrower,weight)")
        sp.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = str(args.out)
        if args.input is not None:
            cfg.balance_sheets = str(args.input)
        if getattr(args, "network", None) is not None:
            cfg.network = str(args.network)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DebtRankError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    logger.info("wrote %s output to %s", args.command, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
