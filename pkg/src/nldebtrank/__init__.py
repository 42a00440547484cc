"""Non-linear DebtRank stress testing for interbank networks."""

__version__ = "0.1.0"

from .balance import (
    BalanceSheet,
    BankingSystem,
    ExposureNetwork,
    LeverageMatrix,
    build_leverage,
    derive_externals,
)
from .dynamics import PropagationRule, Trajectory, default_probability, run, simulate, step
from .errors import ConfigError, DataError, DebtRankError, InfeasibleError
from .experiment import ScenarioConfig, run_ensemble, sample_shock_set, sweep_H_surface
from .reconstruction import balance_weights, calibrate_density, reconstruct_ensemble
from .stability import spectral_radius, stability_assessment
from .synthetic import generate_synthetic
