"""Variance-optimal hedging in discrete time for exponential models with
independent increments, via complex payoff measures."""
from __future__ import annotations

from .errors import (AssumptionError, ConfigError, DomainError, NumericsError,
                     ParameterError, SolverError, VoHedgeError)
from .fs_core import (FsCoefficients, LambdaProcess, compute_fs, initial_capital,
                      lambda_coeffs, mean_value_process, mvt_process, pure_hedge_ratio)
from .grid_opt import (GridObjective, GridOptResult, b_sweep, lambda_sigma_pairs,
                       optimize_b, optimize_nonparametric, parametric_grid)
from .hedging_error import (ErrorReport, StrategyError, bs_delta_coeffs,
                            deterministic_strategy_error, fs_pure_coeffs, j0_date_gradient,
                            j0_kernel, j0_kernel_stationary, j0_stationary, j0_total)
from .mc_oracle import (EmpiricalReport, PathBatch, compare_strategies, martingale_diagnostics,
                        simulate_hedge, simulate_paths)
from .payoff_measures import (ComplexMeasure, DiscretizedMeasure, call_measure,
                              digital_measure, discretize, exponential_measure, put_measure,
                              reconstruct_payoff)
from .pii_models import (BinomialParams, CumulantTable, DiscreteParams, ElectricityParams,
                         GaussianParams, NigParams, TradingGrid, discretize_model, nig_cgf,
                         nig_moments, rescale_nig)

__version__ = "0.1.0"
