"""Tweedie stochastic block models for weighted dynamic networks."""

from ._twsbm import (
    ConfigError,
    DataError,
    NumericalError,
    FitConfig,
    FitResult,
    CvReport,
    Simulation,
    cross_validate,
    default_lambda_grid,
    default_rho_grid,
    err_beta,
    fit,
    load_csv,
    log_density,
    nmi,
    read_result,
    sample,
    simulate,
    write_result,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "FitConfig",
    "FitResult",
    "CvReport",
    "Simulation",
    "cross_validate",
    "default_lambda_grid",
    "default_rho_grid",
    "err_beta",
    "fit",
    "load_csv",
    "log_density",
    "nmi",
    "read_result",
    "sample",
    "simulate",
    "write_result",
]
