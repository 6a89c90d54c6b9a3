"""Simulation and growth-rate estimation for linear birth-death processes."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import LBDPError
from .estimate import (
    SolverConfig,
    approx_mle,
    gaussian_mle,
    gw_estimate,
    h_function,
    sigma2_plugin,
)
from .saddlepoint import saddlepoint_mle
from .types import (
    EstimateResult,
    GrowthParams,
    ObservationSeries,
    RateParams,
    Trajectory,
    growth_to_rates,
    rates_to_growth,
)

__all__ = [
    "EstimateResult",
    "GrowthParams",
    "LBDPError",
    "ObservationSeries",
    "RateParams",
    "SolverConfig",
    "Trajectory",
    "approx_mle",
    "gaussian_mle",
    "growth_to_rates",
    "gw_estimate",
    "h_function",
    "rates_to_growth",
    "saddlepoint_mle",
    "sigma2_plugin",
    "__version__",
]
