"""Reserves of life insurance policies whose cash flows depend on a stochastic
short rate and its running integral."""

from .closedform import QuadratureRule, solve_premium
from .errors import ThieleError
from .lifestate import GompertzMakeham, TransitionModel, survival_probability, transition_probabilities
from .montecarlo import McEstimate, mc_reserve, surface_spotcheck
from .pdesolver import Grid, Grid2, ReserveSurface, max_stable_dt, solve_reinsurance, solve_thiele_1d, solve_thiele_2d
from .policy import PolicySpec, ProductParams, evaluate_cashflow, make_product
from .shortrate import (
    DiffusionModel,
    Unbounded,
    VasicekModel,
    conditional_moments,
    digital_average_price,
    digital_rate_price,
    simulate_exact,
    zcb_price,
)

__version__ = "0.1.0"
