"""Pay-as-bid supply function equilibria with Lipschitz-bounded supplies."""

from .errors import *  # noqa: F401,F403
from .models import CostModel, DemandModel, SampledSupply, Scenario, check_profile
from .market import (
    affinize, clearing_price, delayed_supply_gain, pab_utility, supply_clearing_price,
    threshold_price, utilities, utility_of_supply, validate,
)
from .best_response import best_response, best_response_grid_oracle
from .equilibrium import (
    EquilibriumResult, LimitResult, k_sweep, limit_equilibrium, rescale, solve_all_active,
    solve_nash_iterated_br, solve_quadratic_closed_form, verify_nash,
)
from .comparative import bertrand_price, cournot_price, ordering_report, sfe_price, sfe_slopes
from .scenario_io import load_scenario

__version__ = "0.1.0"
