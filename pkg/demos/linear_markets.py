"""
Affine demand, quadratic costs: equilibria and the steep-ramp limit
====================================================================

"""

import numpy as np

from pabgame import CostModel, DemandModel, Scenario
from pabgame.equilibrium import k_sweep, solve_nash_iterated_br, solve_quadratic_closed_form

# demand D(p) = 10 - p and three producers with costs c q^2 / 2
demand = DemandModel.affine(gamma=1.0, p_hat=10.0)
costs = [CostModel.quadratic(0.0, c) for c in (0.5, 2.0, 3.0)]
market = Scenario(costs, demand, lipschitz_k=1.0)

# the closed form and plain best-response iteration agree
exact = solve_quadratic_closed_form(market)
iterated = solve_nash_iterated_br(market, tol=1e-11 * market.p_hat)
print("activation prices", np.round(exact.x_star, 4), "price", round(exact.p_star, 4))
print("best-response iteration differs by", np.max(np.abs(exact.x_star - iterated.x_star)))

# steeper ramps push the price down towards marginal-cost pricing
table = k_sweep(market, [1, 10, 100, 1000, 10000])
for row in table.rows + [table.limit]:
    print(f"K = {row.k:>8}  p* = {row.p_star:.5f}")
