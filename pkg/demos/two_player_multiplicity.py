"""
Two producers: one equilibrium, a continuum, or a union of two families
========================================================================

"""

import numpy as np

from pabgame import CostModel, DemandModel, Scenario
from pabgame.equilibrium import solve_nash_iterated_br, verify_nash

demand = DemandModel.affine(1.0, 1.0)


def market(c2):
    # C1 = q^2 / 2 and C2 = c2 q + q^2 / 2
    return Scenario([CostModel.quadratic(0.0, 1.0), CostModel.quadratic(c2, 1.0)], demand)


# scan a grid of profiles and keep those no producer wants to leave
grid = np.linspace(0.0, 1.0, 201)
for c2 in (0.3, 0.73, 0.9):
    s = market(c2)
    found = [(float(a), float(b)) for a in grid for b in grid if verify_nash(s, [a, b], 1e-9).is_epsilon_nash]
    solved = solve_nash_iterated_br(s)
    print(f"c2 = {c2}: solver gives {np.round(solved.x_star, 4)} ({solved.uniqueness}); "
          f"{len(found)} grid equilibria, e.g. {found[:3]}")
