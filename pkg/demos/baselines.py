"""
Where the pay-as-bid limit sits among classical oligopoly prices
================================================================

"""

import numpy as np

from pabgame.comparative import homogeneous_dr, ordering_report
from pabgame.scenario_io import load_scenario

# two very different producers, c = 0.2 and c = 10
report = ordering_report(load_scenario("limit1"))
print("supply-function equilibrium", round(report.p_sfe, 3), "pay-as-bid limit", round(report.p_pab_infinity, 3))

# identical producers: Bertrand(0) < pay-as-bid limit < Cournot
report = ordering_report(load_scenario("limit1_hom"))
for name, holds, slack in report.orderings:
    print(f"{name:30s} {holds}  slack {slack:.3f}")

# the gap to the supply-function equilibrium closes as producers enter
n = np.arange(2, 21)
print(np.round(homogeneous_dr(1.0, 10.0, 0.02, n), 4))
