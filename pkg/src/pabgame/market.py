"""Market clearing and pay-as-bid utilities.

Two strategy representations are supported: activation profiles ``x``
(supply ``K [p - x_i]_+``) and arbitrary piecewise-linear
:class:`~pabgame.models.SampledSupply` functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .errors import NoRoot
from .models import GENERAL, POLYNOMIAL, SampledSupply, Scenario, check_profile, check_supplies

MAX_BISECTIONS = 200


def _bisect_decreasing(h, lo, hi, slack=0.0):
    """Root of a strictly decreasing ``h`` with ``h(lo) > 0 >= h(hi)``.

    Runs until the bracket collapses to adjacent floats (or the iteration
    cap) and returns the endpoint with the smaller residual.  Sign
    violations within ``slack`` (rounding) return that endpoint.
    """
    hlo, hhi = h(lo), h(hi)
    if -slack <= hlo < 0:
        return lo
    if 0 < hhi <= slack:
        return hi
    if hlo < 0 or hhi > 0:
        raise NoRoot(f"no sign change on [{lo}, {hi}]: h = {hlo}, {hhi}")
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        hm = h(mid)
        if hm > 0:
            lo, hlo = mid, hm
        elif hm < 0:
            hi, hhi = mid, hm
        else:
            return mid
    return lo if abs(hlo) <= abs(hhi) else hi


def _clearing_sorted(demand, k, xs, cs):
    """Clearing price for sorted activation prices ``xs`` with prefix sums ``cs``.

    The excess demand ``D(p) - K sum [p - x_j]_+`` is strictly decreasing,
    so its sign at the sorted activation prices identifies the active
    piece; on that piece the equation is solved exactly (affine demand) or
    by bisection.
    """
    n = xs.shape[0]
    g = demand.eval(xs) - k * (np.arange(n) * xs - cs[:-1])
    m = int(np.count_nonzero(g > 0))
    if m == 0:
        return demand.p_hat
    lo = float(xs[m - 1])
    hi = float(xs[m]) if m < n else demand.p_hat
    total = float(cs[m])
    if lo >= hi:
        # activation prices at p_hat where D(p_hat) rounds slightly positive
        return hi
    if demand.is_affine:
        gamma = demand.gamma
        p = (gamma * demand.p_hat + k * total) / (gamma + k * m)
        return min(max(p, lo), hi)
    slack = 64 * np.finfo(float).eps * (abs(float(demand.eval(0.0))) + k * (m * hi + total))
    return _bisect_decreasing(lambda p: demand.eval(p) - k * (m * p - total), lo, hi, slack)


def _clearing(demand, k, x):
    xs = np.sort(np.asarray(x, dtype=float))
    cs = np.concatenate(([0.0], np.cumsum(xs)))
    return _clearing_sorted(demand, k, xs, cs)


def clearing_price(scenario: Scenario, x) -> float:
    """Unique ``p`` in ``[0, p_hat]`` with ``D(p) = K sum_i [p - x_i]_+``.

    Producers with ``x_i == p`` are inactive.

    >>> from pabgame.models import DemandModel, CostModel, Scenario
    >>> s = Scenario([CostModel.quadratic(0, 1)], DemandModel.affine(1, 10))
    >>> clearing_price(s, [0.0])
    5.0
    """
    x = check_profile(scenario, x)
    return _clearing(scenario.demand, scenario.lipschitz_k, x)


def clearing_residual(scenario: Scenario, x, p: float) -> float:
    """``D(p) - K sum [p - x_i]_+`` (zero at the clearing price)."""
    x = np.asarray(x, dtype=float)
    return float(scenario.demand.eval(p) - scenario.lipschitz_k * np.maximum(p - x, 0.0).sum())


def default_abs_tol(scenario: Scenario) -> float:
    return 1e-12 * max(1.0, float(scenario.demand.eval(0.0)))


def threshold_price(scenario: Scenario, i: int, x) -> float:
    """Clearing price when producer ``i`` withdraws (``x_i = p_hat``)."""
    x = check_profile(scenario, x).copy()
    x[i] = scenario.p_hat
    return _clearing(scenario.demand, scenario.lipschitz_k, x)


def pab_utility(scenario: Scenario, x, i: int) -> float:
    """Pay-as-bid utility of producer ``i`` under activation profile ``x``.

    ``K (p z - z^2 / 2) - C_i(K z)`` with ``z = [p - x_i]_+``.
    """
    x = check_profile(scenario, x)
    p = _clearing(scenario.demand, scenario.lipschitz_k, x)
    return _utility_at(scenario, i, p, float(x[i]))


def _utility_at(scenario, i, p, xi):
    k = scenario.lipschitz_k
    z = p - xi if p > xi else 0.0
    return k * (p * z - 0.5 * z * z) - scenario.costs[i].cost(k * z)


def utilities(scenario: Scenario, x) -> np.ndarray:
    x = check_profile(scenario, x)
    p = _clearing(scenario.demand, scenario.lipschitz_k, x)
    return np.array([_utility_at(scenario, i, p, float(x[i])) for i in range(scenario.n)])


# --- general (sampled) supply functions -------------------------------------


def supply_clearing_price(scenario: Scenario, supplies: Sequence[SampledSupply]) -> float:
    """Clearing price for arbitrary sampled supplies (bisection)."""
    demand = scenario.demand

    def excess(p):
        return demand.eval(p) - sum(float(s(p)) for s in supplies)

    if excess(demand.p_hat) > 0:
        return demand.p_hat
    return _bisect_decreasing(excess, 0.0, demand.p_hat)


def utility_of_supply(scenario: Scenario, supplies: Sequence[SampledSupply], i: int) -> float:
    """Pay-as-bid utility ``p S_i(p) - int_0^p S_i - C_i(S_i(p))``."""
    check_supplies(scenario, supplies)
    p = supply_clearing_price(scenario, supplies)
    s = supplies[i]
    q = float(s(p))
    return p * q - s.integral(p) - scenario.costs[i].cost(q)


def affinize(scenario: Scenario, supplies: Sequence[SampledSupply], i: int) -> Tuple[float, SampledSupply]:
    """Replace ``S_i`` by the steepest ramp through its clearing point.

    Returns the activation price ``x_i = p - S_i(p) / K`` and the sampled
    ramp ``K [p - x_i]_+``.  The clearing price is unchanged and the
    utility of producer ``i`` does not decrease.
    """
    check_supplies(scenario, supplies)
    k = scenario.lipschitz_k
    p = supply_clearing_price(scenario, supplies)
    xi = p - float(supplies[i](p)) / k
    xi = min(max(xi, 0.0), scenario.p_hat)
    return xi, SampledSupply.ramp(xi, k, scenario.p_hat)


def delayed_integral(supply: SampledSupply, p_star: float) -> float:
    """Exact ``int_0^{p*} S(p^2 / p*) dp`` for a piecewise-linear ``S``.

    Substituting ``u = p^2 / p*`` turns each linear segment
    ``S(u) = a + m u`` into ``sqrt(p*) [a (sqrt u1 - sqrt u0) + m/3 (u1^1.5 - u0^1.5)]``.
    """
    if p_star <= 0.0:
        return 0.0
    total = 0.0
    bp, vals = supply.breakpoints, supply.values
    for u0, u1, v0, v1 in zip(bp, bp[1:], vals, vals[1:]):
        if u0 >= p_star:
            break
        m = (v1 - v0) / (u1 - u0)
        a = v0 - m * u0
        u1 = min(u1, p_star)
        total += a * (math.sqrt(u1) - math.sqrt(u0)) + m / 3.0 * (u1 ** 1.5 - u0 ** 1.5)
    return math.sqrt(p_star) * total


class DelayResult(NamedTuple):
    p_star: float
    utility: float
    delayed_utility: float


def delayed_supply_gain(scenario: Scenario, supplies: Sequence[SampledSupply], i: int) -> DelayResult:
    """Utility before and after replacing ``S_i(p)`` by ``S_i(p^2 / p*)``.

    The delayed supply agrees with ``S_i`` at 0 and at the clearing price
    but lies below it in between, so the clearing price is unchanged and
    the pay-as-bid revenue grows whenever ``S_i`` is not identically zero
    on ``[0, p*]``.  The delayed function is continuous and non-decreasing
    but may be steeper than ``K``, which is why continuous supply games
    without a Lipschitz bound have no non-trivial best responses.
    """
    check_supplies(scenario, supplies)
    p = supply_clearing_price(scenario, supplies)
    s = supplies[i]
    q = float(s(p))
    base = p * q - scenario.costs[i].cost(q)
    return DelayResult(p, base - s.integral(p), base - delayed_integral(s, p))


# --- validation --------------------------------------------------------------


@dataclass
class ValidationReport:
    valid: bool
    p_hat: float
    violations: List[str] = field(default_factory=list)

    def __bool__(self):
        return self.valid


def validate(scenario: Scenario, grid: int = 1024, tol: float = 1e-12) -> ValidationReport:
    """Check the modelling assumptions the solvers rely on.

    Affine demand and quadratic costs are checked symbolically; polynomial
    demand and general costs are sampled on ``grid`` points.
    """
    demand = scenario.demand
    problems = []
    p_hat = demand.p_hat
    if demand.kind == POLYNOMIAL:
        d0 = float(demand.eval(0.0))
        if not d0 > 0:
            problems.append(f"demand: D(0) = {d0:.6g} is not positive")
        if not math.isfinite(p_hat):
            problems.append("demand: no finite p_hat (D never reaches zero)")
            ps = np.linspace(0.0, 1.0, grid)
        else:
            ps = np.linspace(0.0, p_hat, grid)
        d1 = demand.deriv(ps)
        if np.any(d1 >= 0):
            problems.append(f"demand: not decreasing (D'({ps[np.argmax(d1)]:.6g}) = {d1.max():.6g})")
        d2 = demand.second_deriv(ps)
        if np.any(d2 > tol):
            problems.append(f"demand: not concave (D''({ps[np.argmax(d2)]:.6g}) = {d2.max():.6g})")
    q_max = max(float(demand.eval(0.0)), scenario.lipschitz_k * (p_hat if math.isfinite(p_hat) else 1.0), 1.0)
    qs = np.linspace(0.0, q_max, grid)
    for j, cost in enumerate(scenario.costs):
        if cost.kind != GENERAL:
            continue
        c0 = float(cost.cost(0.0))
        if c0 < 0:
            problems.append(f"cost {j}: C(0) = {c0:.6g} is negative")
        c1 = np.array([cost.marginal(q) for q in qs], dtype=float)
        c2 = np.array([cost.curvature(q) for q in qs], dtype=float)
        if np.any(c1 < -tol):
            problems.append(f"cost {j}: decreasing (min C' = {c1.min():.6g})")
        if np.any(c2 < -tol):
            problems.append(f"cost {j}: not convex (min C'' = {c2.min():.6g})")
    return ValidationReport(not problems, p_hat, problems)
