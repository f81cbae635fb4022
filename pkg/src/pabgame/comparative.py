"""Cournot, Bertrand and linear supply-function baselines.

All baselines assume affine demand ``gamma (p_hat - p)`` and costs
``c q^2 / 2`` without a linear term.  Their prices are compared with the
pay-as-bid price in the ``K -> infinity`` limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .equilibrium import limit_equilibrium, solve_quadratic_closed_form
from .errors import AlphaOutOfRange, NoConvergence, NonPositiveParams, NotAffine, NotQuadratic
from .models import CostModel, DemandModel, Scenario


def _positive(**params):
    for name, value in params.items():
        if not (np.all(np.asarray(value, dtype=float) > 0)):
            raise NonPositiveParams(f"{name} must be positive, got {value}")


def cournot_price(gamma: float, p_hat: float, c: float, n: int) -> float:
    """Symmetric Cournot price; each firm sells ``gamma p_hat / (1 + n + c gamma)``.

    >>> cournot_price(1.0, 10.0, 1.0, 3)
    4.0
    """
    _positive(gamma=gamma, p_hat=p_hat, n=n)
    if c < 0:
        raise NonPositiveParams(f"c must be non-negative, got {c}")
    q = gamma * p_hat / (1.0 + n + c * gamma)
    return float(p_hat - n * q / gamma)


def bertrand_alpha_max(n: int) -> float:
    return n * n / (n + 1.0)


def bertrand_price(gamma: float, p_hat: float, c: float, n: int, alpha: float) -> float:
    """Symmetric Bertrand equilibrium price indexed by ``alpha``.

    ``alpha`` ranges over ``[0, n^2 / (n + 1)]``; ``alpha = n / 2``
    reproduces the pay-as-bid limit price.
    """
    _positive(gamma=gamma, p_hat=p_hat, c=c, n=n)
    if not (0.0 <= alpha <= bertrand_alpha_max(n)):
        raise AlphaOutOfRange(f"alpha = {alpha} outside [0, {bertrand_alpha_max(n)}]")
    return float(gamma * p_hat * c / (gamma * c + 2.0 * (n - alpha)))


def sfe_residual(gamma: float, c, beta) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    beta = np.asarray(beta, dtype=float)
    others = beta.sum() - beta
    return beta - (1.0 - c * beta) * (gamma + others)


def sfe_slopes(gamma: float, c: Sequence[float], tol: float = 1e-12, max_iter: int = 100_000,
               damping: float = 0.5) -> np.ndarray:
    """Slopes ``beta_i`` of the linear supply-function equilibrium.

    Solves ``beta_i = (1 - c_i beta_i)(gamma + sum_{j != i} beta_j)`` by a
    damped fixed-point iteration of ``beta_i = G_i / (1 + c_i G_i)``
    started at ``1 / (2 c_i)``.
    """
    c = np.asarray(c, dtype=float)
    _positive(gamma=gamma, c=c)
    beta = 1.0 / (2.0 * c)
    for _ in range(max_iter):
        g = gamma + beta.sum() - beta
        new = (1.0 - damping) * beta + damping * g / (1.0 + c * g)
        change = float(np.max(np.abs(new - beta)))
        beta = new
        if change <= tol * max(1.0, float(np.max(beta))):
            return beta
    raise NoConvergence("supply-function slopes did not converge", last_iterate=beta, iterations=max_iter)


def sfe_price(gamma: float, p_hat: float, beta) -> float:
    return float(gamma * p_hat / (gamma + float(np.sum(beta))))


def relative_difference(p_sfe: float, p_pab: float) -> float:
    return (p_sfe - p_pab) / p_sfe


@dataclass
class ComparisonReport:
    p_cournot: Optional[float]
    p_bertrand_low: Optional[float]
    p_bertrand_alpha: Dict[float, float]
    p_sfe: float
    p_pab_infinity: float
    sfe_slopes: np.ndarray
    orderings: List[Tuple[str, bool, float]] = field(default_factory=list)
    d_r: float = math.nan

    @property
    def all_hold(self) -> bool:
        return all(h for _, h, _ in self.orderings)


def _baseline_params(scenario: Scenario):
    if not scenario.demand.is_affine:
        raise NotAffine("baselines need affine demand")
    if not all(c.is_quadratic for c in scenario.costs):
        raise NotQuadratic("baselines need quadratic costs")
    if any(c.b != 0 for c in scenario.costs):
        raise NotQuadratic("baselines need costs without a linear term (b = 0)")
    return scenario.demand.gamma, scenario.p_hat, np.array([c.c for c in scenario.costs])


def ordering_report(scenario: Scenario, alphas: Optional[Sequence[float]] = None) -> ComparisonReport:
    """Baseline prices and the orderings they satisfy against the pay-as-bid limit.

    Cournot and Bertrand entries are only filled for identical producers.
    Each ordering carries its slack (positive when it holds).
    """
    gamma, p_hat, c = _baseline_params(scenario)
    n = scenario.n
    beta = sfe_slopes(gamma, c)
    p_sfe = sfe_price(gamma, p_hat, beta)
    p_inf = limit_equilibrium(scenario).p_infinity
    orderings = [("pab_infinity < sfe", bool(p_inf < p_sfe), p_sfe - p_inf)]
    p_c = p_b0 = None
    by_alpha: Dict[float, float] = {}
    if np.all(c == c[0]):
        p_c = cournot_price(gamma, p_hat, c[0], n)
        if alphas is None:
            alphas = [0.0, n / 2.0, bertrand_alpha_max(n)]
        by_alpha = {float(a): bertrand_price(gamma, p_hat, c[0], n, a) for a in alphas}
        p_b0 = bertrand_price(gamma, p_hat, c[0], n, 0.0)
        orderings = [
            ("bertrand_low < pab_infinity", bool(p_b0 < p_inf), p_inf - p_b0),
            ("pab_infinity < cournot", bool(p_inf < p_c), p_c - p_inf),
        ] + orderings
    return ComparisonReport(p_c, p_b0, by_alpha, p_sfe, p_inf, beta, orderings, relative_difference(p_sfe, p_inf))


def _quadratic_scenario(gamma, p_hat, c, k):
    return Scenario([CostModel.quadratic(0.0, ci) for ci in c], DemandModel.affine(gamma, p_hat), lipschitz_k=k)


def pab_price(gamma: float, p_hat: float, c: Sequence[float], k: Optional[float] = None) -> float:
    """Pay-as-bid price at ``K = k`` (closed form) or in the limit when ``k`` is None."""
    s = _quadratic_scenario(gamma, p_hat, c, 1.0 if k is None else k)
    return limit_equilibrium(s).p_infinity if k is None else solve_quadratic_closed_form(s).p_star


def homogeneous_dr(gamma: float, p_hat: float, c: float, n_values: Sequence[int], k: Optional[float] = None) -> np.ndarray:
    """Relative SFE/pay-as-bid price gap for ``n`` identical producers."""
    out = []
    for n in n_values:
        cs = [c] * int(n)
        out.append(relative_difference(sfe_price(gamma, p_hat, sfe_slopes(gamma, cs)), pab_price(gamma, p_hat, cs, k)))
    return np.array(out)


def heterogeneous_dr(gamma: float, p_hat: float, n: int, c_low: float, c_high: float, samples: int,
                     rng: np.random.Generator, k: Optional[float] = None) -> np.ndarray:
    """Relative gaps for cost slopes drawn uniformly from ``[c_low, c_high]``."""
    out = np.empty(samples)
    for s in range(samples):
        cs = rng.uniform(c_low, c_high, size=n)
        out[s] = relative_difference(sfe_price(gamma, p_hat, sfe_slopes(gamma, cs)), pab_price(gamma, p_hat, cs, k))
    return out
