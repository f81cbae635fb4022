"""Nash equilibria of the activation price game.

Three solvers are provided:

* :func:`solve_nash_iterated_br` -- best-response iteration, any demand;
* :func:`solve_all_active` -- Newton on the first-order conditions of the
  all-active game (affine demand, every producer selling);
* :func:`solve_quadratic_closed_form` -- explicit solution for affine
  demand and quadratic costs with a common linear coefficient ``b``.

:func:`verify_nash` checks any profile by computing exact best responses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .best_response import best_response, drop
from .errors import HeterogeneousB, NewtonDivergence, NoConvergence, NotAffine, NotQuadratic
from .market import _clearing, _utility_at, check_profile
from .models import Scenario

GUARANTEED = "guaranteed"
NOT_GUARANTEED = "not guaranteed"
MULTIPLE = "multiple equilibria detected"


class Method(str, enum.Enum):
    ITERATED_BR = "iterated-br"
    ALL_ACTIVE = "all-active"
    CLOSED_FORM = "closed-form"


class Schedule(str, enum.Enum):
    ROUND_ROBIN = "round-robin"
    JACOBI = "jacobi"


@dataclass
class NashReport:
    is_epsilon_nash: bool
    worst_gain: float
    per_producer_gain: np.ndarray
    best_responses: np.ndarray


@dataclass
class EquilibriumResult:
    x_star: np.ndarray
    p_star: float
    quantities: np.ndarray
    utilities: np.ndarray
    active_set: Tuple[int, ...]
    cost_active_set: Tuple[int, ...]
    method: Method
    iterations: int
    residual: float
    inactive_intervals: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    uniqueness: str = NOT_GUARANTEED
    worst_gain: Optional[float] = None
    verified: Optional[bool] = None

    @property
    def active_sets_agree(self) -> bool:
        return self.active_set == self.cost_active_set


def _uniqueness(scenario: Scenario) -> str:
    if not scenario.demand.is_affine:
        return NOT_GUARANTEED
    m0 = {c.marginal_at_zero for c in scenario.costs}
    return GUARANTEED if len(m0) == 1 else NOT_GUARANTEED


def _result(scenario, x, method, iterations, residual, epsilon=None, atol=1e-9):
    x = check_profile(scenario, x)
    k = scenario.lipschitz_k
    p = _clearing(scenario.demand, k, x)
    q = k * np.maximum(p - x, 0.0)
    u = np.array([_utility_at(scenario, i, p, float(x[i])) for i in range(scenario.n)])
    active = tuple(int(i) for i in np.flatnonzero(x < p))
    slack = atol * max(1.0, scenario.p_hat)
    # producers with C_i'(0) within slack of p* are borderline; resolve them
    # by the observed activity so only genuine disagreements surface
    cost_active = []
    for i, c in enumerate(scenario.costs):
        m0 = c.marginal_at_zero
        if m0 < p - slack or (abs(m0 - p) <= slack and i in active):
            cost_active.append(i)
    eps = default_epsilon(scenario, 1e-8 * scenario.p_hat) if epsilon is None else epsilon
    inactive = {i: (p, inactive_interval(scenario, x, i, eps)) for i in range(scenario.n) if i not in active}
    res = EquilibriumResult(
        x_star=x, p_star=p, quantities=q, utilities=u, active_set=active,
        cost_active_set=tuple(cost_active), method=method, iterations=iterations,
        residual=float(residual), inactive_intervals=inactive, uniqueness=_uniqueness(scenario),
    )
    if epsilon is not None:
        report = verify_nash(scenario, x, epsilon)
        res.worst_gain = report.worst_gain
        res.verified = report.is_epsilon_nash
    return res


def verify_nash(scenario: Scenario, x, epsilon: float) -> NashReport:
    """Largest utility gain any single producer gets by deviating from ``x``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = check_profile(scenario, x)
    k = scenario.lipschitz_k
    p = _clearing(scenario.demand, k, x)
    gains = np.empty(scenario.n)
    brs = np.empty(scenario.n)
    for i in range(scenario.n):
        br = best_response(scenario, i, drop(x, i))
        gains[i] = br.utility_at_max - _utility_at(scenario, i, p, float(x[i]))
        brs[i] = br.maximizer
    worst = float(gains.max())
    return NashReport(worst <= epsilon, worst, gains, brs)


def inactive_interval(scenario: Scenario, x, i: int, epsilon: float, iterations: int = 60) -> float:
    """Largest price an inactive producer ``i`` can post without breaking equilibrium.

    Moving an inactive producer's price within ``[p*, p_hat]`` leaves every
    utility unchanged, but a higher price gives the others more room to
    deviate, so their best gains are nondecreasing in ``x_i``.  Bisects for
    the upper end of the interval starting at ``x``, which is assumed to be
    an ``epsilon``-equilibrium.
    """
    x = check_profile(scenario, x).copy()
    p_hat = scenario.p_hat

    def holds(v):
        x[i] = v
        return verify_nash(scenario, x, epsilon).is_epsilon_nash

    lo, hi = float(x[i]), p_hat
    if hi <= lo or holds(hi):
        return p_hat
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def default_epsilon(scenario: Scenario, tol: float) -> float:
    return 10.0 * tol * scenario.p_hat * max(1.0, scenario.lipschitz_k)


# --- iterated best responses -----------------------------------------------


def _sweep(scenario, x, schedule):
    x = x.copy()
    if schedule == Schedule.JACOBI:
        return np.array([best_response(scenario, i, drop(x, i)).maximizer for i in range(scenario.n)])
    for i in range(scenario.n):
        x[i] = best_response(scenario, i, drop(x, i)).maximizer
    return x


def _fixed_point(T, x0, tol, max_iter, damping, accelerate, upper, memory=None):
    """Iterate ``x <- x + damping (T(x) - x)``, optionally accelerated.

    Stops when the plain update ``g = T(x) - x`` has sup-norm at most
    ``tol`` and returns ``T(x)``; ``max_iter`` counts evaluations of ``T``.

    Acceleration.  When ``g`` is one-signed (always the case from the
    extremal starts, since best responses are monotone in the opponents'
    activation prices) a candidate ``y`` is accepted only if it moves in the
    direction of ``g`` and ``T(y) - y`` keeps that sign, so the iterate
    never crosses the equilibrium it is approaching.  Candidates are the
    Anderson extrapolation and then steps ``x + t g`` with doubling ``t``.
    When ``g`` has mixed signs the Anderson step is pulled back towards the
    plain step until it reduces the update norm.
    """
    memory = min(np.size(x0) + 1, 20) if memory is None else memory
    slack = 1e-3 * tol
    x = np.array(x0, dtype=float)
    g = T(x) - x
    res = float(np.max(np.abs(g)))
    evals = 1
    dxs: List[np.ndarray] = []
    dgs: List[np.ndarray] = []

    def evaluate(y):
        gy = T(y) - y
        return gy, float(np.max(np.abs(gy)))

    while res > tol:
        if evals >= max_iter:
            raise NoConvergence(f"no convergence after {max_iter} iterations (last change {res:.3g})",
                                last_iterate=x, iterations=evals)
        plain = np.clip(x + damping * g, 0.0, upper)
        accepted = None
        sign = 1.0 if np.all(g >= -slack) else (-1.0 if np.all(g <= slack) else 0.0)
        aa = None
        if accelerate and dxs:
            dG = np.column_stack(dgs)
            dX = np.column_stack(dxs)
            coef, *_ = np.linalg.lstsq(dG, g, rcond=None)
            aa = np.clip(x + damping * g - (dX + damping * dG) @ coef, 0.0, upper)
        if accelerate and sign != 0.0:

            def ordered(y, gy):
                return np.all(sign * (y - x) >= -slack) and np.all(sign * gy >= -slack)

            if aa is not None:
                gc, rc = evaluate(aa)
                evals += 1
                if ordered(aa, gc):
                    accepted = (aa, gc, rc)
            if accepted is None:
                t = 2.0
                while evals < max_iter and t <= 2.0 ** 40:
                    cand = np.clip(x + t * damping * g, 0.0, upper)
                    gc, rc = evaluate(cand)
                    evals += 1
                    if not ordered(cand, gc):
                        break
                    accepted = (cand, gc, rc)
                    t *= 2.0
        elif aa is not None:
            t = 1.0
            for _ in range(4):
                cand = plain + t * (aa - plain)
                gc, rc = evaluate(cand)
                evals += 1
                if rc < res:
                    accepted = (cand, gc, rc)
                    break
                t *= 0.25
                if evals >= max_iter:
                    break
            if accepted is None:
                dxs.clear()
                dgs.clear()
        if accepted is None:
            gc, rc = evaluate(plain)
            evals += 1
            accepted = (plain, gc, rc)
        cand, gc, rc = accepted
        dxs.append(cand - x)
        dgs.append(gc - g)
        if len(dxs) > memory:
            dxs.pop(0)
            dgs.pop(0)
        x, g, res = cand, gc, rc
    return x + g, evals, res


def solve_nash_iterated_br(
    scenario: Scenario,
    init=None,
    schedule: str = Schedule.ROUND_ROBIN,
    tol: Optional[float] = None,
    max_iter: int = 5000,
    damping: float = 1.0,
    accelerate: bool = True,
) -> EquilibriumResult:
    """Equilibrium by iterating exact best responses.

    With ``init=None`` the iteration is started from both extremal profiles
    ``0`` and ``p_hat``; the result from ``0`` is returned and
    ``uniqueness`` records whether the two runs reach different outcomes
    (after a tightened rerun, since slow modes can leave errors well above
    ``tol``).  Acceleration only changes the path; the stopping test uses
    the plain best-response update.  The returned profile is checked with
    :func:`verify_nash`.
    """
    schedule = Schedule(schedule)
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must lie in (0, 1]")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    p_hat = scenario.p_hat
    tol = 1e-8 * p_hat if tol is None else tol
    if not tol > 0:
        raise ValueError("tol must be positive")

    def T(x):
        return _sweep(scenario, x, schedule)

    starts = [np.zeros(scenario.n), np.full(scenario.n, p_hat)] if init is None else [check_profile(scenario, init)]
    runs = [_fixed_point(T, x0, tol, max_iter, damping, accelerate, p_hat) for x0 in starts]
    uniqueness = None
    if len(runs) == 2:
        gap = 1e3 * tol
        if _outcome_gap(scenario, runs[0][0], runs[1][0]) > gap:
            # slow modes leave errors well above tol; tighten before calling it multiplicity
            fine = [_fixed_point(T, r[0], 1e-3 * tol, max_iter, damping, accelerate, p_hat) for r in runs]
            runs = [(f[0], r[1] + f[1], f[2]) for r, f in zip(runs, fine)]
            if _outcome_gap(scenario, runs[0][0], runs[1][0]) > gap:
                uniqueness = MULTIPLE
    x, _, residual = runs[0]
    res = _result(scenario, x, Method.ITERATED_BR, sum(r[1] for r in runs), residual, default_epsilon(scenario, tol))
    if uniqueness is not None:
        res.uniqueness = uniqueness
    return res


def _outcome_gap(scenario, x, y):
    """Sup distance between the prices and ``[p - x_i]_+`` of two profiles."""
    k = scenario.lipschitz_k
    px, py = _clearing(scenario.demand, k, x), _clearing(scenario.demand, k, y)
    zx, zy = np.maximum(px - x, 0.0), np.maximum(py - y, 0.0)
    return max(abs(px - py), float(np.max(np.abs(zx - zy))))


# --- all-active game ---------------------------------------------------------


def _require_affine(scenario):
    if not scenario.demand.is_affine:
        raise NotAffine("this solver needs affine demand")


def foc_residual(scenario: Scenario, x) -> np.ndarray:
    """First-order conditions of the all-active game in the ``K = 1`` normalisation.

    ``p~ - (n + g) x_i + (n + g - 1) C_i'(p~ - x_i)`` with ``g = gamma / K``,
    ``p~ = (g p_hat + sum x) / (n + g)`` and costs extended quadratically to
    negative quantities.
    """
    _require_affine(scenario)
    norm = scenario.normalized()
    x = np.asarray(x, dtype=float)
    n, g, p_hat = norm.n, norm.demand.gamma, norm.p_hat
    pt = (g * p_hat + x.sum()) / (n + g)
    m = np.array([c.extended_marginal(pt - xi) for c, xi in zip(norm.costs, x)])
    return pt - (n + g) * x + (n + g - 1) * m


def _foc_jacobian(norm, x):
    n, g = norm.n, norm.demand.gamma
    a = n + g
    pt = (g * norm.p_hat + x.sum()) / a
    curv = np.array([c.extended_curvature(pt - xi) for c, xi in zip(norm.costs, x)])
    jac = np.full((n, n), 1.0 / a) + ((a - 1) * curv / a)[:, None]
    jac[np.diag_indices(n)] -= a + (a - 1) * curv
    return jac


def _all_active_fixed_point(scenario, x, tol, max_iter=10000, damping=0.5):
    # each FOC is strictly decreasing in its own coordinate: solve them in turn
    norm = scenario.normalized()
    n, g = norm.n, norm.demand.gamma
    a = n + g
    for it in range(1, max_iter + 1):
        old = x.copy()
        for i in range(n):
            cost = norm.costs[i]
            rest = g * norm.p_hat + x.sum() - x[i]
            xi = x[i]
            for _ in range(100):
                pt = (rest + xi) / a
                fi = pt - a * xi + (a - 1) * cost.extended_marginal(pt - xi)
                dfi = 1 / a - a + (a - 1) * cost.extended_curvature(pt - xi) * (1 / a - 1)
                step = fi / dfi
                xi -= step
                if abs(step) <= 1e-15 * max(1.0, abs(xi)):
                    break
            x[i] = (1 - damping) * x[i] + damping * xi
        if np.max(np.abs(x - old)) <= tol:
            return x, it
    raise NoConvergence("all-active fixed point did not converge", last_iterate=x, iterations=max_iter)


def solve_all_active(scenario: Scenario, init=None, tol: Optional[float] = None, max_iter: int = 100) -> EquilibriumResult:
    """Unique equilibrium of the all-active game by Newton's method.

    It coincides with the activation game equilibrium whenever every
    producer ends up active, in particular when all ``C_i'(0)`` are equal
    and below ``p_hat``.  Steps are halved while the residual grows; if
    that fails the solver falls back to a damped coordinate iteration.
    """
    _require_affine(scenario)
    norm = scenario.normalized()
    p_hat = scenario.p_hat
    tol = 1e-10 * p_hat if tol is None else tol
    x = np.full(scenario.n, 0.5 * p_hat) if init is None else np.array(init, dtype=float)
    F = foc_residual(scenario, x)
    norm_f = float(np.max(np.abs(F)))
    iterations = 0
    try:
        for iterations in range(1, max_iter + 1):
            dx = np.linalg.solve(_foc_jacobian(norm, x), -F)
            t = 1.0
            while True:
                trial = x + t * dx
                Ft = foc_residual(scenario, trial)
                nt = float(np.max(np.abs(Ft)))
                if nt < norm_f or nt <= 1e-14 * p_hat:
                    break
                t *= 0.5
                if t < 1e-8:
                    raise NewtonDivergence("Newton step failed to reduce the residual")
            x, F, norm_f = trial, Ft, nt
            if float(np.max(np.abs(t * dx))) <= tol * 1e-2 or norm_f <= 1e-13 * max(1.0, p_hat):
                break
    except (NewtonDivergence, np.linalg.LinAlgError):
        x, iterations = _all_active_fixed_point(scenario, x, tol * 1e-2)
    x = np.clip(x, 0.0, p_hat)
    return _result(scenario, x, Method.ALL_ACTIVE, iterations, float(np.max(np.abs(foc_residual(scenario, x)))))


# --- affine demand, quadratic costs -------------------------------------------


def _require_affine_quadratic(scenario):
    _require_affine(scenario)
    if not all(c.is_quadratic for c in scenario.costs):
        raise NotQuadratic("this solver needs quadratic costs")
    b = scenario.common_b
    if b is None:
        raise HeterogeneousB("quadratic costs must share the same b")
    return b


def closed_form_coefficients(scenario: Scenario):
    """The vectors ``d`` and ``a`` of the closed-form solution."""
    _require_affine_quadratic(scenario)
    k, n = scenario.lipschitz_k, scenario.n
    gamma = scenario.demand.gamma
    c = np.array([cm.c for cm in scenario.costs])
    d = (k * (n - 1) + gamma) / (k * c * (n - 1) + c * gamma + n + gamma / k)
    a = (k - d) / (k * n + gamma)
    return d, a


def closed_form_profile(scenario: Scenario) -> Tuple[np.ndarray, float]:
    """``(x*, p*)`` from the explicit formulas."""
    b = _require_affine_quadratic(scenario)
    k, n = scenario.lipschitz_k, scenario.n
    gamma, p_hat = scenario.demand.gamma, scenario.p_hat
    if b >= p_hat:
        return np.full(n, p_hat), p_hat
    d, a = closed_form_coefficients(scenario)
    delta = d.sum()
    p = (p_hat * gamma + b * delta) / (gamma + delta)
    x = (n + gamma / k) * p * a + (b / k) * d
    return x, p


def solve_quadratic_closed_form(scenario: Scenario) -> EquilibriumResult:
    """Closed-form equilibrium for affine demand and costs ``b q + c_i q^2 / 2``."""
    x, _ = closed_form_profile(scenario)
    x = np.clip(x, 0.0, scenario.p_hat)
    resid = 0.0 if scenario.common_b >= scenario.p_hat else float(np.max(np.abs(foc_residual(scenario, x))))
    return _result(scenario, x, Method.CLOSED_FORM, 0, resid)


@dataclass
class LimitResult:
    p_infinity: float
    quantities_infinity: np.ndarray
    utilities_infinity: np.ndarray


def limit_equilibrium(scenario: Scenario) -> LimitResult:
    """Equilibrium price, quantities and profits as ``K -> infinity``.

    Each producer ends up selling where its marginal cost equals the price.
    When ``b >= p_hat`` nothing is sold and the price is ``p_hat``.
    """
    b = _require_affine_quadratic(scenario)
    gamma, p_hat = scenario.demand.gamma, scenario.p_hat
    c = np.array([cm.c for cm in scenario.costs])
    inv = float(np.sum(1.0 / c))
    margin = max(p_hat - b, 0.0)
    p_inf = (p_hat * gamma + b * inv) / (gamma + inv) if b < p_hat else p_hat
    q = (gamma / c) / (gamma + inv) * margin
    u = gamma ** 2 / (2.0 * c * (gamma + inv) ** 2) * margin ** 2
    return LimitResult(float(p_inf), q, u)


def rescale(scenario: Scenario, x, to_k: float):
    """Move a scenario and profile to Lipschitz constant ``to_k``.

    Clearing prices are unchanged and utilities scale by ``to_k / K``.
    """
    x = check_profile(scenario, x)
    return scenario.with_k(to_k), x.copy()


@dataclass
class SweepRow:
    k: float
    p_star: float
    x_star: np.ndarray
    quantities: np.ndarray


@dataclass
class SweepTable:
    rows: List[SweepRow]
    limit: SweepRow

    @property
    def monotone_in_k(self) -> bool:
        """Whether ``p*`` is non-increasing along the sweep (a diagnostic, not a theorem)."""
        ps = [r.p_star for r in self.rows]
        return all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(ps, ps[1:]))


def k_sweep(scenario: Scenario, k_values: Sequence[float]) -> SweepTable:
    """Closed-form equilibria for each ``K`` plus the ``K -> infinity`` row."""
    k_values = [float(k) for k in k_values]
    if not k_values:
        raise ValueError("k_values is empty")
    if any(k <= 0 for k in k_values) or any(b < a for a, b in zip(k_values, k_values[1:])):
        raise ValueError("k_values must be positive and sorted")
    rows = []
    for k in k_values:
        res = solve_quadratic_closed_form(scenario.with_lipschitz(k))
        rows.append(SweepRow(k, res.p_star, res.x_star, res.quantities))
    lim = limit_equilibrium(scenario)
    limit_row = SweepRow(math.inf, lim.p_infinity, np.full(scenario.n, lim.p_infinity), lim.quantities_infinity)
    return SweepTable(rows, limit_row)
