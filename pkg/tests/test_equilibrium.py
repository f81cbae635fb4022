import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from pabgame.equilibrium import (
    GUARANTEED, MULTIPLE, NOT_GUARANTEED, Method, closed_form_profile, default_epsilon, foc_residual, k_sweep,
    limit_equilibrium, rescale, solve_all_active, solve_nash_iterated_br, solve_quadratic_closed_form, verify_nash,
)
from pabgame.errors import HeterogeneousB, NoConvergence, NotAffine, NotQuadratic
from pabgame.market import clearing_price, pab_utility
from pabgame.models import CostModel, DemandModel, Scenario

from helpers import linear_market, nonlinear_market, random_common_b_scenario, scenario_and_profile, scenarios


def linear_foc_oracle(s):
    """All-active equilibrium of an affine/quadratic market from a dense linear solve.

    With ``p = alpha + slope * sum(x)`` each first-order condition
    ``(1 - slope)(x_i - C'(K z)) = slope z`` is linear in ``x``.
    """
    n, k = s.n, s.lipschitz_k
    gamma, p_hat = s.demand.gamma, s.p_hat
    slope = k / (gamma + k * n)
    alpha = gamma * p_hat / (gamma + k * n)
    b = np.array([c.b for c in s.costs])
    c = np.array([c.c for c in s.costs])
    on_x = (1 - slope) * (1 + c * k) + slope
    on_p = -(1 - slope) * c * k - slope
    a = np.diag(on_x) + np.outer(on_p * slope, np.ones(n))
    rhs = (1 - slope) * b - on_p * alpha
    x = np.linalg.solve(a, rhs)
    return x, alpha + slope * x.sum()


def perfect_competition_price(s):
    b = s.costs[0].b
    inv = sum(1.0 / c.c for c in s.costs)
    h = lambda p: float(s.demand.eval(p)) - inv * max(p - b, 0.0)
    return s.p_hat if h(s.p_hat) >= 0 else brentq(h, 0.0, s.p_hat, xtol=1e-15)


# --- closed form ---------------------------------------------------------------


@pytest.mark.parametrize("c,k,x_ref,p_ref,tol", [
    ([0.5, 2, 3], 1.0, [2.19, 3.37, 3.71], 4.82, 0.01),
    ([0.5, 2, 100], 1.0, [2.45, 3.77, 5.34], 5.39, 0.01),
    ([0.5, 2, 3], 100.0, [2.60, 2.6395, 2.6439], 2.65, 0.005),
])
def test_closed_form_examples(c, k, x_ref, p_ref, tol):
    res = solve_quadratic_closed_form(linear_market(c, k=k))
    assert res.p_star == pytest.approx(p_ref, abs=0.01)
    assert np.allclose(res.x_star, x_ref, atol=tol)
    assert res.method == Method.CLOSED_FORM


def test_closed_form_exact_price():
    res = solve_quadratic_closed_form(linear_market([0.5, 2, 3]))
    x, p = linear_foc_oracle(linear_market([0.5, 2, 3]))
    assert res.p_star == pytest.approx(p, abs=1e-12)
    assert round(res.p_star, 4) == 4.8164 or round(res.p_star, 4) == 4.8165


@settings(max_examples=200)
@given(scenarios(n_max=10, allow_polynomial=False, common_b=True))
def test_closed_form_matches_linear_solve(s):
    x_ref, p_ref = linear_foc_oracle(s)
    if not np.all(x_ref < p_ref):
        # b at or above the all-active price: everyone withdraws
        return
    res = solve_quadratic_closed_form(s)
    assert np.allclose(res.x_star, x_ref, atol=1e-9 * s.p_hat)
    assert res.p_star == pytest.approx(p_ref, abs=1e-9 * s.p_hat)


@settings(max_examples=200)
@given(scenarios(n_max=10, allow_polynomial=False, common_b=True))
def test_closed_form_foc_residual_and_conservation(s):
    res = solve_quadratic_closed_form(s)
    if res.active_set:
        assert np.max(np.abs(foc_residual(s, res.x_star))) <= 1e-10 * max(1.0, s.p_hat)
    assert res.quantities.sum() == pytest.approx(float(s.demand.eval(res.p_star)), abs=1e-9 * max(1.0, s.p_hat))
    assert res.active_sets_agree


@settings(max_examples=100)
@given(scenarios(n_max=10, allow_polynomial=False, common_b=True), st.integers(0, 9), st.floats(1.01, 10.0))
def test_raising_a_cost_never_lowers_price(s, j, factor):
    j %= s.n
    costs = list(s.costs)
    costs[j] = CostModel.quadratic(costs[j].b, costs[j].c * factor)
    base = solve_quadratic_closed_form(s).p_star
    raised = solve_quadratic_closed_form(Scenario(costs, s.demand, s.lipschitz_k)).p_star
    assert raised >= base - 1e-12 * s.p_hat


def test_closed_form_rejections():
    with pytest.raises(NotAffine):
        solve_quadratic_closed_form(nonlinear_market())
    with pytest.raises(HeterogeneousB):
        solve_quadratic_closed_form(Scenario([CostModel.quadratic(0, 1), CostModel.quadratic(1, 1)],
                                             DemandModel.affine(1, 10)))
    general = CostModel.general(lambda q: q ** 3, lambda q: 3 * q ** 2, lambda q: 6 * q)
    with pytest.raises(NotQuadratic):
        solve_quadratic_closed_form(Scenario([general], DemandModel.affine(1, 10)))


def test_closed_form_when_nobody_can_sell():
    res = solve_quadratic_closed_form(linear_market([1.0, 2.0], b=10.0))
    assert res.p_star == 10.0 and np.all(res.x_star == 10.0) and np.all(res.quantities == 0)


def test_closed_form_is_fast():
    s = linear_market([0.5, 2, 3])
    start = time.perf_counter()
    for _ in range(100):
        closed_form_profile(s)
    assert (time.perf_counter() - start) / 100 < 1e-3


# --- all-active ------------------------------------------------------------------


@settings(max_examples=100)
@given(scenarios(n_max=10, allow_polynomial=False, common_b=True))
def test_all_active_matches_closed_form(s):
    cf = solve_quadratic_closed_form(s)
    if not cf.active_set:
        return
    aa = solve_all_active(s)
    assert np.allclose(aa.x_star, cf.x_star, atol=1e-8 * max(1.0, s.p_hat))
    assert np.max(np.abs(foc_residual(s, aa.x_star))) <= 1e-10 * max(1.0, s.p_hat)


def test_all_active_symmetric_producers_get_equal_prices():
    res = solve_all_active(linear_market([1.3] * 5, k=7.0, b=0.5))
    assert np.ptp(res.x_star) <= 1e-12


def test_all_active_requires_affine_demand():
    with pytest.raises(NotAffine):
        solve_all_active(nonlinear_market())


# --- iterated best response ---------------------------------------------------------


def test_iterated_br_single_producer_matches_closed_form():
    s = linear_market([0.8], k=3.0, b=1.0, gamma=2.0)
    it = solve_nash_iterated_br(s, tol=1e-12 * s.p_hat)
    assert it.x_star[0] == pytest.approx(solve_quadratic_closed_form(s).x_star[0], abs=1e-9)


@pytest.mark.parametrize("schedule", ["round-robin", "jacobi"])
def test_iterated_br_schedules_agree_with_closed_form(schedule):
    s = linear_market([0.5, 2, 3])
    it = solve_nash_iterated_br(s, schedule=schedule, tol=1e-11 * s.p_hat)
    assert np.allclose(it.x_star, solve_quadratic_closed_form(s).x_star, atol=1e-7)
    assert it.verified and it.uniqueness == GUARANTEED


def test_iterated_br_without_acceleration_and_with_damping():
    s = linear_market([0.5, 2, 3])
    it = solve_nash_iterated_br(s, tol=1e-10 * s.p_hat, accelerate=False, damping=0.7)
    assert np.allclose(it.x_star, solve_quadratic_closed_form(s).x_star, atol=1e-6)


def test_iterated_br_no_convergence_carries_last_iterate():
    s = linear_market([0.5, 2, 3], k=100.0)
    with pytest.raises(NoConvergence) as info:
        solve_nash_iterated_br(s, max_iter=2, accelerate=False, tol=1e-14 * s.p_hat)
    assert info.value.last_iterate is not None and len(info.value.last_iterate) == 3


def test_iterated_br_rejects_bad_arguments():
    s = linear_market([1.0])
    for kw in ({"tol": 0.0}, {"max_iter": 0}, {"damping": 0.0}, {"damping": 1.5}):
        with pytest.raises(ValueError):
            solve_nash_iterated_br(s, **kw)


@pytest.mark.parametrize("seed", range(5))
def test_multistart_reaches_the_same_equilibrium(seed):
    rng = np.random.default_rng(seed)
    s = random_common_b_scenario(rng)
    ref = solve_quadratic_closed_form(s).x_star
    tol = 1e-11 * s.p_hat
    for init in [np.zeros(s.n), np.full(s.n, s.p_hat)] + [rng.uniform(0, s.p_hat, s.n) for _ in range(2)]:
        it = solve_nash_iterated_br(s, init=init, tol=tol)
        p = it.p_star
        assert np.allclose(np.minimum(it.x_star, p), np.minimum(ref, p), atol=1e-6)


def test_nonlinear_examples_solve_and_verify():
    for s in (nonlinear_market(), nonlinear_market((4.0, 0.5))):
        it = solve_nash_iterated_br(s)
        assert it.verified
        assert it.active_sets_agree
        assert it.uniqueness == NOT_GUARANTEED


def test_inactive_producer_gets_an_interval():
    s = linear_market([1.0, 1.0])
    s = Scenario([CostModel.quadratic(0, 1), CostModel.quadratic(9.5, 1)], s.demand)
    it = solve_nash_iterated_br(s)
    assert 1 not in it.active_set and 1 not in it.cost_active_set
    lo, hi = it.inactive_intervals[1]
    assert lo == pytest.approx(it.p_star) and lo < hi < s.p_hat
    eps = default_epsilon(s, 1e-8 * s.p_hat)
    for x2 in np.linspace(lo, hi, 5):
        assert verify_nash(s, [it.x_star[0], x2], eps).is_epsilon_nash
    # beyond the interval producer 1 gains by raising its price
    assert not verify_nash(s, [it.x_star[0], hi + 1e-3], eps).is_epsilon_nash


def test_two_player_continuum_is_flagged():
    s = Scenario([CostModel.quadratic(0, 1), CostModel.quadratic(0.73, 1)], DemandModel.affine(1, 1))
    assert solve_nash_iterated_br(s).uniqueness == MULTIPLE


# --- verification ------------------------------------------------------------------


@settings(max_examples=100)
@given(scenarios(n_max=6, allow_polynomial=False, common_b=True))
def test_closed_form_output_verifies(s):
    res = solve_quadratic_closed_form(s)
    rep = verify_nash(s, res.x_star, 1e-8 * s.p_hat ** 2 * s.lipschitz_k)
    assert rep.is_epsilon_nash


def test_zero_profile_is_not_nash():
    rep = verify_nash(linear_market([0.5, 2, 3]), [0.0, 0.0, 0.0], 1e-9)
    assert not rep.is_epsilon_nash and rep.worst_gain > 0


def test_verify_gains_match_utility_differences():
    s = linear_market([0.5, 2, 3])
    x = np.array([1.0, 2.0, 3.0])
    rep = verify_nash(s, x, 1e-9)
    for i in range(3):
        y = x.copy()
        y[i] = rep.best_responses[i]
        assert rep.per_producer_gain[i] == pytest.approx(pab_utility(s, y, i) - pab_utility(s, x, i), abs=1e-12)


def test_verify_rejects_nonpositive_epsilon():
    with pytest.raises(ValueError):
        verify_nash(linear_market([1.0]), [0.0], 0.0)


def test_default_epsilon_scales_with_k():
    assert default_epsilon(linear_market([1.0], k=10.0), 1e-8) == pytest.approx(10 * 1e-8 * 10 * 10)


# --- limit, rescale, sweep ---------------------------------------------------------------


def test_limit_example_price():
    assert limit_equilibrium(linear_market([0.5, 2, 3])).p_infinity == pytest.approx(60 / 23, abs=1e-14)


def test_limit_with_b_at_p_hat():
    lim = limit_equilibrium(linear_market([1.0, 3.0], b=10.0))
    assert lim.p_infinity == 10.0
    assert np.all(lim.quantities_infinity == 0) and np.all(lim.utilities_infinity == 0)


@settings(max_examples=200)
@given(scenarios(n_max=10, allow_polynomial=False, common_b=True))
def test_limit_is_perfect_competition(s):
    lim = limit_equilibrium(s)
    assert lim.p_infinity == pytest.approx(perfect_competition_price(s), abs=1e-10 * s.p_hat)
    b = s.costs[0].b
    if b < s.p_hat:
        for cm, q in zip(s.costs, lim.quantities_infinity):
            assert cm.marginal(q) == pytest.approx(lim.p_infinity, abs=1e-10 * max(1.0, s.p_hat))
    assert lim.quantities_infinity.sum() == pytest.approx(float(s.demand.eval(lim.p_infinity)), abs=1e-10 * s.p_hat)


@settings(max_examples=100)
@given(scenarios(n_max=10, allow_polynomial=False, common_b=True))
def test_limit_profit_is_area_between_price_and_marginal_cost(s):
    lim = limit_equilibrium(s)
    for cm, q, u in zip(s.costs, lim.quantities_infinity, lim.utilities_infinity):
        # revenue p q minus cost b q + c q^2 / 2, with p = b + c q
        assert u == pytest.approx(lim.p_infinity * q - cm.cost(q), abs=1e-10 * max(1.0, s.p_hat ** 2))


def test_limit_is_reached_from_large_k():
    s = linear_market([0.5, 2, 3])
    assert abs(solve_quadratic_closed_form(s.with_lipschitz(1e4)).p_star - 60 / 23) <= 1e-3


def test_rescale_identity_and_round_trip():
    s = linear_market([0.5, 2, 3], k=4.0, b=0.5)
    same, x = rescale(s, [1.0, 2.0, 3.0], 4.0)
    assert same == s and x.tolist() == [1.0, 2.0, 3.0]
    one, _ = rescale(s, x, 1.0)
    back, _ = rescale(one, x, 4.0)
    assert back == s


@given(scenario_and_profile(), st.floats(0.1, 100.0))
def test_rescale_preserves_prices_and_scales_utilities(sp, to_k):
    s, x = sp
    t, y = rescale(s, x, to_k)
    assert clearing_price(t, y) == pytest.approx(clearing_price(s, x), abs=1e-10 * s.p_hat)
    for i in range(s.n):
        u = pab_utility(s, x, i) / s.lipschitz_k
        v = pab_utility(t, y, i) / to_k
        assert u == pytest.approx(v, abs=1e-9 * max(1.0, s.p_hat ** 2))


def test_k_sweep_rows():
    s = linear_market([0.5, 2, 3])
    table = k_sweep(s, [1, 100, 1e4])
    assert [round(r.p_star, 2) for r in table.rows[:2]] == [4.82, 2.65]
    assert abs(table.rows[-1].p_star - 60 / 23) <= 1e-3
    assert table.limit.k == math.inf and table.limit.p_star == pytest.approx(60 / 23)
    assert table.monotone_in_k
    single = k_sweep(s, [1.0]).rows[0]
    cf = solve_quadratic_closed_form(s)
    assert single.p_star == cf.p_star and np.array_equal(single.x_star, cf.x_star)


@pytest.mark.parametrize("ks", [[], [1.0, 0.5], [0.0, 1.0], [-1.0]])
def test_k_sweep_rejects_bad_lists(ks):
    with pytest.raises(ValueError):
        k_sweep(linear_market([1.0]), ks)
