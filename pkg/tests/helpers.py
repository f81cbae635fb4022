import numpy as np
from hypothesis import strategies as st

from pabgame.models import CostModel, DemandModel, Scenario


def linear_market(c, k=1.0, b=0.0, gamma=1.0, p_hat=10.0):
    return Scenario([CostModel.quadratic(b, ci) for ci in c], DemandModel.affine(gamma, p_hat), lipschitz_k=k)


def nonlinear_market(c3=(2.0, 0.5)):
    return Scenario(
        [CostModel.quadratic(0.5, 0.5), CostModel.quadratic(1.0, 4.0), CostModel.quadratic(*c3)],
        DemandModel.polynomial([10.0, -1.0, -0.2]),
    )


pos = st.floats(0.05, 5.0)


@st.composite
def demands(draw, allow_polynomial=True):
    if allow_polynomial and draw(st.booleans()):
        a0 = draw(st.floats(1.0, 20.0))
        a1 = draw(st.floats(0.1, 5.0))
        a2 = draw(st.floats(0.0, 1.0))
        return DemandModel.polynomial([a0, -a1, -a2])
    return DemandModel.affine(draw(st.floats(0.2, 5.0)), draw(st.floats(1.0, 20.0)))


@st.composite
def scenarios(draw, n_max=6, allow_polynomial=True, common_b=False, k_range=(0.1, 1000.0)):
    n = draw(st.integers(1, n_max))
    demand = draw(demands(allow_polynomial))
    b_max = 0.9 * demand.p_hat
    if common_b:
        b = draw(st.floats(0.0, b_max))
        bs = [b] * n
    else:
        bs = draw(st.lists(st.floats(0.0, b_max), min_size=n, max_size=n))
    cs = draw(st.lists(pos, min_size=n, max_size=n))
    k = draw(st.floats(*k_range))
    return Scenario([CostModel.quadratic(b, c) for b, c in zip(bs, cs)], demand, lipschitz_k=k)


@st.composite
def scenario_and_profile(draw, **kw):
    s = draw(scenarios(**kw))
    u = draw(st.lists(st.floats(0.0, 1.0), min_size=s.n, max_size=s.n))
    return s, np.array(u) * s.p_hat


def random_common_b_scenario(rng, n_max=10, k_range=(0.1, 1e3)):
    n = int(rng.integers(1, n_max + 1))
    k = float(10 ** rng.uniform(np.log10(k_range[0]), np.log10(k_range[1])))
    gamma = rng.uniform(0.2, 5.0)
    p_hat = rng.uniform(5.5, 20.0)
    b = rng.uniform(0.0, 5.0)
    cs = rng.uniform(0.05, 5.0, n)
    return linear_market(cs, k=k, b=b, gamma=gamma, p_hat=p_hat)


def random_demand(rng):
    if rng.random() < 0.5:
        return DemandModel.polynomial([rng.uniform(1.0, 20.0), -rng.uniform(0.1, 5.0), -rng.uniform(0.0, 1.0)])
    return DemandModel.affine(rng.uniform(0.2, 5.0), rng.uniform(1.0, 20.0))


def random_scenario(rng, n_max=6, k_range=(0.1, 1e3)):
    n = int(rng.integers(1, n_max + 1))
    demand = random_demand(rng)
    bs = rng.uniform(0.0, 0.9 * demand.p_hat, n)
    cs = rng.uniform(0.05, 5.0, n)
    k = float(10 ** rng.uniform(np.log10(k_range[0]), np.log10(k_range[1])))
    return Scenario([CostModel.quadratic(b, c) for b, c in zip(bs, cs)], demand, lipschitz_k=k)


def random_instance(rng, **kw):
    s = random_scenario(rng, **kw)
    return s, rng.uniform(0.0, 1.0, s.n) * s.p_hat


def random_sampled_supply(rng, k, p_hat, pieces=6):
    """Continuous non-decreasing piecewise-linear supply with slopes in ``[0, k]``, zero at 0."""
    from pabgame.models import SampledSupply

    inner = np.sort(rng.uniform(0.0, p_hat, pieces - 1))
    ps = np.concatenate(([0.0], inner, [p_hat]))
    ps = np.unique(ps)
    slopes = rng.uniform(0.0, k * (1 - 1e-9), len(ps) - 1) * (rng.random(len(ps) - 1) < 0.8)
    values = np.concatenate(([0.0], np.cumsum(slopes * np.diff(ps))))
    return SampledSupply(tuple(ps.tolist()), tuple(values.tolist()))
