"""Demand, cost, scenario and supply-function types.

All types are immutable.  Scalar evaluation uses plain Python arithmetic so
the inner loops of the solvers stay cheap; every method also accepts numpy
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import InconsistentDomain, InvalidProfile, LipschitzViolation, NonPositiveParams

AFFINE = "affine"
POLYNOMIAL = "polynomial"
QUADRATIC = "quadratic"
GENERAL = "general"


def _horner(coeffs, p):
    # coeffs in ascending order; works for floats and arrays alike
    acc = 0.0
    for a in reversed(coeffs):
        acc = acc * p + a
    return acc


def _poly_deriv(coeffs):
    return tuple(k * a for k, a in enumerate(coeffs))[1:] or (0.0,)


def _smallest_positive_root(coeffs, max_doublings=64):
    """Left-most sign change of a polynomial on ``(0, inf)``.

    The bracket is grown by doubling from 1 and then refined by bisection
    until it collapses to adjacent floats.  Returns ``inf`` when no sign
    change is found.
    """
    if _horner(coeffs, 0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if _horner(coeffs, hi) <= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _horner(coeffs, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class DemandModel:
    """Aggregate demand ``D(p)`` on ``[0, p_hat]``.

    Use :meth:`affine` or :meth:`polynomial` rather than the raw constructor.
    ``coeffs`` are ascending powers of ``p``; affine demand is stored in the
    same form so both kinds share one evaluation path.
    """

    kind: str
    coeffs: Tuple[float, ...]
    p_hat: float
    gamma: Optional[float] = None
    _d1: Tuple[float, ...] = field(init=False, repr=False, compare=False)
    _d2: Tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d1 = _poly_deriv(self.coeffs)
        object.__setattr__(self, "_d1", d1)
        object.__setattr__(self, "_d2", _poly_deriv(d1))

    @classmethod
    def affine(cls, gamma: float, p_hat: float) -> "DemandModel":
        """``D(p) = gamma * (p_hat - p)``."""
        if not (gamma > 0 and p_hat > 0):
            raise NonPositiveParams(f"affine demand needs gamma > 0 and p_hat > 0, got {gamma}, {p_hat}")
        gamma, p_hat = float(gamma), float(p_hat)
        return cls(AFFINE, (gamma * p_hat, -gamma), p_hat, gamma)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "DemandModel":
        """Polynomial demand with ascending coefficients.

        ``p_hat`` is the smallest positive root (``inf`` if there is none,
        which :func:`pabgame.market.validate` reports as a violation).
        """
        coeffs = tuple(float(a) for a in coeffs)
        if not coeffs:
            raise ValueError("polynomial demand needs at least one coefficient")
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        return cls(POLYNOMIAL, coeffs, _smallest_positive_root(coeffs))

    @property
    def is_affine(self) -> bool:
        return self.kind == AFFINE

    def eval(self, p):
        if self.kind == AFFINE:
            return self.gamma * (self.p_hat - p)
        return _horner(self.coeffs, p)

    __call__ = eval

    def deriv(self, p):
        return _horner(self._d1, p) + 0.0 * p

    def second_deriv(self, p):
        return _horner(self._d2, p) + 0.0 * p

    def scaled(self, factor: float) -> "DemandModel":
        """Demand multiplied by ``factor``; ``p_hat`` is unchanged."""
        if self.kind == AFFINE:
            return DemandModel(AFFINE, tuple(a * factor for a in self.coeffs), self.p_hat, self.gamma * factor)
        return DemandModel(POLYNOMIAL, tuple(a * factor for a in self.coeffs), self.p_hat)


@dataclass(frozen=True)
class CostModel:
    """Convex non-decreasing production cost.

    Quadratic costs are ``C(q) = b q + c q^2 / 2``.  General costs carry
    user-supplied callables for ``C``, ``C'`` and ``C''``; no numerical
    differentiation is ever done.
    """

    kind: str
    b: Optional[float] = None
    c: Optional[float] = None
    c0: Optional[Callable] = field(default=None, compare=False)
    c1: Optional[Callable] = field(default=None, compare=False)
    c2: Optional[Callable] = field(default=None, compare=False)

    @classmethod
    def quadratic(cls, b: float = 0.0, c: float = 1.0) -> "CostModel":
        if not (b >= 0):
            raise NonPositiveParams(f"quadratic cost needs b >= 0, got {b}")
        if not (c > 0):
            raise NonPositiveParams(f"quadratic cost needs c > 0, got {c}")
        return cls(QUADRATIC, float(b), float(c))

    @classmethod
    def general(cls, cost: Callable, marginal: Callable, curvature: Callable) -> "CostModel":
        return cls(GENERAL, c0=cost, c1=marginal, c2=curvature)

    @property
    def is_quadratic(self) -> bool:
        return self.kind == QUADRATIC

    def cost(self, q):
        if self.kind == QUADRATIC:
            return self.b * q + 0.5 * self.c * q * q
        return self.c0(q)

    __call__ = cost

    def marginal(self, q):
        if self.kind == QUADRATIC:
            return self.b + self.c * q
        return self.c1(q)

    def curvature(self, q):
        if self.kind == QUADRATIC:
            return self.c + 0.0 * q
        return self.c2(q)

    @property
    def marginal_at_zero(self) -> float:
        return float(self.marginal(0.0))

    def rescaled(self, r: float) -> "CostModel":
        """Cost ``q -> r * C(q / r)`` (the map used when changing ``K``)."""
        if self.kind == QUADRATIC:
            return CostModel(QUADRATIC, self.b, self.c / r)
        c0, c1, c2 = self.c0, self.c1, self.c2
        return CostModel(
            GENERAL,
            c0=lambda q: r * c0(q / r),
            c1=lambda q: c1(q / r),
            c2=lambda q: c2(q / r) / r,
        )

    def extended(self, z):
        """Cost continued quadratically to negative quantities."""
        if z >= 0:
            return self.cost(z)
        return self.cost(0.0) + self.marginal(0.0) * z + 0.5 * self.curvature(0.0) * z * z

    def extended_marginal(self, z):
        if z >= 0:
            return self.marginal(z)
        return self.marginal(0.0) + self.curvature(0.0) * z

    def extended_curvature(self, z):
        if z >= 0:
            return self.curvature(z)
        return self.curvature(0.0)


@dataclass(frozen=True)
class Scenario:
    """``n`` producers, a demand model and the Lipschitz bound ``K``."""

    costs: Tuple[CostModel, ...]
    demand: DemandModel
    lipschitz_k: float = 1.0
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        if len(self.costs) < 1:
            raise ValueError("a scenario needs at least one producer")
        if not (self.lipschitz_k > 0):
            raise NonPositiveParams(f"lipschitz_k must be positive, got {self.lipschitz_k}")
        object.__setattr__(self, "lipschitz_k", float(self.lipschitz_k))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(self.costs):
                raise ValueError("labels must match the number of producers")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def p_hat(self) -> float:
        return self.demand.p_hat

    def with_k(self, to_k: float) -> "Scenario":
        """Equivalent scenario with Lipschitz constant ``to_k``.

        Demand is multiplied by ``r = to_k / K`` and costs become
        ``r C(q / r)``, so activation profiles keep their clearing price and
        utilities scale by ``r``.
        """
        if not (to_k > 0):
            raise NonPositiveParams(f"to_k must be positive, got {to_k}")
        if to_k == self.lipschitz_k:
            return self
        r = to_k / self.lipschitz_k
        return Scenario(
            tuple(c.rescaled(r) for c in self.costs),
            self.demand.scaled(r),
            float(to_k),
            self.labels,
        )

    def with_lipschitz(self, k: float) -> "Scenario":
        """Same market (demand and costs unchanged) with Lipschitz bound ``k``."""
        return Scenario(self.costs, self.demand, float(k), self.labels)

    def normalized(self) -> "Scenario":
        """The ``K = 1`` scenario: demand ``D/K``, costs ``C(K q)/K``."""
        return self.with_k(1.0)

    @property
    def is_affine_quadratic(self) -> bool:
        return self.demand.is_affine and all(c.is_quadratic for c in self.costs)

    @property
    def common_b(self) -> Optional[float]:
        """Shared ``b`` of quadratic costs, or ``None`` when not applicable."""
        if not all(c.is_quadratic for c in self.costs):
            return None
        bs = {c.b for c in self.costs}
        return bs.pop() if len(bs) == 1 else None


def check_profile(scenario: Scenario, x, tol: float = 1e-12) -> np.ndarray:
    """Validate an activation profile and return it as a float array.

    Entries within ``tol * p_hat`` outside ``[0, p_hat]`` are clipped;
    anything further out raises :class:`InvalidProfile`.
    """
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape[0] != scenario.n:
        raise InvalidProfile(f"profile has {arr.shape[0]} entries, scenario has {scenario.n} producers")
    p_hat = scenario.p_hat
    slack = tol * max(1.0, p_hat)
    if not np.all(np.isfinite(arr)) or np.any(arr < -slack) or np.any(arr > p_hat + slack):
        raise InvalidProfile(f"activation prices must lie in [0, {p_hat}], got {arr.tolist()}")
    return np.clip(arr, 0.0, p_hat)


@dataclass(frozen=True)
class SampledSupply:
    """Piecewise-linear supply function on ``[0, p_hat]``.

    ``breakpoints`` start at 0 and end at ``p_hat``; ``values`` start at 0
    and are non-decreasing.
    """

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(v) for v in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) != len(vals) or len(bp) < 2:
            raise ValueError("need matching breakpoints/values with at least two points")
        if bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if vals[0] != 0.0:
            raise ValueError("supply must vanish at price 0")
        if any(v1 < v0 for v0, v1 in zip(vals, vals[1:])):
            raise ValueError("supply values must be non-decreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def ramp(cls, x: float, k: float, p_hat: float) -> "SampledSupply":
        """Exact samples of ``k * [p - x]_+`` on ``[0, p_hat]``."""
        if x <= 0.0:
            return cls((0.0, p_hat), (0.0, k * p_hat))
        if x >= p_hat:
            return cls((0.0, p_hat), (0.0, 0.0))
        return cls((0.0, x, p_hat), (0.0, 0.0, k * (p_hat - x)))

    @property
    def p_hat(self) -> float:
        return self.breakpoints[-1]

    def __call__(self, p):
        return np.interp(p, self.breakpoints, self.values)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def lipschitz_check(self, k: float, rtol: float = 1e-12) -> bool:
        return bool(np.all(self.slopes() <= k * (1.0 + rtol)))

    def integral(self, upper: float) -> float:
        """Exact ``int_0^upper S(p) dp`` for ``0 <= upper <= p_hat``."""
        bp, vals = self.breakpoints, self.values
        total = 0.0
        for p0, p1, v0, v1 in zip(bp, bp[1:], vals, vals[1:]):
            if upper <= p0:
                break
            if upper >= p1:
                total += 0.5 * (v0 + v1) * (p1 - p0)
            else:
                vu = v0 + (v1 - v0) * (upper - p0) / (p1 - p0)
                total += 0.5 * (v0 + vu) * (upper - p0)
                break
        return total

    def is_zero(self) -> bool:
        return self.values[-1] == 0.0


def check_supplies(scenario: Scenario, supplies: Sequence[SampledSupply], tol: float = 1e-12):
    """Raise unless every supply is ``K``-Lipschitz on the scenario's domain."""
    if len(supplies) != scenario.n:
        raise ValueError(f"expected {scenario.n} supplies, got {len(supplies)}")
    for j, s in enumerate(supplies):
        if abs(s.p_hat - scenario.p_hat) > tol * max(1.0, scenario.p_hat):
            raise InconsistentDomain(f"supply {j} ends at {s.p_hat}, demand p_hat is {scenario.p_hat}")
        if not s.lipschitz_check(scenario.lipschitz_k):
            raise LipschitzViolation(
                f"supply {j} has slope {s.slopes().max():.6g} > K = {scenario.lipschitz_k}"
            )
