"""Exact best responses in the activation price game.

For fixed opponents the utility of producer ``i`` as a function of its own
activation price ``z`` is, on ``[0, p_hat_i]``,

    u(z) = phi(z)^2 / 2 - z^2 / 2 - C_i(phi(z) - z)

where ``phi(z)`` is the clearing price and ``p_hat_i`` the threshold
price; beyond the threshold ``u`` is constant.  ``phi`` is the inverse of
the strictly increasing map ``f(w) = w + sum_j [w - x_j]_+ - D(w)`` and is
smooth between the images ``f(x_j)`` of the opponents' activation prices.
On each such interval ``u'`` changes sign at most once, from + to -, so
classifying the intervals by the signs of the one-sided derivatives at
their endpoints locates the unique maximiser.

Everything here works in the ``K = 1`` normalisation; activation prices
and clearing prices are the same in every normalisation, utilities scale
by ``K``.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import OutOfRange
from .market import MAX_BISECTIONS, _clearing
from .models import Scenario

SIGN_CLASSES = ("+", "-", "+0-", "0-", "+0")
_UNIMODAL = re.compile(r"^(\+ )*((\+0- )|(\+0 )?(0- )?)(- )*$")


@dataclass(frozen=True)
class BreakpointPartition:
    """Intervals ``[z_k, z_{k+1}]`` of ``[0, p_hat_i]`` and their sign classes."""

    z: Tuple[float, ...]
    classes: Tuple[str, ...]

    @property
    def intervals(self):
        return list(zip(self.z, self.z[1:]))

    def is_unimodal(self) -> bool:
        """True when the class sequence reads ``(+)* [transition] (-)*``."""
        return bool(_UNIMODAL.match("".join(c + " " for c in self.classes)))


@dataclass(frozen=True)
class BestResponseResult:
    maximizer: float
    is_plateau: bool
    utility_at_max: float
    partition: BreakpointPartition
    threshold: float


class _Landscape:
    """Piecewise description of ``phi`` and ``u`` for one producer."""

    def __init__(self, scenario: Scenario, i: int, x_minus_i):
        self.k = scenario.lipschitz_k
        norm = scenario.normalized()
        self.demand = norm.demand
        self.cost = norm.costs[i]
        self.p_hat = norm.p_hat
        others = np.sort(np.asarray(x_minus_i, dtype=float).reshape(-1))
        if others.shape[0] != scenario.n - 1:
            raise ValueError(f"expected {scenario.n - 1} opponent prices, got {others.shape[0]}")
        if others.size and (others.min() < -1e-12 * self.p_hat or others.max() > self.p_hat * (1 + 1e-12)):
            raise OutOfRange("opponent activation prices must lie in [0, p_hat]")
        others = np.clip(others, 0.0, self.p_hat)
        self.others = others
        self.threshold = _clearing(self.demand, 1.0, others)
        phi0 = _clearing(self.demand, 1.0, np.append(others, 0.0))

        merge = 1e-12 * self.p_hat
        w = [phi0]
        for xj in others:
            if phi0 + merge < xj < self.threshold - merge and xj - w[-1] > merge:
                w.append(float(xj))
        w.append(self.threshold)
        if len(w) > 2 and w[-1] - w[-2] <= merge:
            del w[-2]
        if w[-1] - w[0] <= merge:
            w = [w[0], w[-1]] if w[-1] > w[0] else [w[0], w[0]]
        self.w = w

        self.active = []
        for w0, w1 in zip(w, w[1:]):
            mid = 0.5 * (w0 + w1)
            sel = others[others < mid]
            self.active.append((int(sel.size), float(sel.sum())))
        z = [0.0] + [self.f(wk) for wk in w[1:-1]] + [self.threshold]
        for k in range(1, len(z)):
            z[k] = max(z[k], z[k - 1])
        self.z = z

    # -- maps ---------------------------------------------------------------

    def f(self, w):
        return w + float(np.maximum(w - self.others, 0.0).sum()) - self.demand.eval(w)

    def piece(self, z, side=None):
        """Index of the interval containing ``z``; ``side`` picks at a breakpoint."""
        zs = self.z
        last = len(zs) - 2
        if side == "left":
            return min(max(bisect.bisect_left(zs, z) - 1, 0), last)
        return min(max(bisect.bisect_right(zs, z) - 1, 0), last)

    def phi(self, z, k=None):
        if k is None:
            k = self.piece(z)
        m, total = self.active[k]
        lo, hi = self.w[k], self.w[k + 1]
        d = self.demand
        if d.is_affine:
            w = (z + total + d.gamma * d.p_hat) / (1.0 + m + d.gamma)
            return min(max(w, lo), hi)
        return _solve_increasing(lambda v: (1.0 + m) * v - total - d.eval(v) - z,
                                 lambda v: 1.0 + m - d.deriv(v), lo, hi)

    def dphi(self, w, k):
        m, _ = self.active[k]
        return 1.0 / (1.0 + m - self.demand.deriv(w))

    def utility(self, z):
        """Normalised utility ``u(z)``."""
        if z >= self.threshold:
            return -self.cost.cost(0.0)
        w = self.phi(z)
        return 0.5 * (w * w - z * z) - self.cost.cost(w - z)

    def du(self, z, k):
        w = self.phi(z, k)
        return (w - self.cost.marginal(w - z)) * (self.dphi(w, k) - 1.0) + w - z

    # -- partition and maximiser ------------------------------------------

    def classify(self, tol):
        classes = []
        for k, (z0, z1) in enumerate(zip(self.z, self.z[1:])):
            if z1 - z0 < 1e-10:
                classes.append("+" if self.du(0.5 * (z0 + z1), k) > 0 else "-")
                continue
            left, right = self.du(z0, k), self.du(z1, k)
            lpos, lneg = left > tol, left < -tol
            rpos, rneg = right > tol, right < -tol
            if lpos and rpos:
                classes.append("+")
            elif lneg and rneg:
                classes.append("-")
            elif lpos and rneg:
                classes.append("+0-")
            elif not (lpos or lneg) and rneg:
                classes.append("0-")
            elif lpos and not (rpos or rneg):
                classes.append("+0")
            elif not (lpos or lneg or rpos or rneg):
                classes.append("+" if self.du(0.5 * (z0 + z1), k) > 0 else "-")
            elif not (lpos or lneg) and rpos:
                classes.append("+")
            else:
                # - then +: excluded by concavity of D and convexity of C
                classes.append("?")
        return tuple(classes)

    def stationary_point(self, k):
        lo, hi = self.z[k], self.z[k + 1]
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.du(mid, k) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def _solve_increasing(h, dh, lo, hi):
    """Root of increasing ``h`` on ``[lo, hi]``: Newton steps kept inside a bisection bracket."""
    hlo, hhi = h(lo), h(hi)
    if hlo >= 0:
        return lo
    if hhi <= 0:
        return hi
    v = 0.5 * (lo + hi)
    for _ in range(MAX_BISECTIONS):
        hv = h(v)
        if hv == 0:
            return v
        if hv < 0:
            lo = v
        else:
            hi = v
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
        slope = dh(v)
        step = v - hv / slope if slope > 0 else None
        v = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    return v


def _zero_tol(p_hat):
    return 1e-12 * max(1.0, p_hat)


def f_eval(scenario: Scenario, i: int, x_minus_i, w: float) -> float:
    """``f(w) = w + sum_{j != i} [w - x_j]_+ - D(w)`` with ``D`` normalised to ``K = 1``."""
    norm = scenario.normalized()
    others = np.asarray(x_minus_i, dtype=float)
    return float(w + np.maximum(w - others, 0.0).sum() - norm.demand.eval(w))


def phi_eval(scenario: Scenario, i: int, x_minus_i, z: float) -> float:
    """Clearing price as a function of producer ``i``'s activation price.

    Defined on ``[0, p_hat_i]`` as the inverse of :func:`f_eval`.
    """
    land = _Landscape(scenario, i, x_minus_i)
    slack = 1e-12 * max(1.0, land.p_hat)
    if z < -slack or z > land.threshold + slack:
        raise OutOfRange(f"z = {z} outside [0, {land.threshold}]")
    return land.phi(min(max(z, 0.0), land.threshold))


def utility_derivative(scenario: Scenario, i: int, x_minus_i, z: float, side: Optional[str] = None):
    """Derivative of the normalised utility at activation price ``z``.

    Returns ``None`` at a breakpoint of the partition unless ``side`` is
    ``"left"`` or ``"right"``, in which case the one-sided derivative of
    the adjacent smooth piece is returned.  Beyond the threshold price the
    utility is constant and the derivative is 0.
    """
    land = _Landscape(scenario, i, x_minus_i)
    if z > land.threshold:
        return 0.0
    merge = 1e-12 * max(1.0, land.p_hat)
    at_break = any(abs(z - zk) <= merge for zk in land.z)
    if at_break and side is None:
        return None
    k = land.piece(z, side)
    return land.du(z, k)


def normalized_utility(scenario: Scenario, i: int, x_minus_i, z: float) -> float:
    """Utility of producer ``i`` at activation price ``z`` divided by ``K``."""
    return _Landscape(scenario, i, x_minus_i).utility(z)


def best_response(scenario: Scenario, i: int, x_minus_i) -> BestResponseResult:
    """Unique maximiser of producer ``i``'s utility on ``[0, p_hat_i]``.

    When ``C_i'(0) >= p_hat_i`` every price in ``[p_hat_i, p_hat]`` is
    optimal (``is_plateau``) and the left end ``p_hat_i`` is reported.
    """
    land = _Landscape(scenario, i, x_minus_i)
    classes = land.classify(_zero_tol(land.p_hat))
    z_star = land.threshold
    for k, cls in enumerate(classes):
        if cls in ("-", "0-", "?"):
            z_star = land.z[k]
            break
        if cls == "+0-":
            z_star = land.stationary_point(k)
            break
    is_plateau = land.cost.marginal_at_zero >= land.threshold
    return BestResponseResult(
        maximizer=float(z_star),
        is_plateau=bool(is_plateau),
        utility_at_max=land.k * land.utility(z_star),
        partition=BreakpointPartition(tuple(land.z), classes),
        threshold=float(land.threshold),
    )


def insert(x_minus_i, i: int, xi: float) -> np.ndarray:
    """Full profile from opponents' prices and producer ``i``'s own price."""
    return np.insert(np.asarray(x_minus_i, dtype=float), i, xi)


def drop(x, i: int) -> np.ndarray:
    return np.delete(np.asarray(x, dtype=float), i)


def best_response_grid_oracle(scenario: Scenario, i: int, x_minus_i, grid_n: int) -> float:
    """Brute-force argmax of the utility on ``grid_n`` uniform prices in ``[0, p_hat]``.

    Independent of the partition machinery: each grid point's clearing
    price is found by vectorised bisection on the clearing equation.  Ties
    go to the smallest price.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    k = scenario.lipschitz_k
    demand = scenario.demand
    p_hat = scenario.p_hat
    others = np.asarray(x_minus_i, dtype=float).reshape(1, -1)
    zs = np.linspace(0.0, p_hat, grid_n)
    lo = np.zeros(grid_n)
    hi = np.full(grid_n, p_hat)
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        supply = np.maximum(mid[:, None] - others, 0.0).sum(axis=1) + np.maximum(mid - zs, 0.0)
        excess = demand.eval(mid) - k * supply
        pos = excess > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    p = 0.5 * (lo + hi)
    q = np.maximum(p - zs, 0.0)
    cost = scenario.costs[i]
    try:
        c = np.asarray(cost.cost(k * q), dtype=float)
        if c.shape != q.shape:
            raise TypeError
    except TypeError:
        c = np.array([cost.cost(v) for v in k * q])
    u = k * (p * q - 0.5 * q * q) - c
    return float(zs[int(np.argmax(u))])
