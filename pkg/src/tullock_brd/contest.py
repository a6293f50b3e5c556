"""Contest definitions, utilities and the best-response solver.

Agent ``i`` earns ``x_i / (x_i + s_-i) - c_i(x_i)``; when every agent produces
nothing the prize is split evenly. Profiles are plain 1-D numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import check_finite_nonneg, check_index, check_profile
from .costs import CostSpec
from .exceptions import NumericalRangeError, UnsupportedConfigError

DEFAULT_A = 1e-3
BR_REL_TOL = 1e-13
MAX_DOUBLINGS = 60


@dataclass(frozen=True)
class ContestConfig:
    """An ``n``-agent contest.

    ``base_cost`` is set only for normalised homogeneous contests, where each
    agent pays ``(n-1)/n**2 * base_cost`` and ``base_cost'(1) == 1``.
    """

    costs: tuple
    a: float = DEFAULT_A
    base_cost: Optional[CostSpec] = None

    def __post_init__(self):
        costs = tuple(self.costs)
        object.__setattr__(self, "costs", costs)
        if len(costs) < 2:
            raise ValueError(f"a contest needs n >= 2 agents, got {len(costs)}")
        for c in costs:
            if not isinstance(c, CostSpec):
                raise TypeError(f"costs must be CostSpec instances, got {type(c).__name__}")
        if not (0 < self.a < 1):
            raise ValueError(f"a must lie in (0, 1), got {self.a}")

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def homogeneous(self) -> bool:
        first = self.costs[0]
        return all(c is first or c == first for c in self.costs[1:])

    @property
    def normalized(self) -> bool:
        return self.base_cost is not None

    @classmethod
    def normalized_homogeneous(cls, n: int, base_cost: CostSpec, a: float = DEFAULT_A):
        """Homogeneous contest with the equilibrium at the all-ones profile."""
        if n < 2:
            raise ValueError(f"a contest needs n >= 2 agents, got {n}")
        slope = float(base_cost.derivative(1.0))
        if abs(slope - 1.0) > 1e-9:
            raise ValueError(f"base cost must satisfy c'(1) = 1, got {slope!r}")
        ci = base_cost.scaled((n - 1) / n**2)
        return cls(costs=(ci,) * n, a=a, base_cost=base_cost)

    @classmethod
    def homogeneous(cls, n: int, cost: CostSpec, a: float = DEFAULT_A):
        """Every agent pays exactly ``cost`` (no normalisation applied)."""
        return cls(costs=(cost,) * n, a=a)

    @classmethod
    def from_raw_homogeneous(cls, n: int, raw_cost: CostSpec, a: float = DEFAULT_A):
        """Normalise ``raw_cost`` and return ``(cfg, gamma)``; outputs scale by gamma."""
        base, gamma = normalize_homogeneous(raw_cost, n)
        return cls.normalized_homogeneous(n, base, a), gamma

    def to_json(self) -> dict:
        if self.normalized:
            return {"n": self.n, "cost": self.base_cost.to_json(), "a": self.a}
        return {"costs": [c.to_json() for c in self.costs], "a": self.a}


def _require_normalized(cfg: ContestConfig, what: str) -> None:
    if not (cfg.homogeneous and cfg.normalized):
        raise UnsupportedConfigError(f"{what} needs a homogeneous normalised contest")


def utility(cfg: ContestConfig, i: int, x) -> float:
    x = check_profile(x, cfg.n)
    i = check_index(i, cfg.n)
    return _utility(cfg.costs[i], float(x[i]), others_total(x, i), cfg.n)


def others_total(x, i: int) -> float:
    """``sum_{j != i} x_j``, correctly rounded even when ``x_i`` dominates."""
    return math.fsum(np.append(x, -x[i]))


def _utility(cost: CostSpec, xi: float, s_minus: float, n: int) -> float:
    s = xi + s_minus
    share = 1.0 / n if s == 0 else xi / s
    return share - float(cost.value(xi))


def utility_derivative(cfg: ContestConfig, i: int, z: float, s_minus: float) -> float:
    i = check_index(i, cfg.n)
    z = check_finite_nonneg(z, "z")
    s_minus = float(s_minus)
    if not (s_minus > 0 and math.isfinite(s_minus)):
        raise ValueError(f"s_minus must be positive and finite, got {s_minus!r}")
    return s_minus / (z + s_minus) ** 2 - float(cfg.costs[i].derivative(z))


def _marginal(cost: CostSpec) -> Callable[[float], float]:
    if cost.kind == "custom":
        return lambda z: float(cost.derivative_fn(z))
    k, r = cost.coeff, cost.r
    if r == 0.0:
        return lambda z: k
    return lambda z: k * z**r


def best_response(cfg: ContestConfig, i: int, s_minus: float) -> float:
    """Utility-maximising output of agent ``i`` against opponents' total ``s_minus``."""
    i = check_index(i, cfg.n)
    s = float(s_minus)
    if not math.isfinite(s):
        raise ValueError(f"s_minus must be finite, got {s_minus!r}")
    if s < 0:
        raise ValueError(f"s_minus must be >= 0, got {s_minus!r}")
    return _solve_br(cfg.costs[i], s, cfg.a)


def _solve_br(cost: CostSpec, s: float, a: float) -> float:
    if s == 0.0:
        return a
    cp = _marginal(cost)
    if 1.0 / s - cp(0.0) <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    doublings = 0
    while s / (hi + s) ** 2 - cp(hi) >= 0:
        lo = hi
        hi *= 2.0
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise NumericalRangeError(f"best response not bracketed below {hi:g} (s_minus={s!r})")
    while hi - lo > BR_REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if s / (mid + s) ** 2 - cp(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def best_response_linear_closed_form(n: int, s_minus: float) -> float:
    """Best response under the normalised unit linear cost."""
    s = float(s_minus)
    if not (s > 0 and math.isfinite(s)):
        raise ValueError(f"s_minus must be positive and finite, got {s_minus!r}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return max(0.0, n * math.sqrt(s / (n - 1)) - s)


def _cost_increment(cost: CostSpec, x: float, y: float) -> float:
    """``c(y) - c(x)`` without catastrophic cancellation for registered kinds."""
    if cost.kind == "custom":
        return float(cost.value(y)) - float(cost.value(x))
    d = y - x
    if cost.r == 0.0:
        return cost.coeff * d
    p = cost.r + 1.0
    if x > 0 and abs(d) <= x:
        # close values: difference form; otherwise plain subtraction is already accurate
        return cost.coeff / p * x**p * math.expm1(p * math.log1p(d / x))
    return cost.coeff / p * (y**p - x**p)


def utility_gap(cost: CostSpec, n: int, xi: float, y: float, s_minus: float) -> float:
    """``u(y) - u(xi)`` at fixed opponents' total, computed in difference form."""
    if s_minus == 0.0:
        return _utility(cost, y, 0.0, n) - _utility(cost, xi, 0.0, n)
    share = s_minus / (y + s_minus) * ((y - xi) / (xi + s_minus))
    return share - _cost_increment(cost, xi, y)


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Per-agent outcome of an approximate-equilibrium check."""

    holds: bool
    eps: float
    ratios: np.ndarray
    gaps: np.ndarray
    best_responses: np.ndarray
    vacuous: np.ndarray = field(repr=False)

    def __bool__(self) -> bool:
        return self.holds

    @property
    def worst_agent(self) -> int:
        return int(np.argmin(self.ratios))


def is_epsilon_equilibrium(cfg: ContestConfig, x, eps: float) -> EquilibriumCertificate:
    """Check ``u_i(x) >= (1 - eps) * u_i(BR_i)`` for every agent.

    The comparison is made on the utility gap ``u(BR) - u(x_i)``, evaluated
    in difference form so that tiny ``eps`` stays meaningful in floating point.
    When the best response is 0 its utility is 0 and the agent passes only
    if its own utility is non-negative. A negative best-response utility can
    only come from rounding; such agents pass and are flagged ``vacuous``.
    """
    x = check_profile(x, cfg.n)
    eps = float(eps)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    n = cfg.n
    total = math.fsum(x)
    ratios = np.empty(n)
    gaps = np.empty(n)
    brs = np.empty(n)
    vac = np.zeros(n, dtype=bool)
    holds = True
    for i in range(n):
        xi = float(x[i])
        s_minus = others_total(x, i)
        cost = cfg.costs[i]
        y = _solve_br(cost, s_minus, cfg.a)
        u_best = _utility(cost, y, s_minus, n)
        gap = utility_gap(cost, n, xi, y, s_minus)
        brs[i] = y
        gaps[i] = gap
        if u_best < 0:
            vac[i] = True
            ratios[i] = 1.0
            continue
        u_here = _utility(cost, xi, s_minus, n)
        ratios[i] = u_here / u_best if u_best > 0 else (1.0 if u_here >= 0 else -math.inf)
        if gap > eps * u_best:
            holds = False
    return EquilibriumCertificate(holds, eps, ratios, gaps, brs, vac)


def equilibrium_profile(cfg: ContestConfig) -> np.ndarray:
    _require_normalized(cfg, "the closed-form equilibrium")
    return np.ones(cfg.n)


def kappa(cfg: ContestConfig) -> float:
    """``n**2 / ((n-1) c'(0))`` for the base cost; ``inf`` when ``c'(0) = 0``."""
    _require_normalized(cfg, "kappa")
    c0 = cfg.base_cost.c_prime_at_zero
    n = cfg.n
    return math.inf if c0 == 0 else n * n / ((n - 1) * c0)


def normalize_homogeneous(raw_cost: CostSpec, n: int):
    """Rescale outputs so a homogeneous contest has its equilibrium at all ones.

    Returns ``(c, gamma)`` with ``c(x) = c_hat(gamma * x)``, where
    ``c_hat = n**2/(n-1) * raw_cost`` and ``gamma * c_hat'(gamma) = 1``.
    An output ``x`` of the normalised contest corresponds to ``gamma * x``
    in the raw one.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    c_hat = raw_cost.scaled(n * n / (n - 1))
    if c_hat.kind != "custom":
        gamma = (1.0 / c_hat.coeff) ** (1.0 / (c_hat.r + 1.0))
        if not (1e-300 <= gamma <= 1e300):
            raise NumericalRangeError(f"scale factor {gamma!r} outside [1e-300, 1e300]")
    else:
        gamma = _bisect_scale(c_hat)
    return c_hat.rescaled_input(gamma), gamma


def _bisect_scale(c_hat: CostSpec) -> float:
    def h(log_g):
        g = math.exp(log_g)
        return g * float(c_hat.derivative(g)) - 1.0

    lo, hi = math.log(1e-300), math.log(1e300)
    if h(lo) > 0 or h(hi) < 0:
        raise NumericalRangeError("no scale factor in [1e-300, 1e300] normalises this cost")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def logit_transform(
    f_hat: Callable[[float], float],
    c_hat: CostSpec,
    *,
    f_hat_prime: Callable[[float], float],
    f_hat_second: Optional[Callable[[float], float]] = None,
    sample_hi: float = 10.0,
) -> CostSpec:
    """Express a contest with success function ``f_hat`` as a plain contest.

    With ``x = f_hat(y)`` the composed cost is ``c(x) = c_hat(f_hat^{-1}(x))``.
    ``f_hat`` must be strictly increasing with ``f_hat(0) = 0``.
    """
    ys = np.linspace(0.0, sample_hi, 1001)
    vals = np.array([float(f_hat(y)) for y in ys])
    if not np.all(np.isfinite(vals)) or np.any(np.diff(vals) <= 0):
        raise ValueError("f_hat is not strictly increasing on the sampled range")
    if abs(vals[0]) > 1e-12:
        raise ValueError(f"f_hat(0) must be 0, got {vals[0]!r}")

    def inverse(x):
        x = float(x)
        if x <= 0:
            return 0.0
        hi = 1.0
        while float(f_hat(hi)) < x:
            hi *= 2.0
            if hi > 1e300:
                raise NumericalRangeError(f"f_hat never reaches {x!r}")
        lo = 0.0
        while hi - lo > 4e-16 * max(1e-300, hi):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if float(f_hat(mid)) < x:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def fp(y):
        return float(f_hat_prime(y))

    def value(x):
        return float(c_hat.value(inverse(x)))

    def derivative(x):
        y = inverse(x)
        d = fp(y)
        if math.isinf(d):
            return 0.0
        return float(c_hat.derivative(y)) / d

    def second_fd(x):
        h = 1e-6 * max(1.0, abs(x))
        lo = max(0.0, x - h)
        return (derivative(x + h) - derivative(lo)) / (x + h - lo)

    def second(x):
        if f_hat_second is None:
            return second_fd(x)
        y = inverse(x)
        d = fp(y)
        if math.isinf(d):
            return second_fd(x)
        num = float(c_hat.second_derivative(y)) * d - float(c_hat.derivative(y)) * float(f_hat_second(y))
        return num / d**3

    return CostSpec.custom(value, derivative, second, label="logit")
