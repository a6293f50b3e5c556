"""Rate predictors, initial-state parameters, fitting and empirical property checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .contest import (
    ContestConfig,
    _solve_br,
    _utility,
    best_response,
    is_epsilon_equilibrium,
    kappa,
    others_total,
    utility_gap,
)
from .exceptions import FitError, UnsupportedConfigError
from .selection import FlooredRandom, SelectionContext, SelectionPolicy, UniformRandom


def lglg(x: float) -> float:
    """``log2(log2(x))`` clamped to 0 once ``log2(x) <= 1``."""
    if not x > 0:
        raise ValueError(f"lglg needs x > 0, got {x!r}")
    lg = math.log2(x)
    return math.log2(lg) if lg > 1 else 0.0


# -- rate predictors ---------------------------------------------------------


@dataclass(frozen=True, kw_only=True)
class RatePrediction:
    """Base predictor: ``M * shape(eps) + C``. Subclasses define ``shape``."""

    C: float = 0.0
    M: float = 1.0

    def shape(self, eps: float) -> float:
        raise NotImplementedError

    def predicted_steps(self, eps: float) -> float:
        return predict_steps(self, eps)


@dataclass(frozen=True)
class TwoAgent(RatePrediction):
    """``lglg(1/eps) + lglg(1/gamma) + C``."""

    gamma: float = 0.5

    def shape(self, eps):
        return lglg(1.0 / eps) + lglg(1.0 / self.gamma)


@dataclass(frozen=True)
class TwoAgentCurved(RatePrediction):
    """Curved costs with ``z**p <= c'(z) <= z**q`` on [0, 1]; ``r`` in ``[q, p]``."""

    gamma: float = 0.5
    p: float = 1.0
    q: float = 1.0
    r: Optional[float] = None

    @property
    def exponent(self) -> float:
        return self.q if self.r is None else self.r

    def warm_phase_steps(self) -> float:
        return lglg(1.0 / self.gamma) / math.log2(2.0 + self.exponent)

    def shape(self, eps):
        r = self.exponent
        return lglg(1.0 / eps) + self.warm_phase_steps() - math.log2(math.log2(2.0 + r))


@dataclass(frozen=True)
class NAgentRandom(RatePrediction):
    """``(1/(nL)) lglg(1/gamma) + (lg n / L**2) lg(nK/(eps delta))``."""

    n: int = 3
    L: Optional[float] = None
    gamma: float = 0.5
    K: float = 1.0
    delta: float = 0.05

    def shape(self, eps):
        L = 1.0 / self.n if self.L is None else self.L
        n = self.n
        return lglg(1.0 / self.gamma) / (n * L) + math.log2(n) / L**2 * math.log2(
            n * self.K / (eps * self.delta)
        )


@dataclass(frozen=True)
class NAgentBest(RatePrediction):
    """``lglg(1/gamma) + n lg(nK/eps)``."""

    n: int = 3
    gamma: float = 0.5
    K: float = 1.0

    def shape(self, eps):
        n = self.n
        return lglg(1.0 / self.gamma) + n * math.log2(n * self.K / eps)


def predict_steps(pred: RatePrediction, eps: float) -> float:
    eps = float(eps)
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    return pred.M * pred.shape(eps) + pred.C


@dataclass
class FitReport:
    C: float
    M: float
    residuals: np.ndarray
    max_residual: float
    good_fit: bool
    model: RatePrediction

    def to_json(self) -> dict:
        return {
            "C": self.C,
            "M": self.M,
            "residuals": [float(r) for r in self.residuals],
            "max_residual": self.max_residual,
            "good_fit": self.good_fit,
            "model": type(self.model).__name__,
        }


def fit_rate(measured: Sequence, model: RatePrediction, multiplicative: bool = False, tol: float = 1.0) -> FitReport:
    """Least-squares fit of the free constants of ``model`` to ``(eps, steps)`` data.

    By default only the additive constant is fitted. ``good_fit`` is true when
    every residual is within ``tol`` steps.
    """
    data = [(float(e), float(s)) for e, s in measured]
    if len(data) < 3:
        raise FitError(f"need at least 3 data points, got {len(data)}")
    eps = np.array([e for e, _ in data])
    steps = np.array([s for _, s in data])
    if not np.all(np.isfinite(steps)) or not np.all(np.isfinite(eps)):
        raise FitError("data contains non-finite values")
    if np.any(eps <= 0) or np.any(eps >= 1):
        raise FitError("eps values must lie in (0, 1)")
    if np.any(np.diff(eps) >= 0):
        raise FitError("eps values must be strictly decreasing")
    g = np.array([model.shape(e) for e in eps])
    if multiplicative:
        A = np.column_stack([g, np.ones_like(g)])
        if np.linalg.matrix_rank(A) < 2:
            raise FitError("model shape is constant over the data; cannot fit a scale")
        (M, C), *_ = np.linalg.lstsq(A, steps, rcond=None)
    else:
        M = model.M
        C = float(np.mean(steps - M * g))
    fitted = replace(model, C=float(C), M=float(M))
    resid = steps - (fitted.M * g + fitted.C)
    mx = float(np.max(np.abs(resid)))
    return FitReport(float(C), float(M), resid, mx, mx <= tol, fitted)


# -- initial-state parameters ------------------------------------------------


@dataclass(frozen=True)
class GammaReport:
    gamma: float
    rule: str
    A: tuple = ()
    B: tuple = ()


def _require_norm(cfg: ContestConfig):
    if not (cfg.homogeneous and cfg.normalized):
        raise UnsupportedConfigError("needs a homogeneous normalised contest")


def gamma_two_agent(cfg: ContestConfig, x01: float) -> GammaReport:
    """Effective starting scale of a two-agent run from the opponent's initial output.

    When the marginal cost is flat near 0 the inverse marginal is 0; the actual
    first response is used instead, since it obeys the same bounds.
    """
    _require_norm(cfg)
    if cfg.n != 2:
        raise UnsupportedConfigError("gamma_two_agent needs n = 2")
    x01 = float(x01)
    if x01 < 0 or not math.isfinite(x01):
        raise ValueError(f"x01 must be finite and >= 0, got {x01!r}")
    c = cfg.base_cost
    if 0 < x01 < 1:
        return GammaReport(x01, "initial_output")
    if x01 == 1:
        return GammaReport(1.0, "equilibrium")
    if x01 > 1 and c.c_prime_at_zero < 4.0 / x01:
        g = c.inverse_derivative(1.0 / x01)
        if g > 0 and math.isfinite(g):
            return GammaReport(g, "inverse_marginal")
        return GammaReport(_solve_br(cfg.costs[0], x01, cfg.a), "first_response")
    return GammaReport(cfg.a, "fallback_a")


def gamma_lower_bound_n(cfg: ContestConfig, x0) -> GammaReport:
    """Lower bound on the post-warm-up scale from the initial profile (n >= 3)."""
    _require_norm(cfg)
    if cfg.n < 3:
        raise UnsupportedConfigError("gamma_lower_bound_n needs n >= 3")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (cfg.n,) or np.any(x0 < 0) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite non-negative profile of length n")
    A = tuple(float(v) for v in x0 if v > 0)
    k = kappa(cfg)
    ci = cfg.costs[0]
    if math.isinf(k):
        B = tuple(_solve_br(ci, float(v) + 1.0, cfg.a) for v in x0)
        rule = "zero_marginal_at_origin"
    else:
        B = tuple(
            min((k - float(v)) / 4.0, _solve_br(ci, (k + float(v)) / 4.0, cfg.a)) for v in x0 if v < k
        )
        rule = "positive_marginal"
    return GammaReport(min((cfg.a,) + A + B), rule, A, B)


# -- combinatorial and probabilistic facts ----------------------------------


def partition_witness(p) -> tuple:
    """Largest ``k`` with at least ``k`` entries ``>= 1/(4 k lg n)``, and those entries.

    Returns ``(k, indices)``; ``k = 0`` would mean no witness exists.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("p must be a probability vector with n >= 2 entries")
    if np.any(p < 0) or not np.all(np.isfinite(p)) or abs(math.fsum(p) - 1.0) > 1e-9:
        raise ValueError("p must be non-negative and sum to 1")
    n = p.shape[0]
    lgn = math.log2(n)
    srt = np.sort(p)[::-1]
    ks = np.arange(1, n + 1)
    ok = srt >= 1.0 / (4.0 * ks * lgn)
    if not ok.any():
        return 0, np.empty(0, dtype=int)
    k = int(ks[ok][-1])
    idx = np.flatnonzero(p >= 1.0 / (4.0 * k * lgn))
    return k, idx


@dataclass
class CouponReport:
    samples: np.ndarray
    quantiles: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def tail_probability(self, threshold: float) -> float:
        return float(np.mean(self.samples > threshold))

    def to_json(self) -> dict:
        return {
            "trials": int(self.samples.size),
            "mean": self.mean,
            "quantiles": {k: float(v) for k, v in self.quantiles.items()},
        }


def coupon_all_played_time(n: int, L: Optional[float] = None, policy="uniform", seed=None, trials: int = 1000) -> CouponReport:
    """Steps until every agent has moved at least once, over independent trials.

    ``policy`` is ``"uniform"``, ``"sticky"`` (floored with floor ``L``, spare
    mass on the previous mover) or a :class:`SelectionPolicy`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if n == 1:
        samples = np.ones(trials, dtype=np.int64)
    elif isinstance(policy, str) and policy == "uniform":
        samples = np.array([_uniform_cover(n, rng) for _ in range(trials)], dtype=np.int64)
    else:
        if isinstance(policy, str):
            if policy != "sticky":
                raise ValueError(f"unknown coupon policy {policy!r}")
            pol = FlooredRandom(1.0 / (2 * n) if L is None else L)
        elif isinstance(policy, SelectionPolicy):
            pol = policy
        else:
            raise TypeError("policy must be 'uniform', 'sticky' or a SelectionPolicy")
        pol.validate(n)
        samples = np.array([_policy_cover(n, pol, rng) for _ in range(trials)], dtype=np.int64)
    qs = {f"q{int(q * 100)}": float(np.quantile(samples, q)) for q in (0.1, 0.5, 0.9, 0.95, 0.99)}
    return CouponReport(samples, qs)


def _uniform_cover(n: int, rng) -> int:
    chunk = int(n * math.log(n) + 3 * n) + 16
    seen = np.zeros(n, dtype=bool)
    remaining = n
    offset = 0
    while True:
        draws = rng.integers(n, size=chunk)
        for k, d in enumerate(draws):
            if not seen[d]:
                seen[d] = True
                remaining -= 1
                if remaining == 0:
                    return offset + k + 1
        offset += chunk


def _policy_cover(n: int, pol: SelectionPolicy, rng) -> int:
    played = np.zeros(n, dtype=bool)
    remaining, t, last = n, 0, None
    values = np.zeros(n)
    while remaining:
        i = pol.choose(SelectionContext(n, t, last, rng, values, played))
        if i is None:
            raise ValueError("schedule ended before every agent played")
        if not played[i]:
            played[i] = True
            remaining -= 1
        last = i
        t += 1
    return t


# -- neighbourhood certification --------------------------------------------


@dataclass
class NeighborhoodReport:
    eps: float
    factor: float
    samples: int
    skipped: int
    violations: int
    worst_ratio: float
    worst_profile: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "factor": self.factor,
            "samples": self.samples,
            "skipped": self.skipped,
            "violations": self.violations,
            "worst_ratio": self.worst_ratio,
        }


def certification_factor(cfg: ContestConfig, eps: float) -> float:
    """Approximation factor certified for profiles within ``eps`` of equilibrium."""
    n = cfg.n
    if n == 2:
        return 3.0
    K = cfg.base_cost.lipschitz_on(1.0 - eps, 1.0 + eps)
    return max(4.0 * n, 2.0 * (1.0 + K))


def epsilon_neighborhood_check(cfg: ContestConfig, eps: float, samples: int = 1000, seed=0, profiles=None) -> NeighborhoodReport:
    """Certify sampled near-equilibrium profiles at the proven approximation factor.

    For two agents the samples have ``x_i`` in ``[1 - eps, 1]``; otherwise
    ``||x - 1||_1 <= eps``. Profiles whose best responses are further than
    ``eps`` from 1 fall outside the guarantee and are counted as skipped.
    """
    _require_norm(cfg)
    n = cfg.n
    if not 0 < eps <= 1.0 / (4 * n):
        raise ValueError(f"eps must lie in (0, 1/(4n)] = (0, {1 / (4 * n):g}]")
    factor = certification_factor(cfg, eps)
    rng = np.random.default_rng(seed)
    if profiles is None:
        profiles = [np.ones(n)]
        for _ in range(samples):
            if n == 2:
                profiles.append(1.0 - eps * rng.random(2))
            else:
                d = rng.dirichlet(np.ones(n)) * rng.choice([-1.0, 1.0], size=n)
                profiles.append(1.0 + eps * rng.random() * d)
    worst, worst_x, bad, skipped = 1.0, None, 0, 0
    for x in profiles:
        x = np.asarray(x, dtype=float)
        cert = is_epsilon_equilibrium(cfg, x, factor * eps)
        if n > 2 and np.any(np.abs(cert.best_responses - 1.0) > eps):
            skipped += 1
            continue
        r = float(np.min(cert.ratios))
        if r < worst:
            worst, worst_x = r, x
        if not cert.holds:
            bad += 1
    return NeighborhoodReport(eps, factor, len(profiles), skipped, bad, worst, worst_x)


# -- empirical property checks on solvers and traces -------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int
    violations: int
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "violations": self.violations,
            "detail": self.detail,
        }


def check_two_agent_br_monotonicity(cfg: ContestConfig, samples: int = 10_000, seed=0, tol: float = 2e-13) -> CheckResult:
    """``x < BR(x) < 1`` below 1, ``BR(1) = 1`` and ``BR(x) < 1`` above 1.

    Strict inequalities are tested up to the solver tolerance ``tol``.
    """
    _require_norm(cfg)
    if cfg.n != 2:
        raise UnsupportedConfigError("needs n = 2")
    rng = np.random.default_rng(seed)
    below = rng.random(samples)
    above = 1.0 + rng.exponential(2.0, size=samples)
    bad = 0
    worst = ""
    for v in below:
        if v == 0:
            continue
        y = best_response(cfg, 0, v)
        if not (y - v > -tol and 1.0 - y > -tol):
            bad += 1
            worst = f"x={v!r} BR={y!r}"
    for v in above:
        y = best_response(cfg, 0, v)
        if not 1.0 - y > -tol:
            bad += 1
            worst = f"x={v!r} BR={y!r}"
    y1 = best_response(cfg, 0, 1.0)
    if abs(y1 - 1.0) > 1e-10:
        bad += 1
        worst = f"BR(1)={y1!r}"
    return CheckResult("br_monotonicity", bad == 0, 2 * samples + 1, bad, worst)


def check_persistence(trace) -> CheckResult:
    """Positivity of the total, absorption below kappa, and positive moves below kappa."""
    cfg = trace.cfg
    _require_norm(cfg)
    k = kappa(cfg)
    bad, checked, detail = 0, 0, ""
    prof = list(trace.profiles)
    for idx in range(1, len(prof)):
        prev, cur = prof[idx - 1], prof[idx]
        mover = trace.movers[idx]
        s_prev, s_cur = math.fsum(prev), math.fsum(cur)
        checked += 1
        t = trace.times[idx]
        if t >= 1 and not s_cur > 0:
            bad += 1
            detail = f"t={t}: total output is zero"
        if s_prev < k and not s_cur < k:
            bad += 1
            detail = f"t={t}: total left the region below kappa"
        if s_prev < k and np.count_nonzero(prev > 0) >= 2 and not cur[mover] > 0:
            bad += 1
            detail = f"t={t}: mover {mover} dropped to zero"
    return CheckResult("persistence", bad == 0, checked, bad, detail)


def check_warmup_absorption(trace) -> CheckResult:
    cfg = trace.cfg
    _require_norm(cfg)
    if cfg.n < 3:
        return CheckResult("warmup_absorption", True, 0, 0, "n < 3")
    k = kappa(cfg)
    cap = cfg.n**2 / (4.0 * (cfg.n - 1))
    seen, bad = False, 0
    for x in trace.profiles:
        ok = math.fsum(x) < k and x.max() <= cap and np.count_nonzero(x > 0) >= 2
        if seen and not ok:
            bad += 1
        seen = seen or ok
    return CheckResult("warmup_absorption", bad == 0, len(trace), bad)


def check_two_threshold(trace) -> CheckResult:
    """After warm-up, two agents at or above ``1/(n-1)`` stay that way."""
    cfg = trace.cfg
    n = cfg.n
    if n < 3:
        return CheckResult("two_threshold", True, 0, 0, "n < 3")
    k = kappa(cfg)
    cap = n * n / (4.0 * (n - 1))
    thr = 1.0 / (n - 1)
    warm, seen, bad = False, False, 0
    for x in trace.profiles:
        warm = warm or (math.fsum(x) < k and x.max() <= cap and np.count_nonzero(x > 0) >= 2)
        two = np.count_nonzero(x >= thr) >= 2
        if warm and seen and not two:
            bad += 1
        seen = seen or (warm and two)
    return CheckResult("two_threshold", bad == 0, len(trace), bad)


def check_good_domain(trace, slack: float = 1e-9) -> CheckResult:
    """Moves facing ``s_-i >= 1/(n-1)`` contract towards 1 against ``s_-i - (n-1)``."""
    n = trace.cfg.n
    thr = 1.0 / (n - 1)
    prof = list(trace.profiles)
    bad, checked, detail = 0, 0, ""
    for idx in range(1, len(prof)):
        i = trace.movers[idx]
        prev = prof[idx - 1]
        s = others_total(prev, i)
        if s < thr:
            continue
        checked += 1
        sigma = s - (n - 1)
        dz = prof[idx][i] - 1.0
        if dz * sigma > slack or abs(dz) > 0.5 * abs(sigma) + slack:
            bad += 1
            detail = f"t={trace.times[idx]}: x'-1={dz!r}, s_-i-(n-1)={sigma!r}"
    return CheckResult("good_domain", bad == 0, checked, bad, detail)


def check_reverse_lipschitz(cfg: ContestConfig, samples: int = 10_000, seed=0, radius: float = 0.5) -> CheckResult:
    """``u(x_i) <= (1 - (x_i - BR)**2/(8 n**2)) u(BR)`` near equilibrium."""
    _require_norm(cfg)
    n = cfg.n
    rng = np.random.default_rng(seed)
    bad, checked, detail = 0, 0, ""
    for _ in range(samples):
        d = rng.dirichlet(np.ones(n)) * rng.choice([-1.0, 1.0], size=n)
        x = 1.0 + radius * rng.random() * d
        i = int(rng.integers(n))
        s = others_total(x, i)
        y = _solve_br(cfg.costs[i], s, cfg.a)
        if abs(y - 1.0) > radius:
            continue
        checked += 1
        u_best = _utility(cfg.costs[i], y, s, n)
        gap = utility_gap(cfg.costs[i], n, x[i], y, s)
        need = (x[i] - y) ** 2 / (8.0 * n * n) * u_best
        if gap < need * (1 - 1e-9) - 1e-15:
            bad += 1
            detail = f"x={x.tolist()}, i={i}"
    return CheckResult("reverse_lipschitz", bad == 0, checked, bad, detail)


def check_partition(n: int, samples: int = 10_000, seed=0) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(samples):
        a = rng.uniform(0.05, 5.0)
        p = rng.dirichlet(np.full(n, a))
        k, idx = partition_witness(p)
        if k < 1 or idx.size < k:
            bad += 1
    return CheckResult(f"partition_n{n}", bad == 0, samples, bad)
