"""Best-response dynamics: stepping, full runs, traces and trace analysis."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_profile
from .contest import (
    ContestConfig,
    _solve_br,
    is_epsilon_equilibrium,
    kappa,
    others_total,
)
from .exceptions import ScheduleExhausted, UnsupportedConfigError
from .selection import SelectionContext, SelectionPolicy, largest_on_larger_side

FULL_STORAGE_LIMIT = 10**7
RING_SIZE = 10**4


@dataclass(frozen=True)
class StoppingRule:
    """Composite stopping rule; any rule that is set may end the run.

    Rules are checked on every state in the order eps, l1, cycle, max_steps.
    """

    eps: Optional[float] = None
    l1_eps: Optional[float] = None
    target: Optional[tuple] = None
    max_steps: Optional[int] = None
    cycle_tol: Optional[float] = None
    max_period: int = 8

    def __post_init__(self):
        if all(v is None for v in (self.eps, self.l1_eps, self.max_steps, self.cycle_tol)):
            raise ValueError("a stopping rule needs at least one of eps, l1_eps, max_steps, cycle_tol")
        if self.eps is not None and not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.l1_eps is not None:
            if not self.l1_eps >= 0:
                raise ValueError(f"l1_eps must be >= 0, got {self.l1_eps}")
        if self.max_steps is not None and (int(self.max_steps) != self.max_steps or self.max_steps < 0):
            raise ValueError(f"max_steps must be a non-negative integer, got {self.max_steps}")
        if self.cycle_tol is not None and not self.cycle_tol > 0:
            raise ValueError(f"cycle_tol must be positive, got {self.cycle_tol}")
        if self.max_period < 2:
            raise ValueError("max_period must be >= 2")
        if self.target is not None:
            object.__setattr__(self, "target", tuple(float(v) for v in self.target))

    def to_json(self) -> dict:
        out = {}
        for key in ("eps", "l1_eps", "target", "max_steps", "cycle_tol"):
            v = getattr(self, key)
            if v is not None:
                out[key] = list(v) if key == "target" else v
        if self.cycle_tol is not None:
            out["max_period"] = self.max_period
        return out


@dataclass(frozen=True)
class DynamicsState:
    """Snapshot of a run. ``rng`` is shared with successor states and advances."""

    t: int
    x: np.ndarray
    last_mover: Optional[int]
    rng: np.random.Generator
    played: np.ndarray

    @classmethod
    def initial(cls, cfg: ContestConfig, x0, seed=None) -> "DynamicsState":
        x = check_profile(x0, cfg.n, "x0")
        x.setflags(write=False)
        played = np.zeros(cfg.n, dtype=bool)
        played.setflags(write=False)
        return cls(0, x, None, np.random.default_rng(seed), played)


@dataclass(frozen=True)
class CycleReport:
    period: int
    profiles: np.ndarray
    movers: tuple
    start_t: int


@dataclass
class TraceSummary:
    converged: bool
    stop_reason: str
    steps: int
    convergence_step: Optional[int]
    final: np.ndarray
    cycle: Optional[CycleReport] = None
    warmup_time: Optional[int] = None
    potential: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_json(self) -> dict:
        out = {
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "steps": self.steps,
            "convergence_step": self.convergence_step,
            "final": [float(v) for v in self.final],
            "warmup_time": self.warmup_time,
        }
        if self.potential.size:
            out["final_potential"] = float(self.potential[-1])
        if self.cycle is not None:
            out["cycle"] = {
                "period": self.cycle.period,
                "start_t": self.cycle.start_t,
                "movers": list(self.cycle.movers),
                "profiles": [[float(v) for v in row] for row in self.cycle.profiles],
            }
        return out


@dataclass
class Trace:
    """Recorded run. ``times[k]``, ``movers[k]``, ``profiles[k]`` form one record.

    ``movers[0]`` is ``None`` for the initial state. When the run is long the
    records keep only the last ``RING_SIZE`` states and ``truncated`` is set.
    """

    cfg: ContestConfig
    times: list
    movers: list
    profiles: list
    summary: TraceSummary
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.cfg.n

    def __len__(self) -> int:
        return len(self.times)

    @property
    def records(self):
        return list(zip(self.times, self.movers, self.profiles))

    def profile_array(self) -> np.ndarray:
        return np.array(list(self.profiles))

    def columns(self) -> list:
        return ["t", "mover"] + [f"x_{i}" for i in range(self.n)]

    def rows(self):
        for t, m, x in zip(self.times, self.movers, self.profiles):
            yield [t, m] + [float(v) for v in x]


def _context(cfg, t, x, last_mover, rng, played):
    return SelectionContext(cfg.n, t, last_mover, rng, x, played, cfg)


def step(cfg: ContestConfig, state: DynamicsState, policy: SelectionPolicy):
    """One move: the chosen agent replaces its output by its best response."""
    policy.validate(cfg.n)
    ctx = _context(cfg, state.t, state.x, state.last_mover, state.rng, state.played)
    mover = policy.choose(ctx)
    if mover is None:
        raise ScheduleExhausted(f"schedule exhausted at t={state.t}")
    x = state.x.copy()
    s_minus = others_total(x, mover)
    x[mover] = _solve_br(cfg.costs[mover], s_minus, cfg.a)
    x.setflags(write=False)
    played = state.played.copy()
    played[mover] = True
    played.setflags(write=False)
    return DynamicsState(state.t + 1, x, int(mover), state.rng, played), int(mover)


class _EpsScreen:
    """Cheap sound test that can prove a profile is not an eps-equilibrium.

    One Newton step from each agent's current output gives a candidate
    deviation ``y``. If ``u(y)`` already beats ``u(x_i)`` by more than the
    allowed factor, so does the best response and the full check is skipped.
    """

    def __init__(self, cfg: ContestConfig):
        self.active = all(c.kind != "custom" for c in cfg.costs)
        if self.active:
            self.k = np.array([c.coeff for c in cfg.costs])
            self.r = np.array([c.r for c in cfg.costs])
            self.p = self.r + 1.0

    def rejects(self, x: np.ndarray, eps: float) -> bool:
        if not self.active:
            return False
        s = np.array([others_total(x, i) for i in range(x.shape[0])])
        if np.any(s <= 0):
            return False
        k, r, p = self.k, self.r, self.p
        with np.errstate(all="ignore"):
            xs = x + s
            d1 = s / xs**2 - k * np.power(x, r)
            d2 = -2.0 * s / xs**3 - k * r * np.power(x, r - 1.0)
            y = np.where(np.isfinite(d2) & (d2 < 0), np.maximum(x - d1 / d2, 0.0), x)
            ys = y + s
            share = s / ys * ((y - x) / xs)
            rel = np.where(x > 0, (y - x) / np.where(x > 0, x, 1.0), 0.0)
            inc = np.where(
                (x > 0) & (np.abs(y - x) <= x),
                k / p * np.power(x, p) * np.expm1(p * np.log1p(rel)),
                k / p * (np.power(y, p) - np.power(x, p)),
            )
            gap = share - inc
            uy = y / ys - k / p * np.power(y, p)
            ux = x / xs - k / p * np.power(x, p)
            bad = ((uy > 0) & (gap > eps * uy)) | ((ux < 0) & (eps < 1))
        return bool(np.any(bad))


def _tail_period(profiles, movers, tol: float, max_period: int) -> Optional[int]:
    m = len(profiles)
    last = profiles[-1]

    def close(a, b):
        return np.all(np.abs(a - b) <= tol * np.maximum(np.abs(a), np.abs(b)) + 1e-300)

    if m >= 2 and all(close(profiles[m - 1 - j], last) for j in range(1, min(m, 2 * max_period))):
        return None
    for p in range(2, max_period + 1):
        if 2 * p > m:
            break
        ok = True
        for k in range(m - p, m):
            if movers[k] != movers[k - p] or not close(profiles[k], profiles[k - p]):
                ok = False
                break
        if ok:
            return p
    return None


def detect_cycle(trace: Trace, tol: float = 1e-6, max_period: int = 8) -> Optional[CycleReport]:
    """Smallest period ``p`` in ``[2, max_period]`` repeated by the trace tail.

    The last ``2p`` profiles must repeat with relative tolerance ``tol`` and
    the mover sequence must repeat with the same period. A tail that is
    constant (a fixed point) is not a cycle.
    """
    if max_period < 2:
        raise ValueError("max_period must be >= 2")
    if len(trace) < 3 * max_period:
        raise ValueError(f"trace has {len(trace)} records; need at least {3 * max_period}")
    profiles = [np.asarray(p) for p in trace.profiles]
    movers = list(trace.movers)
    p = _tail_period(profiles, movers, tol, max_period)
    if p is None:
        return None
    return CycleReport(p, np.array(profiles[-p:]), tuple(movers[-p:]), int(trace.times[-p]))


@dataclass(frozen=True)
class WarmupReport:
    holds: bool
    total_below_kappa: bool
    outputs_below_cap: bool
    two_positive: bool
    kappa: float
    cap: float

    def __bool__(self):
        return self.holds


def _warmup_limits(cfg: ContestConfig):
    if not (cfg.homogeneous and cfg.normalized):
        raise UnsupportedConfigError("warm-up conditions need a homogeneous normalised contest")
    if cfg.n < 3:
        raise UnsupportedConfigError("warm-up conditions are defined for n >= 3")
    n = cfg.n
    return kappa(cfg), n * n / (4.0 * (n - 1))


def warmup_satisfied(cfg: ContestConfig, x) -> WarmupReport:
    """Check the three warm-up conditions on a single profile."""
    k, cap = _warmup_limits(cfg)
    x = check_profile(x, cfg.n)
    a = math.fsum(x) < k
    b = bool(np.all(x <= cap))
    c = int(np.count_nonzero(x > 0)) >= 2
    return WarmupReport(a and b and c, a, b, c, k, cap)


def warmup_completion_time(trace: Trace) -> Optional[int]:
    """Earliest recorded time from which every later state satisfies warm-up.

    ``None`` when the last recorded state does not satisfy it.
    """
    if trace.truncated:
        return trace.summary.warmup_time
    k, cap = _warmup_limits(trace.cfg)
    result = None
    for t, x in zip(reversed(trace.times), reversed(trace.profiles)):
        ok = math.fsum(x) < k and bool(np.all(x <= cap)) and int(np.count_nonzero(x > 0)) >= 2
        if not ok:
            break
        result = t
    return result


def two_agent_z_sequence(trace: Trace) -> np.ndarray:
    """Collapse an alternating two-agent trace to one scalar sequence.

    ``z[0]`` is the initial output of the first mover's opponent and
    ``z[k]`` is the output chosen at move ``k``.
    """
    if trace.n != 2:
        raise ValueError("the z-sequence is defined for two agents")
    movers = trace.movers[1:]
    if trace.truncated:
        raise ValueError("trace is truncated")
    for a, b in zip(movers, movers[1:]):
        if a == b:
            raise ValueError("trace does not alternate between the two agents")
    if not movers:
        x0 = trace.profiles[0]
        return np.array([float(x0[0])])
    z = [float(trace.profiles[0][1 - movers[0]])]
    for k, m in enumerate(movers, start=1):
        z.append(float(trace.profiles[k][m]))
    return np.array(z)


def best_case_greedy_mover(cfg: ContestConfig, state: DynamicsState) -> int:
    """Heuristic fast schedule for homogeneous normalised contests.

    Round robin until every agent has played and the warm-up conditions hold,
    then the largest deviation from 1 on the side with larger total deviation,
    never the agent that just moved.
    """
    if not (cfg.homogeneous and cfg.normalized):
        raise UnsupportedConfigError("best-case selection needs a homogeneous normalised contest")
    n = cfg.n
    last = state.last_mover
    if n == 2:
        return 0 if last is None else 1 - last
    if not np.all(state.played) or not warmup_satisfied(cfg, state.x).holds:
        return 0 if last is None else (last + 1) % n
    return largest_on_larger_side(np.asarray(state.x) - 1.0, exclude=last)


@dataclass
class BestCaseGreedy(SelectionPolicy):
    name = "best_case"

    def choose(self, ctx):
        st = DynamicsState(ctx.t, ctx.values, ctx.last_mover, ctx.rng, ctx.played)
        return best_case_greedy_mover(ctx.cfg, st)


def _potential_of(x: np.ndarray) -> float:
    z = x - 1.0
    pos = z > 0
    return max(math.fsum(z[pos]), -math.fsum(z[~pos]))


def run(
    cfg: ContestConfig,
    x0,
    policy: SelectionPolicy,
    stop: StoppingRule,
    seed=None,
    rng: Optional[np.random.Generator] = None,
) -> Trace:
    """Iterate best-response moves until ``stop`` fires; deterministic given ``seed``."""
    n = cfg.n
    policy.validate(n)
    x = check_profile(x0, n, "x0")
    if stop.target is not None and len(stop.target) != n:
        raise ValueError(f"target profile must have length {n}")
    if stop.l1_eps is not None and stop.target is None:
        raise ValueError("l1 stopping needs a target profile")
    rng = np.random.default_rng(seed) if rng is None else rng
    target = None if stop.target is None else np.array(stop.target)
    track = cfg.homogeneous and cfg.normalized
    track_warm = track and n >= 3
    if track_warm:
        kap, cap = _warmup_limits(cfg)
    screen = _EpsScreen(cfg) if stop.eps is not None else None
    cyc_window = 3 * stop.max_period
    cyc_prof: deque = deque(maxlen=cyc_window)
    cyc_mov: deque = deque(maxlen=cyc_window)

    times = [0]
    movers = [None]
    profiles: list | deque = [x.copy()]
    truncated = False
    potential = [_potential_of(x)] if track else []
    played = np.zeros(n, dtype=bool)
    last_bad_warm = -1
    t = 0
    last = None
    cycle = None
    reason = None
    conv_step = None
    costs = cfg.costs
    a = cfg.a

    while True:
        total = math.fsum(x)
        if track_warm:
            ok = total < kap and x.max() <= cap and np.count_nonzero(x > 0) >= 2
            if not ok:
                last_bad_warm = t
        if stop.eps is not None and not screen.rejects(x, stop.eps):
            if is_epsilon_equilibrium(cfg, x, stop.eps).holds:
                reason, conv_step = "epsilon", t
                break
        if target is not None and stop.l1_eps is not None:
            if math.fsum(np.abs(x - target)) <= stop.l1_eps:
                reason, conv_step = "l1", t
                break
        if stop.cycle_tol is not None:
            cyc_prof.append(x.copy())
            cyc_mov.append(last)
            if len(cyc_prof) >= 5:
                p = _tail_period(list(cyc_prof), list(cyc_mov), stop.cycle_tol, stop.max_period)
                if p is not None:
                    cycle = CycleReport(
                        p, np.array(list(cyc_prof)[-p:]), tuple(list(cyc_mov)[-p:]), t - p + 1
                    )
                    reason = "cycle"
                    break
        if stop.max_steps is not None and t >= stop.max_steps:
            reason = "max_steps"
            break
        mover = policy.choose(_context(cfg, t, x, last, rng, played))
        if mover is None:
            reason = "schedule_end"
            break
        s_minus = others_total(x, mover)
        x = x.copy()
        x[mover] = _solve_br(costs[mover], s_minus, a)
        played[mover] = True
        last = int(mover)
        t += 1
        times.append(t)
        movers.append(last)
        profiles.append(x)
        if track:
            potential.append(_potential_of(x))
        if not truncated and len(profiles) * n > FULL_STORAGE_LIMIT:
            truncated = True
            times = deque(times[-RING_SIZE:], maxlen=RING_SIZE)
            movers = deque(movers[-RING_SIZE:], maxlen=RING_SIZE)
            profiles = deque(list(profiles)[-RING_SIZE:], maxlen=RING_SIZE)

    warm_time = None
    if track_warm and last_bad_warm < t:
        warm_time = last_bad_warm + 1
    summary = TraceSummary(
        converged=reason in ("epsilon", "l1"),
        stop_reason=reason,
        steps=t,
        convergence_step=conv_step,
        final=x.copy(),
        cycle=cycle,
        warmup_time=warm_time,
        potential=np.array(potential),
    )
    meta = {"policy": policy.to_json(), "stop": stop.to_json(), "seed": seed}
    return Trace(cfg, list(times), list(movers), list(profiles), summary, truncated, meta)
