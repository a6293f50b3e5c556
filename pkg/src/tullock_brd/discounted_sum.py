"""Discounted-sum dynamics ``z_i <- -beta * sum_{j != i} z_j`` and its weak potential.

This is the deviation form ``z = x - 1`` of best-response dynamics near the
equilibrium, with the contraction factor left to an adversary bounded by B.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._validation import check_vector
from .exceptions import BetaContractError
from .selection import (
    ExplicitSchedule,
    SelectionContext,
    SelectionPolicy,
    largest_on_larger_side,
)

FULL_STORAGE_LIMIT = 10**7
RING_SIZE = 10**4


# -- beta policies ---------------------------------------------------------


class BetaPolicy:
    name = "beta"
    deterministic = True

    def draw(self, z: np.ndarray, i: int, t: int, B: float, rng) -> float:
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": self.name}


@dataclass
class ConstantBeta(BetaPolicy):
    value: float
    name = "constant"

    def draw(self, z, i, t, B, rng):
        return self.value

    def to_json(self):
        return {"kind": self.name, "value": self.value}


@dataclass
class UniformBeta(BetaPolicy):
    """``beta ~ U[0, B]`` independently at every step."""

    name = "uniform"
    deterministic = False

    def draw(self, z, i, t, B, rng):
        return B * rng.random()


@dataclass
class AdversarialMax(BetaPolicy):
    """Always the largest allowed coefficient ``B``."""

    name = "max"

    def draw(self, z, i, t, B, rng):
        return B


@dataclass
class CallbackBeta(BetaPolicy):
    """User rule ``fn(z, i, t) -> beta``; assumed to depend only on its arguments."""

    fn: Callable = field(repr=False)
    name = "callback"

    def draw(self, z, i, t, B, rng):
        return self.fn(z, i, t)


def _checked_beta(policy: BetaPolicy, z, i, t, B, rng) -> float:
    beta = float(policy.draw(z, i, t, B, rng))
    if not (0.0 <= beta <= B):
        raise BetaContractError(f"beta={beta!r} outside [0, {B}] at t={t}, i={i}")
    return beta


# -- state, potential, step --------------------------------------------------


@dataclass(frozen=True)
class DissumState:
    z: np.ndarray
    B: float
    beta_policy: BetaPolicy = field(default_factory=AdversarialMax)
    t: int = 0
    last_mover: Optional[int] = None
    rng: Optional[np.random.Generator] = field(default=None, repr=False)

    def __post_init__(self):
        z = check_vector(self.z)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        _check_B(self.B)
        if self.rng is None:
            object.__setattr__(self, "rng", np.random.default_rng())

    @property
    def n(self) -> int:
        return self.z.shape[0]


def _check_B(B: float) -> None:
    if not (0.0 <= B < 1.0):
        raise ValueError(f"B must lie in [0, 1), got {B!r}")


@dataclass(frozen=True)
class PotentialValue:
    V: float
    W: float

    @property
    def f(self) -> float:
        return max(self.V, self.W)


def potential(z) -> PotentialValue:
    """Positive mass ``V`` and non-positive mass ``W`` of ``z`` (zeros count as non-positive)."""
    z = np.asarray(z, dtype=float)
    pos = z > 0
    return PotentialValue(math.fsum(z[pos]), -math.fsum(z[~pos]))


def sigma_minus(z: np.ndarray, i: int) -> float:
    """``sum_{j != i} z_j``, correctly rounded."""
    return math.fsum(np.append(z, -z[i]))


def dissum_step(state: DissumState, i: int) -> DissumState:
    n = state.n
    if not 0 <= i < n:
        raise IndexError(f"coordinate {i} out of range for n={n}")
    z = np.array(state.z)
    beta = _checked_beta(state.beta_policy, state.z, i, state.t, state.B, state.rng)
    z[i] = -beta * sigma_minus(z, i) + 0.0
    return replace(state, z=z, t=state.t + 1, last_mover=int(i))


# -- selection ---------------------------------------------------------------


@dataclass
class BestCase(SelectionPolicy):
    """Largest coordinate on the larger side of the potential.

    The previous mover is skipped only when picking it again provably changes
    nothing, which needs a deterministic beta policy.
    """

    name = "best_case"

    def choose(self, ctx):
        z = ctx.values
        i = largest_on_larger_side(z)
        if i == ctx.last_mover and ctx.cfg is not None:
            beta_policy, B = ctx.cfg
            if beta_policy.deterministic:
                beta = float(beta_policy.draw(z, i, ctx.t, B, None))
                if -beta * sigma_minus(z, i) == z[i] and ctx.n > 1:
                    i = largest_on_larger_side(z, exclude=i)
        return i


# -- runs --------------------------------------------------------------------


@dataclass
class DissumSummary:
    converged: bool
    stop_reason: str
    steps: int
    convergence_step: Optional[int]
    final: np.ndarray
    f_history: np.ndarray
    l1_history: np.ndarray

    def to_json(self) -> dict:
        return {
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "steps": self.steps,
            "convergence_step": self.convergence_step,
            "final": [float(v) for v in self.final],
            "final_f": float(self.f_history[-1]),
            "final_l1": float(self.l1_history[-1]),
        }


@dataclass
class DissumTrace:
    n: int
    times: list
    movers: list
    profiles: list
    f_values: list
    summary: DissumSummary
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def columns(self) -> list:
        return ["t", "mover", "f"] + [f"z_{i}" for i in range(self.n)]

    def rows(self):
        for t, m, f, z in zip(self.times, self.movers, self.f_values, self.profiles):
            yield [t, m, float(f)] + [float(v) for v in z]


def run_dissum(
    z0,
    B: float,
    beta_policy: Optional[BetaPolicy] = None,
    selection: Optional[SelectionPolicy] = None,
    eps: Optional[float] = None,
    max_steps: Optional[int] = None,
    seed=None,
) -> DissumTrace:
    """Run until ``||z||_1 <= eps``, ``max_steps`` moves, or the schedule ends."""
    z = check_vector(z0, "z0")
    _check_B(B)
    if eps is None and max_steps is None:
        raise ValueError("need eps or max_steps")
    if eps is not None and not eps >= 0:
        raise ValueError(f"eps must be >= 0, got {eps!r}")
    n = z.shape[0]
    beta_policy = AdversarialMax() if beta_policy is None else beta_policy
    selection = BestCase() if selection is None else selection
    selection.validate(n)
    rng = np.random.default_rng(seed)
    played = np.zeros(n, dtype=bool)

    pv = potential(z)
    times, movers, profiles, fs = [0], [None], [z.copy()], [pv.f]
    l1s = [pv.V + pv.W]
    truncated = False
    t, last = 0, None
    reason, conv = None, None
    while True:
        l1 = l1s[-1]
        if eps is not None and l1 <= eps:
            reason, conv = "l1", t
            break
        if max_steps is not None and t >= max_steps:
            reason = "max_steps"
            break
        ctx = SelectionContext(n, t, last, rng, z, played, (beta_policy, B))
        i = selection.choose(ctx)
        if i is None:
            reason = "schedule_end"
            break
        beta = _checked_beta(beta_policy, z, i, t, B, rng)
        z = z.copy()
        z[i] = -beta * sigma_minus(z, i) + 0.0
        played[i] = True
        last = int(i)
        t += 1
        pv = potential(z)
        times.append(t)
        movers.append(last)
        profiles.append(z)
        fs.append(pv.f)
        l1s.append(math.fsum(np.abs(z)))
        if not truncated and len(profiles) * n > FULL_STORAGE_LIMIT:
            truncated = True
            times = deque(times[-RING_SIZE:], maxlen=RING_SIZE)
            movers = deque(movers[-RING_SIZE:], maxlen=RING_SIZE)
            profiles = deque(profiles[-RING_SIZE:], maxlen=RING_SIZE)

    f_hist = np.array(fs)
    summary = DissumSummary(
        reason == "l1", reason, t, conv, z.copy(), f_hist, np.array(l1s)
    )
    keep = len(profiles)
    meta = {"B": B, "beta": beta_policy.to_json(), "selection": selection.to_json(), "seed": seed}
    return DissumTrace(
        n, list(times), list(movers), list(profiles), list(fs[-keep:]), summary, truncated, meta
    )


# -- lower-bound instances ---------------------------------------------------


@dataclass(frozen=True)
class LowerBoundInstance:
    z0: np.ndarray
    B: float
    beta_policy: BetaPolicy
    schedule: SelectionPolicy


def lower_bound_example(kind: str, n: int = None, kappa: float = None, B: float = None) -> LowerBoundInstance:
    """Instances on which the discounted-sum dynamics is provably slow.

    ``all_ones``: every coordinate starts at 1, so each must move at least once.
    ``two_coordinate``: two coordinates at ``kappa`` with ``beta = B``; the
    two play alternately and the potential shrinks by exactly ``B`` per move.
    """
    if kind == "all_ones":
        if n is None or n < 1:
            raise ValueError("all_ones needs n >= 1")
        B = 0.5 if B is None else B
        _check_B(B)
        return LowerBoundInstance(np.ones(n), B, AdversarialMax(), BestCase())
    if kind == "two_coordinate":
        if kappa is None or not kappa > 0:
            raise ValueError("two_coordinate needs kappa > 0")
        if B is None:
            raise ValueError("two_coordinate needs B")
        _check_B(B)
        if B < 0.5:
            raise ValueError(f"two_coordinate needs B >= 1/2, got {B}")
        n = 2 if n is None else n
        if n < 2:
            raise ValueError("two_coordinate needs n >= 2")
        z0 = np.zeros(n)
        z0[:2] = kappa
        return LowerBoundInstance(z0, B, ConstantBeta(B), ExplicitSchedule([0, 1], repeat=True))
    raise ValueError(f"unknown lower-bound instance {kind!r}")
