"""Rules for choosing which agent moves next.

A policy sees a :class:`SelectionContext` and returns an agent index, or
``None`` when an explicit schedule has run out. Randomised policies draw
only from ``ctx.rng`` so runs are reproducible from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


@dataclass
class SelectionContext:
    n: int
    t: int
    last_mover: Optional[int]
    rng: np.random.Generator
    values: np.ndarray
    played: np.ndarray
    cfg: object = None


class SelectionPolicy:
    """Base class. Subclasses implement :meth:`choose`."""

    name = "policy"
    randomized = False

    def validate(self, n: int) -> None:
        pass

    def choose(self, ctx: SelectionContext) -> Optional[int]:
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": self.name}


@dataclass
class Alternating(SelectionPolicy):
    """Two agents take turns; ``first`` moves at t = 0."""

    first: int = 1
    name = "alternating"

    def validate(self, n):
        if n != 2:
            raise ValueError(f"alternating selection needs n = 2, got n = {n}")
        if self.first not in (0, 1):
            raise ValueError(f"first mover must be 0 or 1, got {self.first}")

    def choose(self, ctx):
        if ctx.last_mover is None:
            return self.first
        return 1 - ctx.last_mover

    def to_json(self):
        return {"kind": self.name, "first": self.first}


@dataclass
class UniformRandom(SelectionPolicy):
    name = "uniform"
    randomized = True

    def choose(self, ctx):
        return int(ctx.rng.integers(ctx.n))


def floored_probabilities(n: int, L: float, last_mover: Optional[int], weights=None) -> np.ndarray:
    """Mover distribution giving every agent other than ``last_mover`` at least ``L``.

    The leftover mass goes by ``weights`` (normalised); without weights it all
    goes to the last mover, whose repeat move is wasted.
    """
    if last_mover is None:
        if n * L >= 1:
            return np.full(n, 1.0 / n)
        p = np.full(n, L)
        rest = 1.0 - n * L
        if weights is None:
            p += rest / n
        else:
            p += rest * weights / weights.sum()
        return p
    p = np.full(n, L)
    p[last_mover] = 0.0
    rest = 1.0 - (n - 1) * L
    if rest < -1e-12:
        raise ValueError(f"floor L={L} exceeds 1/(n-1) for n={n}")
    rest = max(rest, 0.0)
    if weights is None:
        p[last_mover] += rest
    else:
        p += rest * weights / weights.sum()
    return p


@dataclass
class FlooredRandom(SelectionPolicy):
    """Random mover with a probability floor ``L`` for every non-last agent.

    ``weights``, if given, maps the context to non-negative scores used to
    spread the mass left over after the floors.
    """

    L: float
    weights: Optional[Callable[[SelectionContext], Sequence[float]]] = field(default=None, repr=False)
    name = "floored"
    randomized = True

    def validate(self, n):
        if not (0 < self.L <= 1.0 / (n - 1) + 1e-15):
            raise ValueError(f"floor L must lie in (0, 1/(n-1)] = (0, {1.0 / (n - 1):g}], got {self.L}")

    def probabilities(self, ctx) -> np.ndarray:
        w = None
        if self.weights is not None:
            w = np.asarray(self.weights(ctx), dtype=float)
            if w.shape != (ctx.n,) or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
                raise ValueError("weights must be a non-negative, non-zero vector of length n")
        return floored_probabilities(ctx.n, self.L, ctx.last_mover, w)

    def choose(self, ctx):
        p = self.probabilities(ctx)
        u = ctx.rng.random()
        i = int(np.searchsorted(np.cumsum(p), u, side="right"))
        return min(i, ctx.n - 1)

    def to_json(self):
        return {"kind": self.name, "L": self.L}


@dataclass
class RoundRobin(SelectionPolicy):
    name = "round_robin"

    def choose(self, ctx):
        return ctx.t % ctx.n


@dataclass
class ExplicitSchedule(SelectionPolicy):
    """Play ``agents`` in order; with ``repeat`` the list cycles forever."""

    agents: Sequence[int]
    repeat: bool = False
    name = "schedule"

    def __post_init__(self):
        self.agents = tuple(int(a) for a in self.agents)
        if self.repeat and not self.agents:
            raise ValueError("a repeating schedule needs at least one agent")

    def validate(self, n):
        bad = [a for a in self.agents if not 0 <= a < n]
        if bad:
            raise ValueError(f"schedule entries out of range for n={n}: {bad}")

    def choose(self, ctx):
        if ctx.t < len(self.agents):
            return self.agents[ctx.t]
        if self.repeat:
            return self.agents[ctx.t % len(self.agents)]
        return None

    def to_json(self):
        return {"kind": self.name, "agents": list(self.agents), "repeat": self.repeat}


def largest_on_larger_side(z, exclude: Optional[int] = None) -> int:
    """Index of the largest ``|z_i|`` on the side holding more total deviation.

    Zeros count on the non-positive side. Ties go to the lowest index. If the
    chosen side has no eligible entry the other side is used.
    """
    z = np.asarray(z, dtype=float)
    pos = z > 0
    V = float(np.sum(z[pos]))
    W = float(-np.sum(z[~pos]))
    sides = (pos, ~pos) if V >= W else (~pos, pos)
    mag = np.abs(z)
    for side in sides:
        mask = side.copy()
        if exclude is not None:
            mask[exclude] = False
        if mask.any():
            cand = np.where(mask, mag, -1.0)
            return int(np.argmax(cand))
    raise ValueError("no eligible coordinate")
