"""Convex cost functions.

Registered kinds are parameterised through their marginal cost::

    linear        c'(z) = coeff
    power         c'(z) = z ** r
    scaled-power  c'(z) = coeff * z ** r

so ``c(z) = coeff * z ** (r + 1) / (r + 1)`` in every registered case.
Arbitrary convex costs use the ``custom`` kind and must supply their own
value, first and second derivative callbacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

Scalar = Callable[[float], float]

REGISTERED_KINDS = ("linear", "power", "scaled-power")

_VALIDATION_GRID = np.linspace(0.0, 10.0, 1001)


@dataclass(frozen=True)
class CostSpec:
    """A convex, increasing cost function with ``c(0) = 0``.

    Instances are immutable. Use the classmethod constructors rather than
    the raw initialiser.
    """

    kind: str
    coeff: float = 1.0
    r: float = 0.0
    value_fn: Optional[Scalar] = None
    derivative_fn: Optional[Scalar] = None
    second_fn: Optional[Scalar] = None
    lipschitz_K: Optional[float] = None
    lipschitz_interval: Optional[tuple] = None
    label: str = ""

    # -- constructors -----------------------------------------------------

    @classmethod
    def linear(cls, coeff: float = 1.0) -> "CostSpec":
        _check_positive(coeff, "coeff")
        return cls("linear", coeff=float(coeff), r=0.0)

    @classmethod
    def power(cls, r: float) -> "CostSpec":
        """Cost with marginal ``z ** r``; ``r = 0`` is the unit linear cost."""
        if not r >= 0:
            raise ValueError(f"exponent r must be >= 0, got {r}")
        return cls("power", coeff=1.0, r=float(r))

    @classmethod
    def scaled_power(cls, coeff: float, r: float) -> "CostSpec":
        _check_positive(coeff, "coeff")
        if not r >= 0:
            raise ValueError(f"exponent r must be >= 0, got {r}")
        return cls("scaled-power", coeff=float(coeff), r=float(r))

    @classmethod
    def monomial(cls, coeff: float, degree: float) -> "CostSpec":
        """``c(z) = coeff * z ** degree`` for ``degree >= 1``."""
        if not degree >= 1:
            raise ValueError(f"degree must be >= 1 for a convex monomial, got {degree}")
        return cls.scaled_power(coeff * degree, degree - 1.0)

    @classmethod
    def custom(
        cls,
        value: Scalar,
        derivative: Scalar,
        second_derivative: Scalar,
        label: str = "custom",
        validate: bool = True,
    ) -> "CostSpec":
        spec = cls(
            "custom",
            value_fn=value,
            derivative_fn=derivative,
            second_fn=second_derivative,
            label=label,
        )
        if validate:
            spec.validate()
        return spec

    # -- evaluation -------------------------------------------------------

    def value(self, z):
        if self.kind == "custom":
            return self.value_fn(z)
        p = self.r + 1.0
        return self.coeff * z**p / p

    def derivative(self, z):
        if self.kind == "custom":
            return self.derivative_fn(z)
        if self.r == 0.0:
            return self.coeff + 0.0 * z
        return self.coeff * z**self.r

    def second_derivative(self, z):
        if self.kind == "custom":
            return self.second_fn(z)
        r = self.r
        if r == 0.0:
            return 0.0 * z
        if r == 1.0:
            return self.coeff + 0.0 * z
        if np.ndim(z) == 0:
            if z == 0.0:
                return math.inf if r < 1.0 else 0.0
            return self.coeff * r * z ** (r - 1.0)
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return self.coeff * r * np.power(z, r - 1.0)

    @property
    def c_prime_at_zero(self) -> float:
        return float(self.derivative(0.0))

    def inverse_derivative(self, y: float) -> float:
        """Smallest ``z >= 0`` with ``c'(z) >= y``; ``inf`` if never reached."""
        if y <= self.c_prime_at_zero:
            return 0.0
        if self.kind != "custom":
            if self.r == 0.0:
                return math.inf
            try:
                return (y / self.coeff) ** (1.0 / self.r)
            except OverflowError:
                return math.inf
        hi = 1.0
        for _ in range(1100):
            if self.derivative(hi) >= y:
                break
            hi *= 2.0
        else:
            return math.inf
        lo = 0.0
        while hi - lo > 1e-15 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if self.derivative(mid) >= y:
                hi = mid
            else:
                lo = mid
        return hi

    # -- derived costs ----------------------------------------------------

    def scaled(self, factor: float) -> "CostSpec":
        """The cost ``factor * c(z)``."""
        _check_positive(factor, "factor")
        if self.kind == "custom":
            v, d, s = self.value_fn, self.derivative_fn, self.second_fn
            return CostSpec.custom(
                lambda z: factor * v(z),
                lambda z: factor * d(z),
                lambda z: factor * s(z),
                label=f"{factor:g}*{self.label}",
                validate=False,
            )
        return _registered(self.coeff * factor, self.r)

    def rescaled_input(self, gamma: float) -> "CostSpec":
        """The cost ``z -> c(gamma * z)``."""
        _check_positive(gamma, "gamma")
        if self.kind == "custom":
            v, d, s = self.value_fn, self.derivative_fn, self.second_fn
            return CostSpec.custom(
                lambda z: v(gamma * z),
                lambda z: gamma * d(gamma * z),
                lambda z: gamma * gamma * s(gamma * z),
                label=f"{self.label}({gamma:g}z)",
                validate=False,
            )
        return _registered(self.coeff * gamma ** (self.r + 1.0), self.r)

    def lipschitz_on(self, lo: float, hi: float) -> float:
        """Lipschitz constant of ``c`` on ``[lo, hi]``; ``c'`` is monotone."""
        if not 0 <= lo <= hi:
            raise ValueError("need 0 <= lo <= hi")
        return float(max(abs(self.derivative(lo)), abs(self.derivative(hi))))

    def with_lipschitz(self, lo: float, hi: float) -> "CostSpec":
        return replace(self, lipschitz_K=self.lipschitz_on(lo, hi), lipschitz_interval=(lo, hi))

    # -- checks -----------------------------------------------------------

    def validate(self, grid: Optional[np.ndarray] = None) -> None:
        """Sample-check ``c(0)=0``, monotonicity, convexity and derivative consistency.

        Raises ValueError on the first violated property.
        """
        zs = _VALIDATION_GRID if grid is None else np.asarray(grid, dtype=float)
        c0 = float(self.value(0.0))
        if abs(c0) > 1e-12:
            raise ValueError(f"{self.label or self.kind}: c(0) = {c0} != 0")
        prev = -math.inf
        h = 1e-5
        for z in zs:
            z = float(z)
            d = float(self.derivative(z))
            dd = float(self.second_derivative(z))
            if not math.isfinite(d) or d < 0 or (z > 0 and d <= 0):
                raise ValueError(f"{self.label or self.kind}: c'({z}) = {d} is not positive")
            if d < prev - 1e-12 * max(1.0, abs(prev)) or dd < -1e-9 * max(1.0, abs(d)):
                raise ValueError(f"{self.label or self.kind}: not convex near z={z}")
            prev = d
            if z >= 2 * h:
                fd = (float(self.value(z + h)) - float(self.value(z - h))) / (2 * h)
                if abs(fd - d) > 1e-6 * max(abs(d), 1e-6):
                    raise ValueError(
                        f"{self.label or self.kind}: derivative inconsistent at z={z} "
                        f"(finite difference {fd}, supplied {d})"
                    )

    # -- serialisation ----------------------------------------------------

    def to_json(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom costs are not JSON-serialisable")
        if self.kind == "linear":
            return {"kind": "linear", "coeff": self.coeff}
        return {"kind": "power", "r": self.r, "coeff": self.coeff}

    @classmethod
    def from_json(cls, obj: dict) -> "CostSpec":
        """Parse ``{"kind": ..., ...}``.

        ``power`` and ``scaled-power`` both read ``r`` (marginal-cost
        exponent) and an optional ``coeff``; ``monomial`` reads ``coeff`` and
        ``degree`` for ``c(z) = coeff * z**degree``.
        """
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValueError(f"cost spec must be an object with a 'kind' key: {obj!r}")
        kind = obj["kind"]
        extra = set(obj) - {"kind", "coeff", "r", "degree"}
        if extra:
            raise ValueError(f"unknown cost spec keys: {sorted(extra)}")
        if kind == "linear":
            return cls.linear(float(obj.get("coeff", 1.0)))
        if kind in ("power", "scaled-power"):
            if "r" not in obj:
                raise ValueError(f"{kind} cost needs 'r'")
            coeff = float(obj.get("coeff", 1.0))
            if coeff == 1.0 and kind == "power":
                return cls.power(float(obj["r"]))
            return cls.scaled_power(coeff, float(obj["r"]))
        if kind == "monomial":
            return cls.monomial(float(obj.get("coeff", 1.0)), float(obj["degree"]))
        raise ValueError(f"unknown cost kind {kind!r}")


def _registered(coeff: float, r: float) -> CostSpec:
    if r == 0.0:
        return CostSpec.linear(coeff)
    if coeff == 1.0:
        return CostSpec.power(r)
    return CostSpec.scaled_power(coeff, r)


def _check_positive(value: float, name: str) -> None:
    if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
