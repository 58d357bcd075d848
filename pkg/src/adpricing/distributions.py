"""Bounded probability laws for funnel rates and auction values.

Four families are supported: uniform(lo, hi), beta(a, b), point(v) and
finite discrete laws. Each exposes exact analytic moments and seeded
sampling. Rate constraints (support inside [0, 1]) are enforced at game
validation, not here, so the same laws can describe unbounded-scale
values such as dice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Distribution",
    "Uniform",
    "Beta",
    "Point",
    "Discrete",
    "moments",
    "uniform_die",
    "two_point_surrogate",
    "distribution_from_dict",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class Distribution:
    """Common interface; use the concrete subclasses."""

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """(lo, hi) bounds; samples always land inside."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def is_finite_discrete(self) -> bool:
        return False

    def atoms(self) -> list[tuple[float, float]]:
        """(value, prob) pairs for finite laws; error otherwise."""
        raise TypeError(f"{type(self).__name__} is not a finite discrete law")


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("uniform bounds must be finite")
        if self.hi < self.lo:
            raise ValueError(f"uniform requires lo <= hi, got ({self.lo}, {self.hi})")

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size=size)


@dataclass(frozen=True)
class Beta(Distribution):
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"beta requires a, b > 0, got ({self.a}, {self.b})")

    def mean(self) -> float:
        return self.a / (self.a + self.b)

    def variance(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1.0))

    def support(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def sample(self, rng, size=None):
        return rng.beta(self.a, self.b, size=size)


@dataclass(frozen=True)
class Point(Distribution):
    v: float

    def __post_init__(self):
        if not math.isfinite(self.v):
            raise ValueError("point mass must be finite")

    def mean(self) -> float:
        return self.v

    def variance(self) -> float:
        return 0.0

    def support(self) -> tuple[float, float]:
        return (self.v, self.v)

    def sample(self, rng, size=None):
        if size is None:
            return self.v
        return np.full(size, self.v, dtype=np.float64)

    def is_finite_discrete(self) -> bool:
        return True

    def atoms(self):
        return [(self.v, 1.0)]


@dataclass(frozen=True)
class Discrete(Distribution):
    values: tuple[float, ...]
    probs: tuple[float, ...]
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("discrete law needs at least one atom")
        if len(self.values) != len(self.probs):
            raise ValueError("values and probs must have equal length")
        if any(p < 0 for p in self.probs):
            raise ValueError("discrete probabilities must be nonnegative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > _PROB_TOL:
            raise ValueError(f"discrete probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "_cum", np.cumsum(np.asarray(self.probs, dtype=np.float64)))

    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    def variance(self) -> float:
        mu = self.mean()
        return math.fsum(p * (v - mu) ** 2 for v, p in zip(self.values, self.probs))

    def support(self) -> tuple[float, float]:
        return (min(self.values), max(self.values))

    def sample(self, rng, size=None):
        # inverse-CDF on a uniform draw; keeps one rng draw per sample
        u = rng.random(size=size)
        idx = np.searchsorted(self._cum, u, side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        vals = np.asarray(self.values, dtype=np.float64)
        if size is None:
            return float(vals[idx])
        return vals[idx]

    def is_finite_discrete(self) -> bool:
        return True

    def atoms(self):
        return list(zip(self.values, self.probs))


def moments(dist: Distribution) -> tuple[float, float]:
    """Exact (mean, variance) of the declared law."""
    return (dist.mean(), dist.variance())


def uniform_die(sides: int = 6) -> Discrete:
    """Fair die as a finite law (handy enumeration fixture)."""
    p = 1.0 / sides
    return Discrete(tuple(float(k) for k in range(1, sides + 1)), tuple(p for _ in range(sides)))


def two_point_surrogate(dist: Distribution) -> Distribution:
    """Finite stand-in for a continuous law: two atoms at mean +- sd,
    clipped to the support, weighted to keep the mean exact. Finite laws
    pass through unchanged. Used to build enumerable game variants whose
    exact payoffs cross-check the Monte-Carlo estimators."""
    if dist.is_finite_discrete():
        return dist
    mu = dist.mean()
    sd = math.sqrt(dist.variance())
    lo_s, hi_s = dist.support()
    lo = max(lo_s, mu - sd)
    hi = min(hi_s, mu + sd)
    if hi <= lo:
        return Point(mu)
    p_hi = (mu - lo) / (hi - lo)
    return Discrete((lo, hi), (1.0 - p_hi, p_hi))


def distribution_from_dict(node: dict) -> Distribution:
    """Build a law from a config mapping, e.g. {kind: uniform, lo: 0.2, hi: 0.4}."""
    if not isinstance(node, dict) or "kind" not in node:
        raise ValueError(f"distribution node must be a mapping with a 'kind' key, got {node!r}")
    kind = node["kind"]
    try:
        if kind == "uniform":
            return Uniform(float(node["lo"]), float(node["hi"]))
        if kind == "beta":
            return Beta(float(node["a"]), float(node["b"]))
        if kind == "point":
            return Point(float(node["v"]))
        if kind == "discrete":
            atoms = node["atoms"]
            return Discrete(
                tuple(float(v) for v, _ in atoms),
                tuple(float(p) for _, p in atoms),
            )
    except KeyError as exc:
        raise ValueError(f"distribution kind {kind!r} is missing field {exc}") from None
    raise ValueError(f"unknown distribution kind {kind!r}")
