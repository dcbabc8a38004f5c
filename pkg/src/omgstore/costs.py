"""Stage cost families, their partial subdifferentials in ``u`` and global slope bounds.

Every built-in family is a function of the residual imbalance
``r = delta - h(u) + f`` (or of ``h(u)`` alone for arbitrage). ``evaluate``
accepts floats or numpy arrays for ``u`` so the dynamic-programming baseline
can score a whole candidate grid in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NonConvexCost, UnboundedSubgradient
from .storage import InflowSet, StorageParams, convert, convert_inverse

DAY_START_HOUR = 7
DAY_END_HOUR = 19


def _pos(x):
    if isinstance(x, np.ndarray):
        return np.maximum(x, 0.0)
    return x if x > 0.0 else 0.0


def _neg(x):
    if isinstance(x, np.ndarray):
        return np.maximum(-x, 0.0)
    return -x if x < 0.0 else 0.0


def is_day(t: int, steps_per_hour: int = 1) -> bool:
    """Whether step ``t`` (1-based, t=1 starts at midnight) falls in [7am, 7pm)."""
    hour = ((t - 1) // steps_per_hour) % 24
    return DAY_START_HOUR <= hour < DAY_END_HOUR


# -- penalty schedules ------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: float

    def at(self, t: int) -> float:
        return self.value

    def max(self) -> float:
        return self.value

    def min(self) -> float:
        return self.value

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class DayNight:
    day: float
    night: float
    steps_per_hour: int = 1

    def at(self, t: int) -> float:
        return self.day if is_day(t, self.steps_per_hour) else self.night

    def max(self) -> float:
        return max(self.day, self.night)

    def min(self) -> float:
        return min(self.day, self.night)

    def to_dict(self):
        return {"kind": "day_night", "day": self.day, "night": self.night,
                "steps_per_hour": self.steps_per_hour}


@dataclass(frozen=True)
class Series:
    """Per-step values, ``values[t-1]`` at step ``t``; repeats cyclically past the end."""

    values: tuple[float, ...]

    def at(self, t: int) -> float:
        return self.values[(t - 1) % len(self.values)]

    def max(self) -> float:
        return max(self.values)

    def min(self) -> float:
        return min(self.values)

    def to_dict(self):
        return {"kind": "series", "values": list(self.values)}


Schedule = Constant | DayNight | Series


def schedule_from_dict(d) -> Schedule:
    if isinstance(d, (int, float)):
        return Constant(float(d))
    kind = d.get("kind", "constant")
    if kind == "constant":
        return Constant(float(d["value"]))
    if kind == "day_night":
        return DayNight(float(d["day"]), float(d["night"]), int(d.get("steps_per_hour", 1)))
    if kind == "series":
        return Series(tuple(float(v) for v in d["values"]))
    raise ConfigError(f"unknown schedule kind {kind!r}")


# -- bounds -----------------------------------------------------------------


@dataclass(frozen=True)
class SupportBounds:
    delta_min: float
    delta_max: float
    price_min: float
    price_max: float

    def __post_init__(self):
        vals = (self.delta_min, self.delta_max, self.price_min, self.price_max)
        if not all(np.isfinite(v) for v in vals):
            raise ConfigError("support bounds must be finite")
        if self.delta_min > self.delta_max or self.price_min > self.price_max:
            raise ConfigError("support intervals must be non-empty")

    def to_dict(self):
        return {"delta_min": self.delta_min, "delta_max": self.delta_max,
                "price_min": self.price_min, "price_max": self.price_max}


@dataclass(frozen=True)
class SubgradientBounds:
    d_lo: float
    d_hi: float

    def __post_init__(self):
        if not (np.isfinite(self.d_lo) and np.isfinite(self.d_hi)):
            raise UnboundedSubgradient("subgradient bounds must be finite")
        if self.d_lo > self.d_hi:
            raise ConfigError(f"d_lo={self.d_lo} exceeds d_hi={self.d_hi}")


def _conversion_subdiff(u: float, storage: StorageParams) -> tuple[float, float]:
    if u > 0:
        return 1.0 / storage.mu_c, 1.0 / storage.mu_c
    if u < 0:
        return storage.mu_d, storage.mu_d
    return storage.mu_d, 1.0 / storage.mu_c


def _deficit_subdiff(rate: float, u, f, delta, storage) -> tuple[float, float]:
    # rate * max(h(u) - delta - f, 0), convex for rate >= 0
    lo_h, hi_h = _conversion_subdiff(u, storage)
    v = convert(u, storage) - delta - f
    if v > 0:
        return rate * lo_h, rate * hi_h
    if v < 0:
        return 0.0, 0.0
    return 0.0, rate * hi_h


def _deficit_breakpoints(delta, f_values, storage) -> list[float]:
    # kinks of the partial minimum over f lie where h(u) = delta + f for an extreme f
    return [convert_inverse(delta + f, storage) for f in f_values]


# -- cost families ----------------------------------------------------------


@dataclass(frozen=True)
class Arbitrage:
    """``g = p * h(u)``: negated arbitrage revenue."""

    kind = "arbitrage"
    needs_price = True
    piecewise_linear = True

    def evaluate(self, u, f, delta, price, t, storage):
        return price * convert(u, storage)

    def subgradient_interval(self, u, f, delta, price, t, storage):
        lo, hi = _conversion_subdiff(u, storage)
        a, b = price * lo, price * hi
        return (a, b) if a <= b else (b, a)

    def global_bounds(self, supports, storage, inflow):
        if storage.lossless:
            return SubgradientBounds(supports.price_min, supports.price_max)
        return SubgradientBounds(supports.price_min * storage.mu_d,
                                 supports.price_max / storage.mu_c)

    def check_convex(self, supports, storage):
        if not storage.lossless and supports.price_min < 0:
            raise NonConvexCost("arbitrage with conversion losses needs non-negative prices")

    def best_inflow(self, u, delta, price, t, storage, inflow):
        return inflow.clamp(0.0)

    def breakpoints(self, delta, price, t, storage, inflow):
        return [0.0]

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Balancing:
    """``g = q+ [r]+ + q- [r]-`` on the residual imbalance ``r``."""

    q_plus: Schedule = field(default_factory=lambda: Constant(1.0))
    q_minus: Schedule = field(default_factory=lambda: Constant(1.0))

    kind = "balancing"
    needs_price = False
    piecewise_linear = True

    def __post_init__(self):
        if self.q_plus.min() < 0 or self.q_minus.min() < 0:
            raise ConfigError("penalty rates must be non-negative")

    def evaluate(self, u, f, delta, price, t, storage):
        r = delta - convert(u, storage) + f
        return self.q_plus.at(t) * _pos(r) + self.q_minus.at(t) * _neg(r)

    def subgradient_interval(self, u, f, delta, price, t, storage):
        qp, qm = self.q_plus.at(t), self.q_minus.at(t)
        if qp == 0.0:
            return _deficit_subdiff(qm, u, f, delta, storage)
        # convex only for lossless conversion (enforced by check_convex)
        r = delta - u + f
        if r > 0:
            return -qp, -qp
        if r < 0:
            return qm, qm
        return -qp, qm

    def global_bounds(self, supports, storage, inflow):
        if self.q_plus.max() == 0.0:
            return SubgradientBounds(0.0, self.q_minus.max() / storage.mu_c)
        return SubgradientBounds(-self.q_plus.max(), self.q_minus.max())

    def check_convex(self, supports, storage):
        if not storage.lossless and self.q_plus.max() > 0:
            raise NonConvexCost(
                "balancing with a positive surplus penalty is not convex in u "
                "under conversion losses; use mu_c = mu_d = 1 or q_plus = 0"
            )

    def best_inflow(self, u, delta, price, t, storage, inflow):
        return inflow.clamp(convert(u, storage) - delta)

    def breakpoints(self, delta, price, t, storage, inflow):
        return [0.0] + _deficit_breakpoints(delta, {inflow.f_min, inflow.f_max}, storage)

    def to_dict(self):
        return {"kind": self.kind, "q_plus": self.q_plus.to_dict(),
                "q_minus": self.q_minus.to_dict()}


def _deficit_inflow(u, delta, storage, inflow):
    need = convert(u, storage) - delta
    if inflow.f_max < need:
        return inflow.f_max
    return min(max(0.0, max(inflow.f_min, need)), inflow.f_max)


@dataclass(frozen=True)
class CoLocated:
    """``g = p [r]-``: residual demand bought at the market price, surplus curtailed."""

    kind = "colocated"
    needs_price = True
    piecewise_linear = True

    def evaluate(self, u, f, delta, price, t, storage):
        return price * _neg(delta - convert(u, storage) + f)

    def subgradient_interval(self, u, f, delta, price, t, storage):
        return _deficit_subdiff(price, u, f, delta, storage)

    def global_bounds(self, supports, storage, inflow):
        return SubgradientBounds(0.0, supports.price_max / storage.mu_c)

    def check_convex(self, supports, storage):
        if supports.price_min < 0:
            raise NonConvexCost("co-located cost needs non-negative prices")

    def best_inflow(self, u, delta, price, t, storage, inflow):
        return _deficit_inflow(u, delta, storage, inflow)

    def breakpoints(self, delta, price, t, storage, inflow):
        return [0.0] + _deficit_breakpoints(delta, {inflow.f_min, inflow.f_max}, storage)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class DayNightDeficit:
    """Unmet demand penalised at ``base_rate``, times ``day_multiplier`` from 7am to 7pm."""

    day_multiplier: float = 3.0
    base_rate: float = 1.0
    steps_per_hour: int = 1

    kind = "day_night_deficit"
    needs_price = False
    piecewise_linear = True

    def __post_init__(self):
        if self.day_multiplier < 0 or self.base_rate < 0:
            raise ConfigError("penalty rates must be non-negative")
        if self.steps_per_hour < 1:
            raise ConfigError("steps_per_hour must be >= 1")

    def rate(self, t: int) -> float:
        if is_day(t, self.steps_per_hour):
            return self.day_multiplier * self.base_rate
        return self.base_rate

    def evaluate(self, u, f, delta, price, t, storage):
        return self.rate(t) * _neg(delta - convert(u, storage) + f)

    def subgradient_interval(self, u, f, delta, price, t, storage):
        return _deficit_subdiff(self.rate(t), u, f, delta, storage)

    def global_bounds(self, supports, storage, inflow):
        top = self.base_rate * max(self.day_multiplier, 1.0)
        return SubgradientBounds(0.0, top / storage.mu_c)

    def check_convex(self, supports, storage):
        pass

    def best_inflow(self, u, delta, price, t, storage, inflow):
        return _deficit_inflow(u, delta, storage, inflow)

    def breakpoints(self, delta, price, t, storage, inflow):
        return [0.0] + _deficit_breakpoints(delta, {inflow.f_min, inflow.f_max}, storage)

    def to_dict(self):
        return {"kind": self.kind, "day_multiplier": self.day_multiplier,
                "base_rate": self.base_rate, "steps_per_hour": self.steps_per_hour}


@dataclass(frozen=True)
class CustomCost:
    """User-supplied convex cost.

    ``fn(u, f, delta, price, t, storage)`` must be convex in ``u``;
    ``subgradient`` returns the ``(lo, hi)`` subdifferential in ``u``.
    Global bounds are never inferred and must be passed explicitly.
    """

    fn: Callable
    subgradient: Callable | None = None
    bounds: SubgradientBounds | None = None
    needs_price: bool = True

    kind = "custom"
    piecewise_linear = False

    def evaluate(self, u, f, delta, price, t, storage):
        return self.fn(u, f, delta, price, t, storage)

    def subgradient_interval(self, u, f, delta, price, t, storage):
        if self.subgradient is None:
            raise ConfigError("custom cost has no subgradient callback")
        return tuple(self.subgradient(u, f, delta, price, t, storage))

    def global_bounds(self, supports, storage, inflow):
        if self.bounds is None:
            raise UnboundedSubgradient("custom cost requires explicit subgradient bounds")
        return self.bounds

    def check_convex(self, supports, storage):
        pass

    def best_inflow(self, u, delta, price, t, storage, inflow):
        if inflow.f_min == inflow.f_max:
            return inflow.f_min
        from .policies import golden_section

        return golden_section(lambda f: self.fn(u, f, delta, price, t, storage),
                              inflow.f_min, inflow.f_max)

    def breakpoints(self, delta, price, t, storage, inflow):
        return []

    def to_dict(self):
        raise ConfigError("custom costs cannot be serialized")


CostSpec = Arbitrage | Balancing | CoLocated | DayNightDeficit | CustomCost


def cost_from_dict(d: dict, steps_per_hour: int = 1) -> CostSpec:
    kind = d["kind"]
    if kind == "arbitrage":
        return Arbitrage()
    if kind == "balancing":
        return Balancing(schedule_from_dict(d.get("q_plus", 1.0)),
                         schedule_from_dict(d.get("q_minus", 1.0)))
    if kind == "colocated":
        return CoLocated()
    if kind == "day_night_deficit":
        return DayNightDeficit(float(d.get("day_multiplier", 3.0)),
                               float(d.get("base_rate", 1.0)),
                               int(d.get("steps_per_hour", steps_per_hour)))
    raise ConfigError(f"unknown cost kind {kind!r}")


def evaluate(cost: CostSpec, u, f, delta, price, t, storage):
    return cost.evaluate(u, f, delta, price, t, storage)


def subgradient_interval(cost: CostSpec, u, f, delta, price, t, storage):
    return cost.subgradient_interval(u, f, delta, price, t, storage)


def global_subgradient_bounds(cost: CostSpec, supports: SupportBounds,
                              storage: StorageParams,
                              inflow: InflowSet | None = None) -> SubgradientBounds:
    """Bounds ``(d_lo, d_hi)`` on every subgradient of ``g_t`` over the whole domain."""
    inflow = inflow or InflowSet()
    cost.check_convex(supports, storage)
    return cost.global_bounds(supports, storage, inflow)
