"""Disturbance generators: IID samplers, finite Markov chains and recorded traces.

Randomness follows one contract: ``(seed, stream)`` fully determines every
draw. Each simulation replication owns stream ``r`` so results do not depend
on scheduling.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import SupportBounds
from .errors import (
    ConfigError,
    GapError,
    MissingColumn,
    NonMonotoneTime,
    ParseError,
)
from .tuning import _check_chain


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


# -- scalar distributions ---------------------------------------------------


@dataclass(frozen=True)
class Laplace:
    mean: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("Laplace sigma must be positive")

    @property
    def scale(self) -> float:
        return self.sigma / math.sqrt(2.0)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # inverse CDF on an open uniform
        v = rng.random(n) - 0.5
        v = np.where(v == -0.5, -0.5 + 2.0 ** -54, v)
        return self.mean - self.scale * np.sign(v) * np.log1p(-2.0 * np.abs(v))

    def natural_support(self):
        return None

    def to_dict(self):
        return {"dist": "laplace", "mean": self.mean, "sigma": self.sigma}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ConfigError("uniform interval is empty")

    def draw(self, rng, n):
        u = rng.random(n)
        return self.lo + (self.hi - self.lo) * u

    def natural_support(self):
        return self.lo, self.hi

    def to_dict(self):
        return {"dist": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class PointMass:
    v: float

    def draw(self, rng, n):
        return np.full(n, self.v)

    def natural_support(self):
        return self.v, self.v

    def to_dict(self):
        return {"dist": "point", "v": self.v}


@dataclass(frozen=True)
class Empirical:
    samples: tuple[float, ...]

    def __post_init__(self):
        if not self.samples:
            raise ConfigError("empirical distribution needs samples")

    def draw(self, rng, n):
        idx = rng.integers(0, len(self.samples), n)
        return np.asarray(self.samples, dtype=float)[idx]

    def natural_support(self):
        return min(self.samples), max(self.samples)

    def to_dict(self):
        return {"dist": "empirical", "samples": list(self.samples)}


Distribution = Laplace | Uniform | PointMass | Empirical


def dist_from_dict(d: dict) -> Distribution:
    kind = d["dist"]
    if kind == "laplace":
        return Laplace(float(d.get("mean", 0.0)), float(d["sigma"]))
    if kind == "uniform":
        return Uniform(float(d["lo"]), float(d["hi"]))
    if kind == "point":
        return PointMass(float(d["v"]))
    if kind == "empirical":
        return Empirical(tuple(float(x) for x in d["samples"]))
    raise ConfigError(f"unknown distribution {kind!r}")


def _support(dist, given):
    if given is not None:
        return given
    nat = dist.natural_support()
    if nat is None:
        raise ConfigError("unbounded distribution needs explicit truncation bounds")
    return nat


# -- IID ---------------------------------------------------------------------


@dataclass(frozen=True)
class IidSpec:
    """IID ``(delta, price)`` pairs, clipped to the declared supports.

    ``joint`` (a sequence of ``(delta, price)`` pairs) replaces both marginals
    with a joint empirical distribution when given.
    """

    delta: Distribution = field(default_factory=lambda: PointMass(0.0))
    price: Distribution = field(default_factory=lambda: PointMass(0.0))
    supports: SupportBounds | None = None
    joint: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.supports is None:
            if self.joint is not None:
                arr = np.asarray(self.joint, dtype=float)
                sb = SupportBounds(arr[:, 0].min(), arr[:, 0].max(), arr[:, 1].min(), arr[:, 1].max())
            else:
                d_lo, d_hi = _support(self.delta, None)
                p_lo, p_hi = _support(self.price, None)
                sb = SupportBounds(d_lo, d_hi, p_lo, p_hi)
            object.__setattr__(self, "supports", sb)

    def generate(self, rng: np.random.Generator, T: int) -> tuple[np.ndarray, np.ndarray]:
        sb = self.supports
        if self.joint is not None:
            arr = np.asarray(self.joint, dtype=float)
            idx = rng.integers(0, len(arr), T)
            d, p = arr[idx, 0], arr[idx, 1]
        else:
            d = self.delta.draw(rng, T)
            p = self.price.draw(rng, T)
        return np.clip(d, sb.delta_min, sb.delta_max), np.clip(p, sb.price_min, sb.price_max)


def sample_iid(spec: IidSpec, rng: np.random.Generator) -> tuple[float, float]:
    """One clipped ``(delta, price)`` draw; advances ``rng``."""
    d, p = spec.generate(rng, 1)
    return float(d[0]), float(p[0])


# -- Markov --------------------------------------------------------------------


@dataclass(frozen=True)
class MarkovChain:
    transition: tuple[tuple[float, ...], ...]
    emissions: tuple[tuple[float, float], ...]
    initial_state: int = 0
    return_state: int | None = None

    def __post_init__(self):
        P = _check_chain(np.asarray(self.transition, dtype=float))
        if len(self.emissions) != P.shape[0]:
            raise ConfigError("one (delta, price) emission per state is required")
        if not 0 <= self.initial_state < P.shape[0]:
            raise ConfigError("initial state out of range")

    @property
    def P(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=float)

    @property
    def supports(self) -> SupportBounds:
        e = np.asarray(self.emissions, dtype=float)
        return SupportBounds(e[:, 0].min(), e[:, 0].max(), e[:, 1].min(), e[:, 1].max())

    @property
    def reference_state(self) -> int:
        return self.initial_state if self.return_state is None else self.return_state

    def _rows(self):
        cdf = np.cumsum(self.P, axis=1)
        cdf[:, -1] = 1.0
        return [list(r) for r in cdf]

    def states(self, rng: np.random.Generator, T: int) -> np.ndarray:
        """State path ``omega_1..omega_T`` starting from the initial state."""
        rows = self._rows()
        out = np.empty(T, dtype=np.int64)
        state = self.initial_state
        u = rng.random(T).tolist()
        for k in range(T):
            out[k] = state
            state = bisect_right(rows[state], u[k])
        return out

    def generate(self, rng, T):
        st = self.states(rng, T)
        e = np.asarray(self.emissions, dtype=float)
        return e[st, 0].copy(), e[st, 1].copy()


def markov_next(chain: MarkovChain, state: int, rng: np.random.Generator):
    """One transition by inverse CDF over the current row; emits the new state's pair."""
    row = np.cumsum(chain.P[state])
    row[-1] = 1.0
    nxt = bisect_right(list(row), float(rng.random()))
    d, p = chain.emissions[nxt]
    return nxt, (float(d), float(p))


# -- traces --------------------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    t: tuple[int, ...]
    delta: tuple[float, ...]
    price: tuple[float, ...]
    q_plus: tuple[float, ...] | None = None
    q_minus: tuple[float, ...] | None = None
    declared_supports: SupportBounds | None = None

    def __len__(self):
        return len(self.t)

    @property
    def supports(self) -> SupportBounds:
        if self.declared_supports is not None:
            return self.declared_supports
        return SupportBounds(min(self.delta), max(self.delta), min(self.price), max(self.price))

    def generate(self, rng, T):
        if T > len(self):
            raise ConfigError(f"trace has {len(self)} steps, {T} requested")
        return np.asarray(self.delta[:T], dtype=float), np.asarray(self.price[:T], dtype=float)


def load_trace(source, require_price: bool = False) -> Trace:
    """Parse a ``t,delta,price[,q_plus,q_minus]`` CSV from a path, bytes or text stream."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty trace", 1) from None
    for col in ("t", "delta"):
        if col not in header:
            raise MissingColumn(f"missing column {col!r}", 1)
    if require_price and "price" not in header:
        raise MissingColumn("missing column 'price' required by the cost family", 1)
    has_q = "q_plus" in header or "q_minus" in header
    if has_q and not ("q_plus" in header and "q_minus" in header):
        raise MissingColumn("q_plus and q_minus must appear together", 1)
    col = {name: i for i, name in enumerate(header)}
    ts, ds, ps, qp, qm = [], [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            t = int(row[col["t"]])
            d = float(row[col["delta"]])
            p = float(row[col["price"]]) if "price" in col else 0.0
            if has_q:
                qp.append(float(row[col["q_plus"]]))
                qm.append(float(row[col["q_minus"]]))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not (math.isfinite(d) and math.isfinite(p)):
            raise ParseError("non-finite value", lineno)
        expected = ts[-1] + 1 if ts else 1
        if t != expected:
            if ts and t <= ts[-1]:
                raise NonMonotoneTime(f"t={t} does not increase after {ts[-1]}", lineno)
            if ts:
                raise GapError(f"t jumps from {ts[-1]} to {t}", lineno)
            raise GapError(f"trace must start at t=1, got {t}", lineno)
        ts.append(t)
        ds.append(d)
        ps.append(p)
    if not ts:
        raise ParseError("trace has no rows", 2)
    return Trace(tuple(ts), tuple(ds), tuple(ps),
                 tuple(qp) if has_q else None, tuple(qm) if has_q else None)


# -- synthetic co-located wind/price stand-in ---------------------------------


@dataclass(frozen=True)
class SyntheticWindPrice:
    """Synthetic hourly forecast-error and price traces for a wind-plus-storage site.

    Forecast errors are zero-mean Laplace with standard deviation ``sigma_d``
    clipped at ``clip_sigmas`` standard deviations. Prices follow a diurnal
    profile peaking in the evening plus Laplace noise, clipped to
    ``[price_min, price_max]``.
    """

    sigma_d: float = 20.1
    clip_sigmas: float = 5.0
    price_mean: float = 30.0
    price_amplitude: float = 10.0
    price_noise: float = 6.0
    price_min: float = 0.0
    price_max: float = 90.0
    steps_per_hour: int = 1

    @property
    def supports(self) -> SupportBounds:
        c = self.clip_sigmas * self.sigma_d
        return SupportBounds(-c, c, self.price_min, self.price_max)

    def generate(self, rng, T):
        sb = self.supports
        d = Laplace(0.0, self.sigma_d).draw(rng, T)
        hours = (np.arange(T) // self.steps_per_hour) % 24
        profile = self.price_mean + self.price_amplitude * np.sin(2.0 * np.pi * (hours - 12) / 24.0)
        p = profile + Laplace(0.0, self.price_noise).draw(rng, T)
        return np.clip(d, sb.delta_min, sb.delta_max), np.clip(p, sb.price_min, sb.price_max)


Process = IidSpec | MarkovChain | Trace | SyntheticWindPrice
