import numpy as np
import pytest

from omgstore.costs import SubgradientBounds
from omgstore.storage import StorageParams


def random_storage(rng: np.random.Generator, lossless: bool | None = None,
                   lam: float | None = None) -> StorageParams:
    """Draw a generalized storage satisfying every validity inequality and frequent acting."""
    while True:
        lam_ = lam if lam is not None else (1.0 if rng.random() < 0.3 else rng.uniform(0.8, 1.0))
        s_min = rng.uniform(-50.0, 50.0) if rng.random() < 0.5 else 0.0
        width = rng.uniform(1.0, 200.0)
        s_max = s_min + width
        need_hi = max(0.0, (1.0 - lam_) * s_max)
        need_lo = min(0.0, (1.0 - lam_) * s_min)
        room = width - (need_hi - need_lo)
        if room <= 1e-3 * width:
            continue
        extra = rng.uniform(0.0, 0.95) * room
        split = rng.uniform(0.05, 0.95)
        u_max = need_hi + split * extra
        u_min = need_lo - (1.0 - split) * extra
        if lossless is None:
            lossless_ = rng.random() < 0.5
        else:
            lossless_ = lossless
        mu_c = 1.0 if lossless_ else rng.uniform(0.7, 1.0)
        mu_d = 1.0 if lossless_ else rng.uniform(0.7, 1.0)
        return StorageParams(lam_, s_min, s_max, u_min, u_max, mu_c, mu_d)


def random_bounds(rng: np.random.Generator) -> SubgradientBounds:
    lo = rng.uniform(-5.0, 5.0)
    return SubgradientBounds(lo, lo + rng.uniform(0.1, 10.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def nas():
    return StorageParams(lam=0.97, s_min=0.0, s_max=100.0, u_min=-10.0, u_max=10.0, mu_c=0.85, mu_d=0.85)


@pytest.fixture
def ideal():
    return StorageParams(lam=1.0, s_min=0.0, s_max=100.0, u_min=-10.0, u_max=10.0)


def random_cost_setup(rng: np.random.Generator, family: str, storage: StorageParams):
    """A convex cost of ``family`` valid for ``storage``, with supports and an inflow set."""
    from omgstore.costs import (
        Arbitrage, Balancing, CoLocated, Constant, CustomCost, DayNight, DayNightDeficit, SupportBounds,
    )
    from omgstore.storage import InflowSet

    d_lo = rng.uniform(-20.0, 0.0)
    d_hi = d_lo + rng.uniform(0.0, 30.0)
    negative_ok = family == "arbitrage" and storage.lossless
    p_lo = rng.uniform(-5.0, 0.0) if (negative_ok and rng.random() < 0.5) else rng.uniform(0.0, 5.0)
    p_hi = p_lo + rng.uniform(0.0, 10.0)
    supports = SupportBounds(d_lo, d_hi, p_lo, p_hi)
    inflow = InflowSet()
    if family != "arbitrage" and rng.random() < 0.3:
        a = rng.uniform(-3.0, 1.0)
        inflow = InflowSet(a, a + rng.uniform(0.0, 4.0))
    if family == "arbitrage":
        cost = Arbitrage()
    elif family == "balancing":
        qp = 0.0 if not storage.lossless else rng.uniform(0.0, 3.0)
        if rng.random() < 0.5:
            cost = Balancing(Constant(qp), Constant(rng.uniform(0.0, 3.0)))
        else:
            cost = Balancing(DayNight(qp, qp * rng.uniform(0.0, 1.0)),
                             DayNight(rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)))
    elif family == "colocated":
        cost = CoLocated()
    elif family == "day_night_deficit":
        cost = DayNightDeficit(rng.uniform(0.5, 4.0), rng.uniform(0.1, 2.0), int(rng.integers(1, 5)))
    elif family == "custom":
        a = rng.uniform(0.01, 0.5)
        b = rng.uniform(-2.0, 2.0)
        # a (delta - u + f)^2 + b u + 0.1 f^2, convex jointly in (u, f)
        du = max(abs(storage.u_min), abs(storage.u_max))
        df = max(abs(inflow.f_min), abs(inflow.f_max))
        spread = 2.0 * a * (max(abs(d_lo), abs(d_hi)) + du + df)
        cost = CustomCost(
            fn=lambda u, f, d, p, t, s: a * (d - u + f) ** 2 + b * u + 0.1 * f ** 2,
            subgradient=lambda u, f, d, p, t, s: (-2 * a * (d - u + f) + b,) * 2,
            bounds=SubgradientBounds(b - spread, b + spread),
        )
    else:
        raise ValueError(family)
    return cost, supports, inflow


FAMILIES = ["arbitrage", "balancing", "colocated", "day_night_deficit", "custom"]


def random_params(rng: np.random.Generator, storage: StorageParams, bounds: SubgradientBounds):
    """Any point of the admissible (gamma, W) region, including its edges now and then."""
    from omgstore.tuning import OmgParams, kappa_interval, subopt_bound, w_max

    wm = w_max(storage, bounds) if bounds.d_hi > bounds.d_lo else 1e3
    r = rng.random()
    w = wm if r < 0.15 else wm * rng.uniform(1e-3, 1.0)
    lo, hi = kappa_interval(storage, bounds, w)
    hi = max(hi, lo)
    r = rng.random()
    gamma = lo if r < 0.1 else hi if r < 0.2 else rng.uniform(lo, hi)
    return OmgParams(gamma, w, bounds, subopt_bound(storage, gamma, w), "manual")


def seed_for(*parts) -> int:
    """Stable per-test seed (``hash`` of a str is salted per process)."""
    import zlib

    return zlib.crc32(repr(parts).encode())
