"""Offline phase: admissible (shift, weight) region, tuners and sub-optimality bounds."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .costs import SubgradientBounds
from .errors import (
    ConfigError,
    DegenerateSlope,
    EmptyInterval,
    NotIrreducible,
    NumericalFailure,
    ZeroBaseline,
)
from .storage import StorageParams, validate_storage

INTERVAL_RTOL = 1e-9
DEFAULT_W_CEILING = 1e6


@dataclass(frozen=True)
class OmgParams:
    gamma: float
    w: float
    bounds: SubgradientBounds
    certified_bound: float
    method: str = "maxw"

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "w": self.w,
            "d_lo": self.bounds.d_lo,
            "d_hi": self.bounds.d_hi,
            "bound": self.certified_bound,
            "method": self.method,
        }


@dataclass(frozen=True)
class EpochStats:
    """Moments of the regenerative epoch length ``dT`` of a disturbance chain."""

    e_dt: float
    e_dt2: float
    e_lambda_dt: float

    @classmethod
    def iid(cls, lam: float) -> "EpochStats":
        return cls(1.0, 1.0, lam)


def kappa_interval(storage: StorageParams, bounds: SubgradientBounds, w: float) -> tuple[float, float]:
    """Admissible shift interval ``[kappa_min, kappa_max]`` for weight ``w``."""
    if not w > 0:
        raise ValueError("w must be positive")
    lam = storage.lam
    k_min = (-w * bounds.d_lo + storage.u_max - storage.s_max) / lam
    k_max = (-w * bounds.d_hi - storage.s_min + storage.u_min) / lam
    scale = max(1.0, abs(k_min), abs(k_max))
    if k_min > k_max + INTERVAL_RTOL * scale:
        raise EmptyInterval(f"kappa_min={k_min} > kappa_max={k_max}; w={w} exceeds W^max")
    return k_min, k_max


def w_max(storage: StorageParams, bounds: SubgradientBounds) -> float:
    spread = bounds.d_hi - bounds.d_lo
    if spread <= 0:
        raise DegenerateSlope("d_hi == d_lo leaves the weight unbounded")
    return ((storage.s_max - storage.s_min) - (storage.u_max - storage.u_min)) / spread


def m_u(storage: StorageParams, gamma):
    c = 1.0 - storage.lam
    return 0.5 * np.maximum((storage.u_min + c * gamma) ** 2, (storage.u_max + c * gamma) ** 2)


def m_b(storage: StorageParams, gamma):
    return np.maximum((storage.s_min + gamma) ** 2, (storage.s_max + gamma) ** 2)


def m_total(storage: StorageParams, gamma):
    lam = storage.lam
    return m_u(storage, gamma) + lam * (1.0 - lam) * m_b(storage, gamma)


def subopt_bound(storage: StorageParams, gamma: float, w: float) -> float:
    """Certified gap ``M(gamma)/w`` between the online cost and the optimum (IID case)."""
    if not w > 0:
        raise ValueError("w must be positive")
    return float(m_total(storage, gamma)) / w


def closed_form_bound(rho: float, slope_spread: float, u_max: float) -> float:
    """Closed-form bound for a lossless storage with symmetric ramps and capacity ratio ``rho``."""
    return slope_spread * u_max / (4.0 * (rho - 1.0))


def _maxw_gamma(storage: StorageParams, bounds: SubgradientBounds) -> float:
    lo, hi = bounds.d_lo, bounds.d_hi
    num = lo * (storage.s_min - storage.u_min) - hi * (storage.s_max - storage.u_max)
    return num / (storage.lam * (hi - lo))


def _degenerate_params(storage, bounds, ceiling, method):
    # d_lo == d_hi: every W > 0 is admissible; cap it.
    w = ceiling
    k_min, k_max = kappa_interval(storage, bounds, w)
    gamma = _best_gamma(storage, np.array([k_min]), np.array([k_max]))[0]
    return OmgParams(float(gamma), w, bounds, subopt_bound(storage, gamma, w), method)


def tune_max_weight(storage: StorageParams, bounds: SubgradientBounds,
                    w_ceiling: float | None = None) -> OmgParams:
    """``W = W^max`` with the (then unique) admissible shift."""
    validate_storage(storage)
    if bounds.d_hi == bounds.d_lo and w_ceiling is not None:
        return _degenerate_params(storage, bounds, w_ceiling, "maxw")
    w = w_max(storage, bounds)
    gamma = _maxw_gamma(storage, bounds)
    k_min, k_max = kappa_interval(storage, bounds, w)
    scale = max(1.0, abs(gamma))
    if abs(k_min - gamma) > 1e-9 * scale or abs(k_max - gamma) > 1e-9 * scale:
        raise NumericalFailure(f"kappa interval ({k_min}, {k_max}) is not the singleton {gamma}")
    return OmgParams(gamma, w, bounds, subopt_bound(storage, gamma, w), "maxw")


def _gamma_candidates(storage: StorageParams) -> np.ndarray:
    """Kinks and stationary points of the piecewise-quadratic ``M(gamma)``."""
    lam = storage.lam
    c = 1.0 - lam
    k = lam * (1.0 - lam)
    u_mid = 0.5 * (storage.u_min + storage.u_max)
    u_half = 0.5 * (storage.u_max - storage.u_min)
    s_mid = 0.5 * (storage.s_min + storage.s_max)
    s_half = 0.5 * (storage.s_max - storage.s_min)
    cands = [-s_mid]
    if c > 0:
        cands.append(-u_mid / c)
        denom = c * c + 2.0 * k
        for su in (-1.0, 1.0):
            for sb in (-1.0, 1.0):
                cands.append(-(c * u_mid + su * c * u_half + 2.0 * k * s_mid + 2.0 * k * sb * s_half) / denom)
    return np.array(cands)


def _best_gamma(storage: StorageParams, k_min: np.ndarray, k_max: np.ndarray) -> np.ndarray:
    """Exact minimiser of ``M`` over ``[k_min, k_max]`` for each row (vectorised over W)."""
    cands = _gamma_candidates(storage)
    pts = np.clip(cands[None, :], k_min[:, None], k_max[:, None])
    pts = np.concatenate([pts, k_min[:, None], k_max[:, None]], axis=1)
    vals = m_total(storage, pts)
    idx = np.argmin(vals, axis=1)
    return pts[np.arange(len(k_min)), idx]


def _kappa_arrays(storage, bounds, w):
    lam = storage.lam
    k_min = (-w * bounds.d_lo + storage.u_max - storage.s_max) / lam
    k_max = (-w * bounds.d_hi - storage.s_min + storage.u_min) / lam
    # at W^max the two coincide up to rounding
    k_max = np.maximum(k_max, k_min)
    return k_min, k_max


def bound_profile(storage: StorageParams, bounds: SubgradientBounds, w: np.ndarray):
    """``(gamma*(W), min_gamma M/W)`` for an array of weights."""
    w = np.asarray(w, dtype=float)
    k_min, k_max = _kappa_arrays(storage, bounds, w)
    g = _best_gamma(storage, k_min, k_max)
    return g, m_total(storage, g) / w


def _golden_min(fn, a, b, tol_rel=1e-12, max_iter=200):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol_rel * max(abs(a), abs(b), 1e-300):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def tune_min_bound(storage: StorageParams, bounds: SubgradientBounds,
                   grid_points: int = 4096, w_ceiling: float | None = None) -> OmgParams:
    """Minimise ``M(gamma)/W`` over the admissible region.

    For a fixed ``W`` the objective is a convex piecewise quadratic in gamma
    and is minimised exactly by candidate enumeration. The outer search over
    ``W`` is a log-spaced grid followed by golden-section refinement in the
    bracket around the best grid point.
    """
    validate_storage(storage)
    if bounds.d_hi == bounds.d_lo:
        if w_ceiling is None:
            raise DegenerateSlope("d_hi == d_lo leaves the weight unbounded")
        return _degenerate_params(storage, bounds, w_ceiling, "mins")
    wmax = w_max(storage, bounds)
    if storage.lam == 1.0:
        # M is gamma-independent, so M/W decreases in W
        p = tune_max_weight(storage, bounds)
        return OmgParams(p.gamma, p.w, bounds, p.certified_bound, "mins")

    grid = np.append(np.geomspace(wmax * 1e-9, wmax, grid_points - 1), wmax)
    grid[-2] = min(grid[-2], wmax)
    gammas, vals = bound_profile(storage, bounds, grid)
    i = int(np.argmin(vals))
    best_w, best_g, best_v = float(grid[i]), float(gammas[i]), float(vals[i])

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        def phi(w):
            return float(bound_profile(storage, bounds, np.array([w]))[1][0])

        w_ref, v_ref = _golden_min(phi, float(lo), float(hi))
        if v_ref < best_v:
            best_w, best_v = w_ref, v_ref
            best_g = float(bound_profile(storage, bounds, np.array([w_ref]))[0][0])
    if best_v > float(vals[i]):
        raise NumericalFailure("refinement worsened the grid minimum")
    return OmgParams(best_g, best_w, bounds, subopt_bound(storage, best_g, best_w), "mins")


def tune(storage: StorageParams, bounds: SubgradientBounds, method: str = "maxw", **kw) -> OmgParams:
    if method == "maxw":
        return tune_max_weight(storage, bounds, w_ceiling=kw.get("w_ceiling"))
    if method == "mins":
        return tune_min_bound(storage, bounds, **kw)
    raise ValueError(f"unknown tuning method {method!r}")


def check_params(storage: StorageParams, params: OmgParams, rtol: float = 1e-9) -> None:
    """Raise :class:`EmptyInterval` unless ``params`` lies in the admissible region."""
    b = params.bounds
    w = params.w
    if not w > 0:
        raise EmptyInterval("weight must be positive")
    if b.d_hi > b.d_lo:
        wm = w_max(storage, b)
        if w > wm * (1 + rtol):
            raise EmptyInterval(f"w={w} exceeds W^max={wm}")
        w = min(w, wm)
    k_min, k_max = kappa_interval(storage, b, w)
    scale = max(1.0, abs(params.gamma))
    if not (k_min - rtol * scale <= params.gamma <= k_max + rtol * scale):
        raise EmptyInterval(f"gamma={params.gamma} outside [{k_min}, {k_max}]")


# -- Markov-modulated disturbances ------------------------------------------


def _check_chain(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ConfigError("transition matrix must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12, rtol=0):
        raise ConfigError("transition matrix must be row-stochastic")
    n, _ = connected_components(P > 0, directed=True, connection="strong")
    if n != 1:
        raise NotIrreducible(f"chain has {n} strongly connected components")
    return P


def markov_epoch_stats(P, return_state: int, lam: float) -> EpochStats:
    """Exact moments of the return time to ``return_state`` via first-passage systems."""
    P = _check_chain(P)
    n = P.shape[0]
    r = return_state
    rest = [i for i in range(n) if i != r]
    p_r = P[r, rest]
    if not rest:
        return EpochStats(1.0, 1.0, lam)
    Q = P[np.ix_(rest, rest)]
    A = np.eye(len(rest)) - Q
    h = np.linalg.solve(A, np.ones(len(rest)))
    m2 = np.linalg.solve(A, 1.0 + 2.0 * Q @ h)
    z = np.linalg.solve(np.eye(len(rest)) - lam * Q, lam * P[rest, r])
    e_dt = 1.0 + p_r @ h
    e_dt2 = 1.0 + 2.0 * p_r @ h + p_r @ m2
    e_ldt = lam * (P[r, r] + p_r @ z)
    return EpochStats(float(e_dt), float(e_dt2), float(e_ldt))


def markov_epoch_stats_mc(P, return_state: int, lam: float, epochs: int,
                          rng: np.random.Generator) -> EpochStats:
    """Monte-Carlo estimate of :func:`markov_epoch_stats` from ``epochs`` simulated returns."""
    P = _check_chain(P)
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    rows = [list(row) for row in cdf]
    lengths = np.empty(epochs, dtype=np.int64)
    buf: list[float] = []
    k = 0
    for e in range(epochs):
        state, length = return_state, 0
        while True:
            if k == len(buf):
                buf = rng.random(1 << 16).tolist()
                k = 0
            state = bisect_right(rows[state], buf[k])
            k += 1
            length += 1
            if state == return_state:
                break
        lengths[e] = length
    lf = lengths.astype(float)
    return EpochStats(float(lf.mean()), float((lf ** 2).mean()), float(np.mean(lam ** lf)))


def markov_bound(storage: StorageParams, gamma: float, w: float, stats: EpochStats) -> float:
    """Certified gap for Markov-modulated disturbances."""
    if not w > 0:
        raise ValueError("w must be positive")
    lam = storage.lam
    coef_u = stats.e_dt2 / stats.e_dt
    coef_b = lam * (1.0 - stats.e_lambda_dt) / stats.e_dt
    return float(coef_u * m_u(storage, gamma) + coef_b * m_b(storage, gamma)) / w


@dataclass(frozen=True)
class VosInterval:
    lo: float
    hi: float
    pct_upper: float | None

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "pct_savings_upper": self.pct_upper}


def vos_interval(j_no_storage: float, j_omg: float, bound: float,
                 require_pct: bool = False) -> VosInterval:
    """Bracket on the value of storage from the online cost and its certified gap.

    The percentage upper bound is ``None`` when the no-storage cost is zero,
    unless ``require_pct`` is set, in which case :class:`ZeroBaseline` is raised.
    """
    lo = j_no_storage - j_omg
    hi = lo + bound
    if j_no_storage == 0:
        if require_pct:
            raise ZeroBaseline("percentage savings undefined for a zero no-storage cost")
        return VosInterval(lo, hi, None)
    return VosInterval(lo, hi, hi / j_no_storage)
