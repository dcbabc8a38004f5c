"""Per-step decision rules and the hindsight dynamic-programming baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import Arbitrage, Balancing, CostSpec
from .errors import InfeasibleStep
from .storage import BOUND_TOL, InflowSet, StorageParams, StorageState, convert_inverse, level_box
from .tuning import OmgParams

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Decision:
    u: float
    f: float
    objective_value: float


def golden_section(fn, a: float, b: float, rtol: float = 1e-10, max_iter: int = 300) -> float:
    """Minimiser of a unimodal ``fn`` on ``[a, b]``; endpoints are compared too."""
    if b <= a:
        return a
    lo, hi = a, b
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = fn(c), fn(d)
    tol = rtol * max(abs(a), abs(b), b - a)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = fn(d)
    best, fbest = (c, fc) if fc <= fd else (d, fd)
    for x in (a, b):
        fx = fn(x)
        if fx < fbest:
            best, fbest = x, fx
    return best


def _pick(cands, objective, prefer_zero: bool):
    vals = [(objective(u), u) for u in cands]
    best = min(v for v, _ in vals)
    if not prefer_zero:
        return next(u for v, u in vals if v == best), best
    tol = TIE_RTOL * max(1.0, abs(best))
    ties = [u for v, u in vals if v <= best + tol]
    return min(ties, key=abs), best


def minimize_stage(objective, cost: CostSpec, lo: float, hi: float, delta, price, t,
                   storage: StorageParams, inflow: InflowSet, prefer_zero: bool = False) -> float:
    """Minimise a convex scalar ``objective`` over ``[lo, hi]``.

    Piecewise-linear families are solved exactly by enumerating the box ends
    and the family's breakpoints; other costs fall back to golden-section.
    """
    if cost.piecewise_linear:
        cands = {lo, hi}
        if lo <= 0.0 <= hi:
            cands.add(0.0)
        for b in cost.breakpoints(delta, price, t, storage, inflow):
            if lo <= b <= hi:
                cands.add(b)
        return _pick(sorted(cands), objective, prefer_zero)[0]
    u = golden_section(objective, lo, hi)
    if prefer_zero and lo <= 0.0 <= hi:
        return _pick([u, 0.0], objective, True)[0]
    return u


def omg_objective(u, f, s, delta, price, t, cost, storage, params) -> float:
    return storage.lam * (s + params.gamma) * u + params.w * cost.evaluate(u, f, delta, price, t, storage)


def _balancing_closed_form(lin, w, cost, delta, t, storage, inflow):
    if not (storage.lossless and inflow.is_zero):
        return None
    if isinstance(cost, Balancing):
        qp, qm = cost.q_plus.at(t), cost.q_minus.at(t)
        if lin >= w * qp:
            return storage.u_min
        if lin <= -w * qm:
            return storage.u_max
        return min(max(delta, storage.u_min), storage.u_max)
    return None


def omg_step(state: StorageState, delta: float, price: float, t: int, cost: CostSpec,
             storage: StorageParams, inflow: InflowSet, params: OmgParams,
             enforce_level_constraint: bool = False, route: str = "auto") -> Decision:
    """Solve the shifted greedy program ``min lam*(s+gamma)*u + W*g(u, f)``.

    ``route`` selects the solution path: ``"auto"`` uses the threshold
    shortcuts and closed forms when applicable, ``"numeric"`` always uses the
    generic solver (used as a cross-check).
    """
    lin = storage.lam * (state.s + params.gamma)
    w = params.w
    u = None
    if route == "auto":
        if lin + w * params.bounds.d_lo >= 0.0:
            u = storage.u_min
        elif lin + w * params.bounds.d_hi <= 0.0:
            u = storage.u_max
        elif isinstance(cost, Arbitrage) and storage.lossless and inflow.is_zero:
            u = storage.u_min if lin + w * price > 0.0 else storage.u_max
        else:
            u = _balancing_closed_form(lin, w, cost, delta, t, storage, inflow)
    if u is None:
        def objective(x):
            f = cost.best_inflow(x, delta, price, t, storage, inflow)
            return lin * x + w * cost.evaluate(x, f, delta, price, t, storage)

        u = minimize_stage(objective, cost, storage.u_min, storage.u_max, delta, price, t,
                           storage, inflow)
    if enforce_level_constraint:
        lo, hi = level_box(state.s, storage)
        u = min(max(u, lo), hi)
    f = cost.best_inflow(u, delta, price, t, storage, inflow)
    return Decision(u, f, lin * u + w * cost.evaluate(u, f, delta, price, t, storage))


def greedy_step(state: StorageState, delta: float, price: float, t: int, cost: CostSpec,
                storage: StorageParams, inflow: InflowSet) -> Decision:
    """Minimise the realised stage cost subject to the next level staying feasible."""
    lo, hi = level_box(state.s, storage)
    if lo > hi + BOUND_TOL:
        raise InfeasibleStep(f"no admissible operation at s={state.s}")
    hi = max(hi, lo)

    def objective(x):
        f = cost.best_inflow(x, delta, price, t, storage, inflow)
        return cost.evaluate(x, f, delta, price, t, storage)

    u = minimize_stage(objective, cost, lo, hi, delta, price, t, storage, inflow, prefer_zero=True)
    f = cost.best_inflow(u, delta, price, t, storage, inflow)
    return Decision(u, f, cost.evaluate(u, f, delta, price, t, storage))


def no_storage_step(state: StorageState, delta: float, price: float, t: int, cost: CostSpec,
                    storage: StorageParams, inflow: InflowSet) -> Decision:
    f = cost.best_inflow(0.0, delta, price, t, storage, inflow)
    return Decision(0.0, f, cost.evaluate(0.0, f, delta, price, t, storage))


def _inflow_array(cost, U, delta, price, t, storage, inflow):
    if inflow.is_zero:
        return 0.0
    fn = np.vectorize(lambda x: cost.best_inflow(float(x), delta, price, t, storage, inflow))
    return fn(U)


def _candidates(lo, hi, frac, extras):
    """Operation candidates per row: a uniform grid on [lo, hi] plus clamped extras."""
    grid = lo[:, None] + frac[None, :] * (hi - lo)[:, None]
    if extras:
        ex = np.clip(np.array(extras)[None, :], lo[:, None], hi[:, None])
        grid = np.concatenate([grid, ex], axis=1)
    return grid


def clairvoyant_plan(deltas, prices, storage: StorageParams, cost: CostSpec,
                     inflow: InflowSet, s1: float, s_grid_points: int = 401,
                     u_grid_points: int = 201, t0: int = 1) -> list[Decision]:
    """Hindsight plan for a realised trace by backward induction on a level grid.

    Values between grid levels are linearly interpolated, so the plan is an
    approximation of the deterministic optimum that tightens as the grids are
    refined. The returned decisions are the forward rollout from ``s1``.
    """
    if s_grid_points < 3 or u_grid_points < 3:
        raise ValueError("grid counts must be >= 3")
    deltas = np.asarray(deltas, dtype=float)
    prices = np.asarray(prices, dtype=float)
    T = len(deltas)
    lam = storage.lam
    s_grid = np.linspace(storage.s_min, storage.s_max, s_grid_points)
    frac = np.linspace(0.0, 1.0, u_grid_points)
    lo_all = np.maximum(storage.u_min, storage.s_min - lam * s_grid)
    hi_all = np.maximum(np.minimum(storage.u_max, storage.s_max - lam * s_grid), lo_all)

    def extras(k):
        d, p, t = float(deltas[k]), float(prices[k]), t0 + k
        ex = [0.0] + list(cost.breakpoints(d, p, t, storage, inflow))
        ex += [convert_inverse(d + f, storage) for f in {inflow.f_min, inflow.f_max}]
        return ex

    def q_values(k, s_vals, lo, hi, v_next):
        d, p, t = float(deltas[k]), float(prices[k]), t0 + k
        U = _candidates(lo, hi, frac, extras(k))
        F = _inflow_array(cost, U, d, p, t, storage, inflow)
        g = cost.evaluate(U, F, d, p, t, storage)
        s_next = np.clip(lam * s_vals[:, None] + U, storage.s_min, storage.s_max)
        return U, F, g + np.interp(s_next, s_grid, v_next)

    values = np.zeros((T + 1, s_grid_points))
    for k in range(T - 1, -1, -1):
        _, _, Q = q_values(k, s_grid, lo_all, hi_all, values[k + 1])
        values[k] = Q.min(axis=1)

    plan = []
    s = float(s1)
    for k in range(T):
        lo, hi = level_box(s, storage)
        hi = max(hi, lo)
        U, F, Q = q_values(k, np.array([s]), np.array([lo]), np.array([hi]), values[k + 1])
        U, Q = U[0], Q[0]
        best = Q.min()
        ties = np.flatnonzero(Q <= best + TIE_RTOL * max(1.0, abs(best)))
        j = ties[np.argmin(np.abs(U[ties]))]
        u = float(U[j])
        f = float(F if np.isscalar(F) else F[0][j])
        d, p, t = float(deltas[k]), float(prices[k]), t0 + k
        plan.append(Decision(u, f, float(cost.evaluate(u, f, d, p, t, storage))))
        s = lam * s + u
    return plan


# -- policy objects used by the simulator -----------------------------------


@dataclass(frozen=True)
class OmgPolicy:
    params: OmgParams
    enforce_level_constraint: bool = False
    name: str = "omg"

    def decide(self, state, delta, price, t, cost, storage, inflow) -> Decision:
        return omg_step(state, delta, price, t, cost, storage, inflow, self.params,
                        self.enforce_level_constraint)


@dataclass(frozen=True)
class GreedyPolicy:
    name: str = "greedy"

    def decide(self, state, delta, price, t, cost, storage, inflow) -> Decision:
        return greedy_step(state, delta, price, t, cost, storage, inflow)


@dataclass(frozen=True)
class NoStoragePolicy:
    name: str = "no_storage"

    def decide(self, state, delta, price, t, cost, storage, inflow) -> Decision:
        return no_storage_step(state, delta, price, t, cost, storage, inflow)


@dataclass(frozen=True)
class ClairvoyantPolicy:
    s_grid_points: int = 401
    u_grid_points: int = 201
    name: str = "clairvoyant"

    def __post_init__(self):
        if self.s_grid_points < 3 or self.u_grid_points < 3:
            raise ValueError("grid counts must be >= 3")

    def plan(self, deltas, prices, storage, cost, inflow, s1) -> list[Decision]:
        return clairvoyant_plan(deltas, prices, storage, cost, inflow, s1,
                                self.s_grid_points, self.u_grid_points)


Policy = OmgPolicy | GreedyPolicy | NoStoragePolicy | ClairvoyantPolicy
