"""Generalized storage: parameters, dynamics and bus-side conversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleStorage, NonFrequentActing, RampViolation

BOUND_TOL = 1e-9


@dataclass(frozen=True)
class StorageParams:
    """Physical description of a generalized storage.

    ``lam`` is the per-step retention factor, ``s_min``/``s_max`` the level
    box, ``u_min``/``u_max`` the per-step operation box and ``mu_c``/``mu_d``
    the charging and discharging efficiencies.
    """

    lam: float
    s_min: float
    s_max: float
    u_min: float
    u_max: float
    mu_c: float = 1.0
    mu_d: float = 1.0

    @property
    def lossless(self) -> bool:
        return self.mu_c == 1.0 and self.mu_d == 1.0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "u_min": self.u_min,
            "u_max": self.u_max,
            "mu_c": self.mu_c,
            "mu_d": self.mu_d,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StorageParams":
        return cls(
            lam=float(d["lambda"]),
            s_min=float(d["s_min"]),
            s_max=float(d["s_max"]),
            u_min=float(d["u_min"]),
            u_max=float(d["u_max"]),
            mu_c=float(d.get("mu_c", 1.0)),
            mu_d=float(d.get("mu_d", 1.0)),
        )


@dataclass(frozen=True)
class StorageState:
    s: float
    t: int = 1


@dataclass(frozen=True)
class InflowSet:
    """Closed interval of admissible controllable inflow per step."""

    f_min: float = 0.0
    f_max: float = 0.0

    def __post_init__(self):
        if not self.f_min <= self.f_max:
            raise ValueError(f"inflow interval is empty: [{self.f_min}, {self.f_max}]")

    @property
    def is_zero(self) -> bool:
        return self.f_min == 0.0 and self.f_max == 0.0

    def clamp(self, f: float) -> float:
        return min(max(f, self.f_min), self.f_max)


def check_storage(p: StorageParams) -> StorageParams:
    """Validate the Definition-style inequalities without the tuning requirement."""
    if not 0.0 < p.lam <= 1.0:
        raise InfeasibleStorage("0 < lambda <= 1", f"lambda={p.lam}")
    if not 0.0 < p.mu_c <= 1.0:
        raise InfeasibleStorage("0 < mu_c <= 1", f"mu_c={p.mu_c}")
    if not 0.0 < p.mu_d <= 1.0:
        raise InfeasibleStorage("0 < mu_d <= 1", f"mu_d={p.mu_d}")
    if not p.s_min <= p.s_max:
        raise InfeasibleStorage("s_min <= s_max")
    if not p.u_min <= 0.0 <= p.u_max:
        raise InfeasibleStorage("u_min <= 0 <= u_max")
    checks = [
        ("feasibility: lambda*s_min + u_max >= s_min", p.lam * p.s_min + p.u_max >= p.s_min),
        ("feasibility: lambda*s_max + u_min <= s_max", p.lam * p.s_max + p.u_min <= p.s_max),
        ("controllability: lambda*s_max + u_max >= s_max", p.lam * p.s_max + p.u_max >= p.s_max),
        ("controllability: lambda*s_min + u_min <= s_min", p.lam * p.s_min + p.u_min <= p.s_min),
    ]
    for name, ok in checks:
        if not ok:
            raise InfeasibleStorage(name)
    return p


def validate_storage(p: StorageParams) -> StorageParams:
    """Return ``p`` if it is a generalized storage that admits tuning.

    Raises :class:`InfeasibleStorage` naming the first violated inequality, or
    :class:`NonFrequentActing` when ``u_max - u_min >= s_max - s_min``.
    """
    check_storage(p)
    if not p.u_max - p.u_min < p.s_max - p.s_min:
        raise NonFrequentActing(
            "frequent acting requires u_max - u_min < s_max - s_min; "
            f"got U^max-U^min = {p.u_max - p.u_min} >= S^max-S^min = {p.s_max - p.s_min}"
        )
    return p


def step(state: StorageState, u: float, p: StorageParams) -> StorageState:
    """Advance the level by one period: ``s' = lam*s + u``. No clamping."""
    if u < p.u_min - BOUND_TOL or u > p.u_max + BOUND_TOL:
        raise RampViolation(f"u={u!r} outside [{p.u_min}, {p.u_max}]")
    return StorageState(p.lam * state.s + u, state.t + 1)


def convert(u, p: StorageParams):
    """Energy drawn from the bus for storage operation ``u``.

    Works on floats and numpy arrays alike.
    """
    if isinstance(u, float | int):
        return u / p.mu_c if u > 0 else u * p.mu_d
    u = np.asarray(u, dtype=float)
    return np.where(u > 0, u / p.mu_c, u * p.mu_d)


def convert_inverse(y: float, p: StorageParams) -> float:
    """The ``u`` whose bus-side draw equals ``y``."""
    return y * p.mu_c if y > 0 else y / p.mu_d


def residual_imbalance(delta, u, f, p: StorageParams):
    return delta - convert(u, p) + f


def level_box(s: float, p: StorageParams) -> tuple[float, float]:
    """Operations keeping the next level inside [s_min, s_max], intersected with the ramp box."""
    lo = max(p.u_min, p.s_min - p.lam * s)
    hi = min(p.u_max, p.s_max - p.lam * s)
    return lo, hi
