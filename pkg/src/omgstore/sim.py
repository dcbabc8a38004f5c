"""Paired-seed simulation of storage policies against disturbance processes."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .costs import CostSpec, SupportBounds, global_subgradient_bounds
from .errors import ConfigError, FeasibilityViolation, MismatchedSeeds
from .policies import ClairvoyantPolicy, NoStoragePolicy, OmgPolicy, Policy
from .processes import MarkovChain, Process, make_rng
from .storage import BOUND_TOL, InflowSet, StorageParams, StorageState, check_storage
from .tuning import check_params, markov_bound, markov_epoch_stats, vos_interval

MAX_TRAJECTORY_STEPS = 100_000


@dataclass(frozen=True)
class SimConfig:
    storage: StorageParams
    cost: CostSpec
    process: Process
    policies: tuple[Policy, ...]
    T: int
    s1: float
    seed: int = 0
    replications: int = 1
    inflow: InflowSet = field(default_factory=InflowSet)
    imbalance_sign: int = 1
    keep_trajectory: bool = False
    threads: int | None = None

    def __post_init__(self):
        check_storage(self.storage)
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.storage.s_min <= self.s1 <= self.storage.s_max:
            raise ConfigError(f"s1={self.s1} outside [{self.storage.s_min}, {self.storage.s_max}]")
        if self.imbalance_sign not in (1, -1):
            raise ConfigError("imbalance_sign must be +1 or -1")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError(f"policy names must be unique: {names}")

    @property
    def supports(self) -> SupportBounds:
        sb = self.process.supports
        if self.imbalance_sign == -1:
            sb = SupportBounds(-sb.delta_max, -sb.delta_min, sb.price_min, sb.price_max)
        return sb


@dataclass
class PolicySummary:
    name: str
    costs: list[float]
    violations: int
    aborted: list[str]
    mean: float
    se: float
    bound: float | None = None
    markov_bound: float | None = None
    vos: dict | None = None
    trajectory: dict | None = None

    def to_dict(self, with_trajectory: bool = False) -> dict:
        d = {
            "name": self.name,
            "costs": self.costs,
            "mean": self.mean,
            "se": self.se,
            "violations": self.violations,
            "aborted": self.aborted,
            "bound": self.bound,
            "markov_bound": self.markov_bound,
            "vos": self.vos,
        }
        if with_trajectory and self.trajectory is not None:
            d["trajectory"] = self.trajectory
        return d


@dataclass
class SimResult:
    seed: int
    streams: list[int]
    T: int
    no_storage_costs: list[float]
    policies: dict[str, PolicySummary]

    def __getitem__(self, name: str) -> PolicySummary:
        return self.policies[name]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "streams": self.streams,
            "T": self.T,
            "no_storage_mean": _mean(self.no_storage_costs),
            "policies": {k: v.to_dict() for k, v in self.policies.items()},
        }


def _mean(xs):
    xs = [x for x in xs if math.isfinite(x)]
    return float(np.mean(xs)) if xs else float("nan")


def _se(xs):
    xs = [x for x in xs if math.isfinite(x)]
    if len(xs) < 2:
        return 0.0
    return float(np.std(xs, ddof=1) / math.sqrt(len(xs)))


def _rollout(policy, config, deltas, prices, keep):
    storage, cost, inflow = config.storage, config.cost, config.inflow
    T = config.T
    if isinstance(policy, ClairvoyantPolicy):
        decisions = policy.plan(deltas, prices, storage, cost, inflow, config.s1)
    else:
        decisions = None
    s = config.s1
    total = 0.0
    traj = {"t": [], "s": [], "u": [], "f": [], "delta": [], "price": [], "g": []} if keep else None
    for k in range(T):
        t = k + 1
        d, p = float(deltas[k]), float(prices[k])
        if decisions is None:
            dec = policy.decide(StorageState(s, t), d, p, t, cost, storage, inflow)
        else:
            dec = decisions[k]
        g = float(cost.evaluate(dec.u, dec.f, d, p, t, storage))
        if keep:
            for key, val in zip(traj, (t, s, dec.u, dec.f, d, p, g)):
                traj[key].append(val)
        total += g
        if isinstance(policy, NoStoragePolicy):
            # a cost reference without a device: there is no level to track
            continue
        s_next = storage.lam * s + dec.u
        if s_next < storage.s_min - BOUND_TOL or s_next > storage.s_max + BOUND_TOL:
            raise FeasibilityViolation(policy.name, t + 1, s_next)
        s = s_next
    return total / T, traj


def _replication(config: SimConfig, r: int):
    rng = make_rng(config.seed, r)
    deltas, prices = config.process.generate(rng, config.T)
    deltas = deltas * config.imbalance_sign
    keep = config.keep_trajectory and r == 0 and config.T <= MAX_TRAJECTORY_STEPS
    out = {}
    for policy in config.policies:
        try:
            j, traj = _rollout(policy, config, deltas, prices, keep)
            out[policy.name] = (j, traj, None)
        except FeasibilityViolation as exc:
            out[policy.name] = (float("nan"), None, str(exc))
    ns = NoStoragePolicy()
    out["__no_storage__"] = (_rollout(ns, config, deltas, prices, False)[0], None, None)
    return out


def _thread_count(config: SimConfig) -> int:
    if config.threads is not None:
        return max(1, config.threads)
    env = os.environ.get("OMG_THREADS")
    return max(1, int(env)) if env else 1


def run(config: SimConfig) -> SimResult:
    """Simulate every policy on common disturbance draws for each replication."""
    bounds = global_subgradient_bounds(config.cost, config.supports, config.storage, config.inflow)
    for pol in config.policies:
        if isinstance(pol, OmgPolicy):
            b = pol.params.bounds
            if b.d_lo > bounds.d_lo + 1e-12 or b.d_hi < bounds.d_hi - 1e-12:
                raise ConfigError("OMG parameters were tuned with subgradient bounds that do not "
                                  "cover the cost over the declared supports")
            check_params(config.storage, pol.params)

    streams = list(range(config.replications))
    n_threads = min(_thread_count(config), config.replications)
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            reps = list(ex.map(lambda r: _replication(config, r), streams))
    else:
        reps = [_replication(config, r) for r in streams]

    no_storage = [rep["__no_storage__"][0] for rep in reps]
    stats = None
    if isinstance(config.process, MarkovChain):
        proc = config.process
        stats = markov_epoch_stats(proc.P, proc.reference_state, config.storage.lam)

    summaries = {}
    for pol in config.policies:
        costs = [rep[pol.name][0] for rep in reps]
        aborted = [rep[pol.name][2] for rep in reps if rep[pol.name][2] is not None]
        summ = PolicySummary(pol.name, costs, len(aborted), aborted, _mean(costs), _se(costs))
        summ.trajectory = reps[0][pol.name][1]
        if isinstance(pol, OmgPolicy):
            summ.bound = pol.params.certified_bound
            if stats is not None:
                summ.markov_bound = markov_bound(config.storage, pol.params.gamma, pol.params.w, stats)
            summ.vos = vos_interval(_mean(no_storage), summ.mean, summ.bound).to_dict()
        summaries[pol.name] = summ
    return SimResult(config.seed, streams, config.T, no_storage, summaries)


# -- comparison ------------------------------------------------------------------


@dataclass(frozen=True)
class PairedDelta:
    policy: str
    reference: str
    deltas: tuple[float, ...]
    mean: float
    se: float
    wins: int
    losses: int
    sign_test_p: float

    def to_dict(self):
        return {
            "policy": self.policy,
            "reference": self.reference,
            "mean": self.mean,
            "se": self.se,
            "wins": self.wins,
            "losses": self.losses,
            "sign_test_p": self.sign_test_p,
            "deltas": list(self.deltas),
        }


def paired_delta(a: PolicySummary, b: PolicySummary) -> PairedDelta:
    """Per-seed ``J(a) - J(b)`` with a two-sided sign test (ties dropped)."""
    d = [x - y for x, y in zip(a.costs, b.costs)]
    finite = [x for x in d if math.isfinite(x)]
    wins = sum(1 for x in finite if x < 0)
    losses = sum(1 for x in finite if x > 0)
    n = wins + losses
    p = float(sps.binomtest(wins, n, 0.5).pvalue) if n else 1.0
    return PairedDelta(a.name, b.name, tuple(d), _mean(d), _se(d), wins, losses, p)


def compare(results, reference: str | None = None) -> dict:
    """Ranking by mean cost and paired per-seed deltas against ``reference``.

    ``results`` is either a single :class:`SimResult` or a list of them run on
    the same seeds (one policy set each).
    """
    if isinstance(results, SimResult):
        results = [results]
    streams = results[0].streams
    seed = results[0].seed
    for r in results[1:]:
        if r.streams != streams or r.seed != seed:
            raise MismatchedSeeds("results were not produced on common seeds")
    summaries: dict[str, PolicySummary] = {}
    for r in results:
        summaries.update(r.policies)
    if reference is None:
        reference = "no_storage" if "no_storage" in summaries else next(iter(summaries))
    ns_mean = _mean(results[0].no_storage_costs)
    table = []
    for name, s in sorted(summaries.items(), key=lambda kv: (kv[1].mean, kv[0])):
        row = {"policy": name, "mean": s.mean, "se": s.se, "bound": s.bound,
               "pct_of_no_storage": s.mean / ns_mean if ns_mean else None}
        row["vos"] = s.vos
        table.append(row)
    deltas = [paired_delta(s, summaries[reference]).to_dict()
              for name, s in summaries.items() if name != reference]
    return {"reference": reference, "ranking": table, "paired": deltas}
