import numpy as np
import pytest
from numpy.testing import assert_allclose

from omgstore.costs import (
    Arbitrage,
    Balancing,
    Constant,
    SubgradientBounds,
    SupportBounds,
    global_subgradient_bounds,
)
from omgstore.policies import (
    ClairvoyantPolicy,
    clairvoyant_plan,
    golden_section,
    greedy_step,
    no_storage_step,
    omg_objective,
    omg_step,
)
from omgstore.storage import InflowSet, StorageParams, StorageState, level_box
from omgstore.tuning import OmgParams, tune_max_weight

from .conftest import FAMILIES, random_cost_setup, seed_for, random_params, random_storage
from .oracles import stage_oracle

NOFLOW = InflowSet()
UNIT = SubgradientBounds(-1.0, 1.0)


def _ideal_params(ideal, bounds):
    return OmgParams(-50.0, 40.0, bounds, 1.25)


class TestOmgExamples:
    def test_arbitrage_sells_at_mid_level(self, ideal):
        params = _ideal_params(ideal, SubgradientBounds(0.0, 2.0))
        d = omg_step(StorageState(50.0), 0.0, 1.0, 1, Arbitrage(), ideal, NOFLOW, params)
        assert d.u == -10.0

    def test_arbitrage_buys_when_empty(self, ideal):
        params = _ideal_params(ideal, SubgradientBounds(0.0, 2.0))
        d = omg_step(StorageState(0.0), 0.0, 1.0, 1, Arbitrage(), ideal, NOFLOW, params)
        assert d.u == 10.0

    def test_arbitrage_tie_charges(self, ideal):
        params = _ideal_params(ideal, SubgradientBounds(0.0, 2.0))
        # lam*(s+gamma) + W*p = (10 - 50) + 40 = 0
        d = omg_step(StorageState(10.0), 0.0, 1.0, 1, Arbitrage(), ideal, NOFLOW, params)
        assert d.u == 10.0

    def test_balancing_interior_zeroes_residual(self, ideal):
        d = omg_step(StorageState(50.0), -3.0, 0.0, 1, Balancing(), ideal, NOFLOW, _ideal_params(ideal, UNIT))
        assert d.u == -3.0
        assert Balancing().evaluate(d.u, d.f, -3.0, 0.0, 1, ideal) == 0.0

    def test_balancing_thresholds(self, ideal):
        params = _ideal_params(ideal, UNIT)
        # lam*(s+gamma) >= W*q+ -> discharge fully
        assert omg_step(StorageState(90.0), 3.0, 0.0, 1, Balancing(), ideal, NOFLOW, params).u == -10.0
        # lam*(s+gamma) <= -W*q- -> charge fully
        assert omg_step(StorageState(10.0), -3.0, 0.0, 1, Balancing(), ideal, NOFLOW, params).u == 10.0

    def test_level_constraint_clamps(self, ideal):
        bad = OmgParams(-200.0, 1.0, UNIT, 0.0)
        free = omg_step(StorageState(95.0), 0.0, 0.0, 1, Balancing(), ideal, NOFLOW, bad)
        held = omg_step(StorageState(95.0), 0.0, 0.0, 1, Balancing(), ideal, NOFLOW, bad,
                        enforce_level_constraint=True)
        assert free.u == 10.0
        assert held.u == 5.0


@pytest.mark.parametrize("family", FAMILIES)
class TestOmgOracle:
    def test_matches_oracle(self, family):
        rng = np.random.default_rng(seed_for("oracle", family))
        for _ in range(400):
            storage = random_storage(rng)
            cost, sb, inflow = random_cost_setup(rng, family, storage)
            bounds = global_subgradient_bounds(cost, sb, storage, inflow)
            params = random_params(rng, storage, bounds)
            s = rng.uniform(storage.s_min, storage.s_max)
            d, p, t = rng.uniform(sb.delta_min, sb.delta_max), rng.uniform(sb.price_min, sb.price_max), int(rng.integers(1, 100))
            dec = omg_step(StorageState(s), d, p, t, cost, storage, inflow, params)
            got = omg_objective(dec.u, dec.f, s, d, p, t, cost, storage, params)
            ref, _ = stage_oracle(storage.lam * (s + params.gamma), params.w, cost, d, p, t, storage, inflow)
            assert abs(got - ref) <= 1e-8 * max(1.0, abs(ref))
            assert storage.u_min <= dec.u <= storage.u_max
            assert inflow.f_min <= dec.f <= inflow.f_max

    def test_shortcut_agrees_with_numeric(self, family):
        rng = np.random.default_rng(seed_for("shortcut", family))
        fired = 0
        for _ in range(400):
            storage = random_storage(rng)
            cost, sb, inflow = random_cost_setup(rng, family, storage)
            bounds = global_subgradient_bounds(cost, sb, storage, inflow)
            params = random_params(rng, storage, bounds)
            # bias the level towards the ends where the shortcuts fire
            s = storage.s_min if rng.random() < 0.5 else storage.s_max
            lin = storage.lam * (s + params.gamma)
            if not (lin + params.w * bounds.d_lo >= 0 or lin + params.w * bounds.d_hi <= 0):
                continue
            fired += 1
            d, p, t = rng.uniform(sb.delta_min, sb.delta_max), rng.uniform(sb.price_min, sb.price_max), 5
            a = omg_step(StorageState(s), d, p, t, cost, storage, inflow, params)
            b = omg_step(StorageState(s), d, p, t, cost, storage, inflow, params, route="numeric")
            oa = omg_objective(a.u, a.f, s, d, p, t, cost, storage, params)
            ob = omg_objective(b.u, b.f, s, d, p, t, cost, storage, params)
            assert a.u in (storage.u_min, storage.u_max)
            assert abs(oa - ob) <= 1e-8 * max(1.0, abs(ob))
        assert fired > 50


class TestGreedy:
    def test_zeroes_residual(self, ideal):
        assert greedy_step(StorageState(50.0), -3.0, 0.0, 1, Balancing(), ideal, NOFLOW).u == -3.0

    def test_sells_when_full(self, ideal):
        assert greedy_step(StorageState(100.0), 0.0, 2.0, 1, Arbitrage(), ideal, NOFLOW).u == -10.0

    def test_idle_without_imbalance(self, ideal):
        assert greedy_step(StorageState(50.0), 0.0, 0.0, 1, Balancing(), ideal, NOFLOW).u == 0.0

    def test_respects_level_box(self, ideal):
        d = greedy_step(StorageState(98.0), 8.0, 0.0, 1, Balancing(), ideal, NOFLOW)
        assert d.u == 2.0

    @pytest.mark.parametrize("family", FAMILIES)
    def test_never_worse_than_idle(self, family):
        rng = np.random.default_rng(seed_for("greedy", family))
        for _ in range(300):
            storage = random_storage(rng)
            cost, sb, inflow = random_cost_setup(rng, family, storage)
            s = rng.uniform(storage.s_min, storage.s_max)
            d, p, t = rng.uniform(sb.delta_min, sb.delta_max), rng.uniform(sb.price_min, sb.price_max), 9
            g = greedy_step(StorageState(s), d, p, t, cost, storage, inflow)
            # idling may be infeasible for a leaky storage near its limits
            lo, hi = level_box(s, storage)
            u0 = min(max(0.0, lo), hi)
            f0 = cost.best_inflow(u0, d, p, t, storage, inflow)
            assert g.objective_value <= cost.evaluate(u0, f0, d, p, t, storage) + 1e-9
            assert storage.s_min - 1e-9 <= storage.lam * s + g.u <= storage.s_max + 1e-9


class TestNoStorage:
    @pytest.mark.parametrize("d,p", [(0.0, 0.0), (5.0, 1.0), (-3.0, 7.0)])
    def test_always_idle(self, ideal, d, p):
        assert no_storage_step(StorageState(20.0), d, p, 1, Arbitrage(), ideal, NOFLOW).u == 0.0


class TestGoldenSection:
    def test_quadratic(self):
        assert_allclose(golden_section(lambda x: (x - 1.3) ** 2, -5, 5), 1.3, atol=1e-8)

    def test_endpoint(self):
        assert golden_section(lambda x: x, 0.0, 1.0) == 0.0


class TestClairvoyant:
    def test_single_step_equals_greedy(self):
        rng = np.random.default_rng(4)
        for family in ("balancing", "colocated", "arbitrage"):
            for _ in range(30):
                storage = random_storage(rng, lossless=True)
                cost, sb, inflow = random_cost_setup(rng, family, storage)
                s = rng.uniform(storage.s_min, storage.s_max)
                d, p = rng.uniform(sb.delta_min, sb.delta_max), rng.uniform(sb.price_min, sb.price_max)
                plan = clairvoyant_plan([d], [p], storage, cost, inflow, s)
                g = greedy_step(StorageState(s), d, p, 1, cost, storage, inflow)
                assert_allclose(plan[0].objective_value, g.objective_value, atol=1e-9)

    def test_constant_price_telescopes(self, ideal):
        p, s1 = 3.0, 40.0
        plan = clairvoyant_plan(np.zeros(12), np.full(12, p), ideal, Arbitrage(), NOFLOW, s1)
        total = sum(x.objective_value for x in plan)
        s_end = s1 + sum(x.u for x in plan)
        assert_allclose(total, p * (s_end - s1), atol=1e-9)
        assert_allclose(total, p * (ideal.s_min - s1), atol=1e-9)

    def test_buys_low_sells_high(self, ideal):
        prices = [1.0, 1.0, 5.0, 5.0]
        plan = clairvoyant_plan(np.zeros(4), prices, ideal, Arbitrage(), NOFLOW, 0.0)
        assert [x.u for x in plan] == [10.0, 10.0, -10.0, -10.0]

    def test_not_worse_than_greedy_or_omg(self):
        rng = np.random.default_rng(8)
        storage = StorageParams(1.0, 0.0, 20.0, -2.0, 2.0)
        cost = Balancing(Constant(1.0), Constant(2.0))
        params = tune_max_weight(storage, global_subgradient_bounds(cost, SupportBounds(-3, 3, 0, 0), storage))
        for _ in range(5):
            d = np.clip(rng.laplace(0, 1.5, 60), -3, 3)
            p = np.zeros(60)
            plan = clairvoyant_plan(d, p, storage, cost, NOFLOW, 10.0)
            j_cl = sum(x.objective_value for x in plan)
            ns = sum(cost.evaluate(0.0, 0.0, x, 0.0, 1, storage) for x in d)
            for step_fn in ("greedy", "omg"):
                s, total = 10.0, 0.0
                for k in range(60):
                    st = StorageState(s, k + 1)
                    if step_fn == "greedy":
                        x = greedy_step(st, d[k], 0.0, k + 1, cost, storage, NOFLOW)
                    else:
                        x = omg_step(st, d[k], 0.0, k + 1, cost, storage, NOFLOW, params)
                    total += cost.evaluate(x.u, x.f, d[k], 0.0, k + 1, storage)
                    s += x.u
                assert j_cl <= total + 0.01 * ns

    def test_grid_refinement(self):
        rng = np.random.default_rng(9)
        storage = StorageParams(0.98, 0.0, 10.0, -1.5, 1.5, 0.9, 0.9)
        from omgstore.costs import CoLocated

        d = rng.normal(0, 1, 48)
        p = 5 + 3 * np.sin(np.arange(48) / 4)
        costs = []
        for n in (101, 401):
            plan = clairvoyant_plan(d, p, storage, CoLocated(), NOFLOW, 5.0, s_grid_points=n)
            costs.append(sum(x.objective_value for x in plan))
        ns = sum(CoLocated().evaluate(0.0, 0.0, x, y, 1, storage) for x, y in zip(d, p))
        assert costs[1] <= costs[0] + 0.01 * ns

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            ClairvoyantPolicy(s_grid_points=2)
