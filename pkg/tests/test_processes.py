import io

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from omgstore.costs import SupportBounds
from omgstore.errors import ConfigError, GapError, MissingColumn, NonMonotoneTime, NotIrreducible, ParseError
from omgstore.processes import (
    Empirical,
    IidSpec,
    Laplace,
    MarkovChain,
    PointMass,
    SyntheticWindPrice,
    Uniform,
    dist_from_dict,
    load_trace,
    make_rng,
    markov_next,
    sample_iid,
)
from omgstore.tuning import markov_epoch_stats

WIDE = SupportBounds(-100.0, 100.0, -100.0, 100.0)


class TestIid:
    def test_point_mass(self):
        spec = IidSpec(PointMass(0.0), PointMass(1.0))
        rng = make_rng(0)
        assert all(sample_iid(spec, rng) == (0.0, 1.0) for _ in range(20))

    def test_collapsed_uniform(self):
        d, _ = IidSpec(Uniform(2.0, 2.0), PointMass(0.0)).generate(make_rng(1), 50)
        assert np.all(d == 2.0)

    def test_laplace_moments(self):
        spec = IidSpec(Laplace(0.0, 0.149), PointMass(0.0), WIDE)
        d, _ = spec.generate(make_rng(2), 1_000_000)
        assert abs(d.mean()) <= 0.001
        assert abs(d.std() - 0.149) <= 0.002

    def test_laplace_shape(self):
        x = Laplace(1.0, 2.0).draw(make_rng(3), 200_000)
        res = stats.kstest(x, stats.laplace(loc=1.0, scale=2.0 / np.sqrt(2)).cdf)
        assert res.pvalue > 1e-3

    def test_clipped_to_supports(self):
        sb = SupportBounds(-0.1, 0.1, 0.0, 2.0)
        d, p = IidSpec(Laplace(0.0, 0.149), Uniform(-1.0, 3.0), sb).generate(make_rng(4), 10_000)
        assert d.min() >= -0.1 and d.max() <= 0.1
        assert p.min() >= 0.0 and p.max() <= 2.0
        assert np.any(d == 0.1) and np.any(p == 2.0)

    def test_unbounded_needs_supports(self):
        with pytest.raises(ConfigError):
            IidSpec(Laplace(0.0, 1.0), PointMass(0.0))

    def test_joint_empirical(self):
        spec = IidSpec(joint=((1.0, 10.0), (-1.0, 20.0)))
        d, p = spec.generate(make_rng(5), 1000)
        assert set(zip(d.tolist(), p.tolist())) == {(1.0, 10.0), (-1.0, 20.0)}
        assert spec.supports == SupportBounds(-1.0, 1.0, 10.0, 20.0)

    def test_deterministic_streams(self):
        spec = IidSpec(Laplace(0.0, 1.0), Uniform(0, 1), WIDE)
        a = spec.generate(make_rng(42, 3), 100)
        b = spec.generate(make_rng(42, 3), 100)
        c = spec.generate(make_rng(42, 4), 100)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        assert not np.array_equal(a[0], c[0])

    @pytest.mark.parametrize("dist", [Laplace(1.0, 2.0), Uniform(0.0, 3.0), PointMass(4.0),
                                      Empirical((1.0, 2.0, 5.0))])
    def test_dict_round_trip(self, dist):
        assert dist_from_dict(dist.to_dict()) == dist

    def test_laplace_needs_positive_sigma(self):
        with pytest.raises(ConfigError):
            Laplace(0.0, 0.0)


class TestMarkov:
    def test_absorbing_rejected(self):
        with pytest.raises(NotIrreducible):
            MarkovChain(((1.0, 0.0), (0.0, 1.0)), ((0.0, 0.0), (1.0, 1.0)))

    def test_permutation_alternates(self):
        chain = MarkovChain(((0.0, 1.0), (1.0, 0.0)), ((-1.0, 5.0), (1.0, 7.0)))
        rng = make_rng(0)
        state, seen = 0, []
        for _ in range(6):
            state, em = markov_next(chain, state, rng)
            seen.append((state, em))
        assert [s for s, _ in seen] == [1, 0, 1, 0, 1, 0]
        assert seen[0][1] == (1.0, 7.0)
        d, p = chain.generate(make_rng(1), 4)
        assert d.tolist() == [-1.0, 1.0, -1.0, 1.0]

    def test_stationary_distribution(self):
        chain = MarkovChain(((0.5, 0.5), (0.5, 0.5)), ((0.0, 0.0), (1.0, 1.0)))
        st = chain.states(make_rng(7), 1_000_000)
        assert abs(np.mean(st == 0) - 0.5) <= 0.002

    @pytest.mark.parametrize("P,r", [
        ([[0.5, 0.5], [0.5, 0.5]], 1),
        ([[0.2, 0.5, 0.3], [0.4, 0.1, 0.5], [0.6, 0.3, 0.1]], 0),
        ([[0.9, 0.1, 0.0], [0.0, 0.8, 0.2], [0.3, 0.0, 0.7]], 2),
    ])
    def test_return_time_matches_exact(self, P, r):
        n = len(P)
        chain = MarkovChain(tuple(map(tuple, P)), tuple((float(i), 0.0) for i in range(n)), initial_state=r)
        exact = markov_epoch_stats(P, r, 1.0).e_dt
        st = chain.states(make_rng(11), 200_000 * int(np.ceil(exact)))
        visits = np.flatnonzero(st == r)
        gaps = np.diff(visits)[:100_000]
        assert len(gaps) == 100_000
        assert abs(gaps.mean() - exact) <= 0.02 * exact

    def test_supports_from_emissions(self):
        chain = MarkovChain(((0.5, 0.5), (0.5, 0.5)), ((-2.0, 1.0), (3.0, 4.0)))
        assert chain.supports == SupportBounds(-2.0, 3.0, 1.0, 4.0)

    def test_bad_emissions(self):
        with pytest.raises(ConfigError):
            MarkovChain(((0.5, 0.5), (0.5, 0.5)), ((0.0, 0.0),))


class TestTrace:
    def test_happy_path(self):
        tr = load_trace(io.StringIO("t,delta,price\n1,0.5,10\n2,-0.5,20\n3,0,30\n"))
        assert len(tr) == 3
        assert tr.delta == (0.5, -0.5, 0.0)
        d, p = tr.generate(None, 2)
        assert p.tolist() == [10.0, 20.0]

    def test_gap(self):
        with pytest.raises(GapError) as exc:
            load_trace(b"t,delta,price\n1,0,0\n2,0,0\n4,0,0\n")
        assert exc.value.line == 4

    def test_non_monotone(self):
        with pytest.raises(NonMonotoneTime) as exc:
            load_trace(b"t,delta,price\n1,0,0\n2,0,0\n2,0,0\n")
        assert exc.value.line == 4

    def test_must_start_at_one(self):
        with pytest.raises(GapError):
            load_trace(b"t,delta,price\n2,0,0\n")

    def test_missing_price(self):
        with pytest.raises(MissingColumn):
            load_trace(b"t,delta\n1,0\n", require_price=True)
        assert load_trace(b"t,delta\n1,0\n").price == (0.0,)

    def test_parse_error_line(self):
        with pytest.raises(ParseError) as exc:
            load_trace(b"t,delta,price\n1,0,0\n2,abc,0\n")
        assert exc.value.line == 3

    def test_penalty_columns(self, tmp_path):
        path = tmp_path / "tr.csv"
        path.write_text("t,delta,price,q_plus,q_minus\n1,1,0,2,3\n2,-1,0,4,5\n")
        tr = load_trace(path)
        assert tr.q_plus == (2.0, 4.0) and tr.q_minus == (3.0, 5.0)
        with pytest.raises(MissingColumn):
            load_trace(b"t,delta,price,q_plus\n1,0,0,1\n")

    def test_too_short(self):
        tr = load_trace(b"t,delta,price\n1,0,0\n")
        with pytest.raises(ConfigError):
            tr.generate(None, 5)


class TestSynthetic:
    def test_supports_and_moments(self):
        gen = SyntheticWindPrice()
        d, p = gen.generate(make_rng(0), 200_000)
        sb = gen.supports
        assert sb.delta_max == pytest.approx(5 * 20.1)
        assert d.min() >= sb.delta_min and d.max() <= sb.delta_max
        assert p.min() >= sb.price_min and p.max() <= sb.price_max
        assert abs(d.std() - 20.1) / 20.1 < 0.02

    def test_evening_peak(self):
        gen = SyntheticWindPrice()
        _, p = gen.generate(make_rng(1), 24 * 5000)
        by_hour = p.reshape(-1, 24).mean(axis=0)
        assert int(np.argmax(by_hour)) == 18
