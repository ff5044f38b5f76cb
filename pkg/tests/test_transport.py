import itertools

import numpy as np
import pytest

from w1lab.distributions import Exponential, Pareto, PointMass, Uniform, empirical_cdf
from w1lab.transport import (EmpiricalMeasure, TransportCost, dual_lower_bound, ebralidze_majorant, lp_oracle,
                             w1_empirical_pair, w1_vs_law, wr_empirical_pair, wr_vs_law)


def brute_w1_cdf(sample, law, r=1.0, grid=200_001, lo=None, hi=None):
    """Fine trapezoid of |x|^(r-1) |F_n - F|; error is O(grid step) at each jump."""
    s = np.sort(np.asarray(sample, dtype=float))
    lo = min(s[0], law.lower) if lo is None else lo
    hi = max(s[-1], law.upper) if hi is None else hi
    t = np.linspace(lo, hi, grid)
    Fn = np.searchsorted(s, t, side="right") / s.size
    f = np.abs(t) ** (r - 1) * np.abs(Fn - law.cdf(t))
    return float(np.trapezoid(f, t))


class TestEmpiricalPairs:
    def test_identical(self):
        assert w1_empirical_pair([0.3, 0.7], [0.7, 0.3]) == 0.0

    def test_translation(self):
        assert w1_empirical_pair([0.0], [1.0]) == 1.0

    def test_two_point_against_lp(self):
        assert w1_empirical_pair([0, 1], [0.5, 0.5]) == pytest.approx(0.5)
        assert lp_oracle({0: 0.5, 1: 0.5}, {0.5: 1.0}) == pytest.approx(0.5)

    def test_order_two(self):
        assert wr_empirical_pair([0.0], [2.0], 2) == 4.0
        assert wr_empirical_pair([0, 1], [0.5, 0.5], 2) == pytest.approx(0.25)
        assert wr_empirical_pair([1, 2, 3], [3, 1, 2], 3) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError, match="unequal sample sizes"):
            w1_empirical_pair([0, 1], [0])
        with pytest.raises(ValueError):
            wr_empirical_pair([0], [1], 0.5)
        with pytest.raises(ValueError):
            EmpiricalMeasure([])
        with pytest.raises(ValueError):
            EmpiricalMeasure([0.0, np.inf])

    def test_symmetry_and_ties(self):
        a, b = [0.1, 0.1, 0.9], [0.5, 0.2, 0.2]
        assert w1_empirical_pair(a, b) == w1_empirical_pair(b, a)

    def test_matches_brute_force_permutations(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            a, b = rng.normal(size=n), rng.normal(size=n)
            best = min(np.mean(np.abs(a - b[list(p)])) for p in itertools.permutations(range(n)))
            assert w1_empirical_pair(a, b) == pytest.approx(best, abs=1e-12)

    def test_transport_cost_type(self):
        assert TransportCost(0.5, 2).order == 2
        with pytest.raises(ValueError):
            TransportCost(-1.0)


class TestAgainstLaw:
    def test_point_mass(self):
        assert w1_vs_law([2.0, 2.0, 2.0], PointMass(2.0)) == 0.0
        assert wr_vs_law([2.0] * 3, PointMass(2.0), 3) == 0.0

    def test_single_point_uniform(self):
        assert w1_vs_law([0.5], Uniform()) == pytest.approx(0.25, abs=1e-15)
        assert wr_vs_law([0.5], Uniform(), 1) == pytest.approx(0.25, abs=1e-15)
        assert wr_vs_law([0.5], Uniform(), 2) == pytest.approx(1 / 12, abs=1e-15)

    def test_two_points_uniform(self):
        assert w1_vs_law([0.25, 0.75], Uniform()) == pytest.approx(0.125, abs=1e-15)

    def test_iid_uniform_single_point_formula(self):
        for u in (0.0, 0.1, 0.37, 1.0, 1.4):
            expected = brute_w1_cdf([u], Uniform(), lo=-0.5, hi=1.5)
            assert w1_vs_law([u], Uniform()) == pytest.approx(expected, abs=5e-5)
        assert w1_vs_law([0.3], Uniform()) == pytest.approx((0.09 + 0.49) / 2)

    @pytest.mark.parametrize("law", [Uniform(), Uniform(-1, 2), Exponential(2.0), Pareto(3.0)])
    def test_cdf_route_matches_quantile_route(self, law):
        rng = np.random.default_rng(11)
        for n in (1, 2, 7, 50):
            x = law.ppf(rng.random(n))
            assert w1_vs_law(x, law) == pytest.approx(wr_vs_law(x, law, 1.0), rel=1e-9, abs=1e-12)

    def test_cdf_route_matches_brute_force(self):
        rng = np.random.default_rng(5)
        x = rng.random(20) * 1.4 - 0.2
        assert w1_vs_law(x, Uniform()) == pytest.approx(brute_w1_cdf(x, Uniform()), abs=5e-5)

    def test_quantile_route_order_two_brute_force(self):
        x = np.array([0.1, 0.2, 0.9])
        u = (np.arange(300_000) + 0.5) / 300_000
        Fn_inv = x[np.minimum((u * 3).astype(int), 2)]
        assert wr_vs_law(x, Uniform(), 2) == pytest.approx(np.mean((Fn_inv - u) ** 2), rel=1e-6)

    def test_empirical_round_trip(self):
        x = np.random.default_rng(2).normal(size=30)
        assert w1_vs_law(x, empirical_cdf(x)) == pytest.approx(0.0, abs=1e-12)

    def test_undefined_moment(self):
        with pytest.raises(ValueError, match="W1 undefined"):
            w1_vs_law([1.0], Pareto(0.8))

    def test_heavy_tail_unbounded(self):
        law = Pareto(1.5)
        x = law.ppf(np.random.default_rng(0).random(200))
        v = w1_vs_law(x, law)
        assert np.isfinite(v) and v > 0


class TestMajorantAndDual:
    def test_majorant_examples(self):
        assert ebralidze_majorant([0.5], Uniform(), 2) == pytest.approx(0.5, abs=1e-14)
        assert ebralidze_majorant([0.3], PointMass(0.3), 2) == 0.0

    def test_majorant_r1_is_w1(self):
        x = np.random.default_rng(4).random(17)
        assert ebralidze_majorant(x, Uniform(), 1) == w1_vs_law(x, Uniform())

    @pytest.mark.parametrize("r", [1.5, 2.0, 3.0])
    def test_majorant_dominates(self, r):
        rng = np.random.default_rng(int(r * 10))
        for _ in range(30):
            x = rng.random(int(rng.integers(1, 12)))
            assert ebralidze_majorant(x, Uniform(), r) >= wr_vs_law(x, Uniform(), r) * (1 - 1e-12)

    def test_majorant_brute_force(self):
        x = np.array([0.2, 0.7])
        assert ebralidze_majorant(x, Uniform(), 2) == pytest.approx(4 * brute_w1_cdf(x, Uniform(), r=2), abs=5e-5)

    def test_dual_examples(self):
        grid = np.linspace(0, 1, 1024)
        assert dual_lower_bound([0.5], Uniform(), grid) == pytest.approx(0.25, abs=1e-3)
        assert dual_lower_bound([0.3, 0.3], PointMass(0.3), [0, 1]) == 0.0
        with pytest.raises(ValueError):
            dual_lower_bound([0.5], Uniform(), [0.5])

    def test_dual_refinement_monotone_and_bounded(self):
        x = np.random.default_rng(8).random(9)
        w = w1_vs_law(x, Uniform())
        prev = 0.0
        for k in range(1, 12):
            d = dual_lower_bound(x, Uniform(), np.linspace(0, 1, 2 ** k + 1))
            assert prev - 1e-15 <= d <= w + 1e-15
            prev = d
        exact = dual_lower_bound(x, Uniform(), np.concatenate(([0, 1], x, np.linspace(0, 1, 4097))))
        assert exact == pytest.approx(w, abs=1e-3)


class TestLpOracle:
    def test_examples(self):
        assert lp_oracle({0.0: 1.0}, {1.0: 1.0}) == 1.0
        assert lp_oracle({0.2: 0.5, 0.4: 0.5}, {0.2: 0.5, 0.4: 0.5}) == 0.0

    def test_unequal_weights_use_lp(self):
        a = ([0.0, 1.0, 3.0], [0.2, 0.3, 0.5])
        b = ([0.5, 2.0], [0.6, 0.4])
        # monotone coupling: 0.2 from 0 to 0.5, 0.3 from 1 to 0.5, 0.1 from 3 to 0.5, 0.4 from 3 to 2
        assert lp_oracle(a, b) == pytest.approx(0.2 * 0.5 + 0.3 * 0.5 + 0.1 * 2.5 + 0.4 * 1.0)

    def test_errors(self):
        with pytest.raises(ValueError, match="desk-scale"):
            lp_oracle({float(i): 1 / 7 for i in range(7)}, {float(i) + 0.5: 1 / 7 for i in range(7)})
        with pytest.raises(ValueError):
            lp_oracle({0.0: 1.0}, {1.0: 0.5})


def test_translation_equivariance():
    rng = np.random.default_rng(9)
    a, b = rng.normal(size=5), rng.normal(size=5)
    assert w1_empirical_pair(a + 3, b + 3) == pytest.approx(w1_empirical_pair(a, b))
    assert abs(w1_empirical_pair(a + 0.7, b) - w1_empirical_pair(a, b)) <= 0.7 + 1e-12
    x = rng.random(6)
    assert w1_vs_law(x + 2, Uniform(2, 3)) == pytest.approx(w1_vs_law(x, Uniform()), abs=1e-12)
