import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from w1lab.distributions import (CallableLaw, Exponential, Observable, Pareto, PointMass, TabulatedLaw, Uniform,
                                 empirical_cdf, observable_eval, quantile_from_tail)
from w1lab.transport import w1_vs_law


class TestQuantileFromTail:
    def test_linear_tail(self):
        assert quantile_from_tail(lambda t: max(0.0, 1.0 - t), 0.3) == pytest.approx(0.7, abs=1e-12)

    def test_zero_tail(self):
        for u in (1e-9, 0.4, 1.0):
            assert quantile_from_tail(lambda t: 0.0, u) == 0.0

    def test_exponential_tail(self):
        assert quantile_from_tail(lambda t: math.exp(-t), 0.5) == pytest.approx(math.log(2), abs=1e-11)

    def test_table_is_exact(self):
        assert quantile_from_tail(([0.0, 1.0], [1.0, 0.0]), 0.3) == pytest.approx(0.7, abs=1e-15)
        assert quantile_from_tail(([0.0, 2.0, 4.0], [1.0, 0.5, 0.0]), 0.25) == 3.0

    def test_infinite_and_errors(self):
        assert quantile_from_tail(([0.0, 1.0], [1.0, 0.5]), 0.2) == math.inf
        with pytest.raises(ValueError):
            quantile_from_tail(lambda t: 0.0, 0.0)
        with pytest.raises(ValueError):
            quantile_from_tail(lambda t: 0.0, 1.5)
        with pytest.raises(ValueError):
            quantile_from_tail(([0.0, 1.0], [0.2, 0.7]), 0.5)


class TestEmpiricalCdf:
    def test_single_point(self):
        F = empirical_cdf([1.0])
        assert F.cdf(0.999) == 0.0 and F.cdf(1.0) == 1.0 and F.cdf(5.0) == 1.0

    def test_midpoint_step(self):
        assert empirical_cdf([0.0, 1.0]).cdf(0.5) == 0.5

    def test_generalized_inverse(self):
        assert empirical_cdf([0.2, 0.5, 0.9]).ppf(0.4) == 0.5
        assert empirical_cdf([0.2, 0.5, 0.9]).ppf(1 / 3) == 0.2

    def test_tail_quantile_on_steps(self):
        F = empirical_cdf([0.2, 0.5, 0.9])
        # H(t) = P(X > t); Q(0.4) = inf{t : H(t) <= 0.4} = 0.5
        assert F.quantile(0.4) == pytest.approx(0.5)
        assert F.tail(0.5) == pytest.approx(1 / 3)

    def test_empty(self):
        with pytest.raises(ValueError):
            empirical_cdf([])

    def test_round_trip(self):
        x = np.random.default_rng(1).exponential(size=64)
        assert w1_vs_law(x, empirical_cdf(x)) == pytest.approx(0.0, abs=1e-12)


class TestLaws:
    def test_uniform(self):
        U = Uniform()
        assert U.cdf(0.3) == pytest.approx(0.3)
        assert U.quantile(0.25) == pytest.approx(0.75)
        assert U.moment(2) == pytest.approx(1 / 3)
        with pytest.raises(ValueError):
            Uniform(1, 1)

    def test_point_mass(self):
        P = PointMass(0.3)
        assert P.cdf(0.2999) == 0.0 and P.cdf(0.3) == 1.0
        assert P.ppf(0.7) == pytest.approx(0.3)
        assert P.quantile(0.5) == pytest.approx(0.3)

    def test_pareto(self):
        P = Pareto(3.0)
        assert P.tail(2.0) == pytest.approx(2.0 ** -3)
        assert P.tail(0.5) == pytest.approx(1.0)
        assert P.quantile(0.125) == pytest.approx(2.0)
        assert P.moment(1) == pytest.approx(1.5, rel=1e-7)
        assert P.has_moment(2.9) and not P.has_moment(3.0)
        q = np.random.default_rng(0).random(5)
        assert np.allclose(P.ppf(q), stats.pareto(3.0).ppf(q))

    def test_exponential(self):
        E = Exponential(2.0)
        assert E.quantile(0.5) == pytest.approx(math.log(2) / 2)
        assert E.moment(2) == pytest.approx(0.5)
        assert E.moment(1) == pytest.approx(0.5)

    def test_symmetric_tail(self):
        law = Uniform(-1, 1)
        assert law.tail(0.5) == pytest.approx(0.5)
        assert law.quantile(0.5) == pytest.approx(0.5, abs=1e-9)

    def test_callable_law_matches_builtin(self):
        C = CallableLaw(stats.expon.cdf, stats.expon.ppf, lower=0.0)
        x = np.array([0.1, 0.9, 2.5])
        assert w1_vs_law(x, C) == pytest.approx(w1_vs_law(x, Exponential()), rel=1e-6)

    def test_tabulated_validation(self):
        with pytest.raises(ValueError):
            TabulatedLaw([0.0, 1.0], [0.2, 1.0])
        with pytest.raises(ValueError):
            TabulatedLaw([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            TabulatedLaw([0.0, 1.0], [0.0, 0.5])

    def test_csv_round_trip(self, tmp_path):
        law = TabulatedLaw([0.0, 0.5, 0.5, 2.0], [0.0, 0.25, 0.5, 0.9], tail_index=2.5)
        path = tmp_path / "law.csv"
        law.to_csv(path)
        back = TabulatedLaw.from_csv(path)
        assert np.array_equal(back.x, law.x) and np.array_equal(back.F, law.F)
        assert back.tail_index == 2.5
        t = np.array([0.1, 0.5, 1.0, 3.0, 10.0])
        assert np.array_equal(back.cdf(t), law.cdf(t))

    def test_csv_malformed(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,F(t)\n0,0\nnope\n")
        with pytest.raises(ValueError, match="line 3"):
            TabulatedLaw.from_csv(path)


LAWS = [Uniform(), Uniform(-1, 2), PointMass(0.4), Pareto(1.5), Pareto(3.0, 0.5), Exponential(0.7),
        TabulatedLaw([0.0, 0.2, 0.2, 1.0, 3.0], [0.0, 0.3, 0.6, 0.6, 0.95], tail_index=2.0),
        empirical_cdf([0.1, 0.1, 0.4, 2.0])]


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_galois_property(law):
    rng = np.random.default_rng(7)
    u = rng.random(1000) * (1 - 1e-9) + 1e-9
    lo = max(law.lower, 0.0) if math.isfinite(law.lower) else 0.0
    t = rng.random(1000) * 4.0 + lo * rng.random(1000)
    Q = np.asarray(law.quantile(u))
    H = np.asarray(law.tail(t))
    tol = 1e-9
    # Q(u) <= t  <=>  H(t) <= u, away from ties within rounding
    clear = (np.abs(Q - t) > tol) & (np.abs(H - u) > tol)
    assert np.array_equal((Q <= t)[clear], (H <= u)[clear])
    assert np.all(np.asarray(law.tail(Q)) <= u + 1e-9)


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_monotone_tail_and_quantile(law):
    t = np.linspace(0, 5, 400)
    u = np.linspace(1e-6, 1, 400)
    assert np.all(np.diff(law.tail(t)) <= 1e-15)
    assert np.all(np.diff(law.quantile(u)) <= 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=20),
       st.floats(1e-6, 1.0))
def test_empirical_galois(xs, u):
    F = empirical_cdf(xs)
    q = float(F.quantile(u))
    assert float(F.tail(q)) <= u + 1e-12
    if q > 0:
        assert float(F.tail(q * (1 - 1e-9) - 1e-12)) > u - 1e-12


class TestObservable:
    def test_examples(self):
        assert observable_eval(Observable("identity"), 0.3) == 0.3
        assert observable_eval(Observable("singular_zero", 0.5, 1.0), 0.25) == pytest.approx(2.0)
        assert observable_eval(Observable("singular_one", 0.25, 1.0), 0.9375) == pytest.approx(2.0)

    def test_domain(self):
        for x in (0.0, 1.0, -0.1, 1.2):
            with pytest.raises(ValueError):
                observable_eval(Observable("identity"), x)

    def test_validation(self):
        with pytest.raises(ValueError):
            Observable("bogus")
        with pytest.raises(ValueError):
            Observable("singular_zero", -1.0)
        with pytest.raises(ValueError):
            Observable("singular_zero", 0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            Observable("custom", func=np.sin)

    def test_log_factor_near_endpoint(self):
        g = Observable("singular_zero", 0.25, 1.0, 1.0)
        x = 1e-200
        pure = x ** -0.25 / abs(math.log(x))
        assert observable_eval(g, x) == pytest.approx(pure, rel=0.01)

    @pytest.mark.parametrize("g", [Observable("singular_zero", 0.3, 2.0), Observable("singular_one", 0.4),
                                   Observable("singular_zero", 0.2, 1.0, 0.5), Observable("identity"),
                                   Observable("singular_one", 0.1, 1.0, 2.0)])
    def test_monotone_and_finite(self, g):
        x = np.linspace(1e-9, 1 - 1e-9, 5001)
        y = g(x)
        assert np.all(np.isfinite(y))
        d = np.diff(y)
        assert np.all(d >= 0) if g.is_increasing else np.all(d <= 0)

    def test_constant(self):
        g = Observable("singular_zero", 0.0, 3.0)
        assert g.is_constant and observable_eval(g, 0.1) == 3.0
