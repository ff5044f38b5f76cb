import math

import numpy as np
import pytest

from w1lab.distributions import Observable, PointMass, Uniform
from w1lab.dynamics import (GpmMap, LsvMap, ProcessSpec, SimulationLog, bates_law, export_trajectory, gpm_step,
                            load_trajectory, lsv_step, simulate_series)
from w1lab.transport import w1_empirical_pair, w1_vs_law


class TestLsvStep:
    def test_examples(self):
        assert lsv_step(0.0, 0.5) == 0.0
        assert lsv_step(0.5, 0.5) == 0.0
        assert lsv_step(0.25, 0.5) == pytest.approx(0.25 * (1 + math.sqrt(2) * 0.5), abs=1e-15)
        assert lsv_step(0.25, 0.5) == pytest.approx(0.426777, abs=1e-6)
        assert lsv_step(1.0, 0.3) == 1.0

    def test_domain(self):
        for x in (-1e-9, 1.0 + 1e-9, math.nan):
            with pytest.raises(ValueError):
                lsv_step(x, 0.5)
        with pytest.raises(ValueError):
            LsvMap(1.0)

    @pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9])
    def test_maps_unit_interval_and_first_branch_increasing(self, gamma):
        x = np.linspace(0, 1, 20001)
        y = lsv_step(x, gamma)
        assert np.all((y >= 0) & (y <= 1))
        left = x < 0.5
        assert np.all(np.diff(y[left]) > 0)
        # the left branch reaches 1 at 1/2
        assert lsv_step(0.5 - 1e-12, gamma) == pytest.approx(1.0, abs=1e-10)


class TestGpm:
    def test_lsv_encoding_agrees(self):
        x = np.random.default_rng(0).random(1000)
        assert np.array_equal(gpm_step(GpmMap.lsv(0.4), x), lsv_step(x, 0.4))
        assert np.array_equal(LsvMap(0.4)(x), lsv_step(x, 0.4))

    def test_tie_goes_right(self):
        m = GpmMap((0.0, 0.5, 1.0), (lambda x: 0.9 * np.ones_like(x), lambda x: 0.1 * np.ones_like(x)))
        assert gpm_step(m, 0.5) == 0.1

    def test_doubling(self):
        assert gpm_step(GpmMap.doubling(), 0.3) == pytest.approx(0.6)
        assert gpm_step(GpmMap.doubling(), 0.8) == pytest.approx(0.6)

    def test_validation(self):
        with pytest.raises(ValueError):
            GpmMap((0.0, 0.7, 0.5, 1.0), (abs, abs, abs))
        with pytest.raises(ValueError):
            GpmMap((0.0, 1.0), (abs, abs))
        with pytest.raises(ValueError):
            gpm_step(GpmMap.doubling(), 1.5)


class TestSimulate:
    def test_point_mass_iid(self):
        s = simulate_series(ProcessSpec("iid", law=PointMass(0.7)), 50)
        assert np.all(s == 0.7)

    def test_forced_fixed_point(self):
        s = simulate_series(ProcessSpec("lsv", gamma=0.5, x0=0.0, burn_in=0), 100)
        assert np.all(s == 0.0)

    def test_determinism(self):
        for spec in (ProcessSpec("lsv", gamma=0.3, seed=5), ProcessSpec("iid", law=Uniform(), seed=5),
                     ProcessSpec("mdep", m=3, seed=5), ProcessSpec("gpm", gpm_map=GpmMap.lsv(0.7), seed=5)):
            assert np.array_equal(simulate_series(spec, 500), simulate_series(spec, 500))
        a = simulate_series(ProcessSpec("lsv", gamma=0.3, seed=5), 500)
        b = simulate_series(ProcessSpec("lsv", gamma=0.3, seed=6), 500)
        assert not np.array_equal(a, b)

    def test_lsv_orbit_matches_step(self):
        spec = ProcessSpec("lsv", gamma=0.6, x0=0.3, burn_in=7)
        s = simulate_series(spec, 30)
        x = 0.3
        for _ in range(7):
            x = lsv_step(x, 0.6)
        expected = []
        for _ in range(30):
            x = lsv_step(x, 0.6)
            expected.append(x)
        assert np.allclose(s, expected, rtol=1e-12, atol=0)

    def test_singular_observable_range(self):
        g = Observable("singular_zero", 0.3)
        s = simulate_series(ProcessSpec("lsv", gamma=0.5, observable=g, seed=1), 1000)
        assert s.size == 1000 and np.all(np.isfinite(s)) and np.all(s >= 1.0)

    def test_doubling_restarts_on_collapse(self):
        # binary doubling collapses every double onto 0 after about 53 steps
        log = SimulationLog()
        with pytest.raises(RuntimeError, match="fixed point"):
            simulate_series(ProcessSpec("gpm", gpm_map=GpmMap.doubling(), burn_in=100), 10, log=log)
        assert log.restarts > 0

    def test_mdep_structure(self):
        spec = ProcessSpec("mdep", m=2, seed=3)
        s = simulate_series(spec, 20000)
        assert abs(s.mean() - 0.5) < 0.01
        c = np.corrcoef(s[:-3], s[3:])[0, 1]
        c1 = np.corrcoef(s[:-1], s[1:])[0, 1]
        assert abs(c) < 0.03 and c1 == pytest.approx(2 / 3, abs=0.03)

    def test_invalid(self):
        with pytest.raises(ValueError):
            simulate_series(ProcessSpec("iid", law=Uniform()), 0)
        with pytest.raises(ValueError):
            ProcessSpec("lsv", gamma=1.2)
        with pytest.raises(ValueError):
            ProcessSpec("iid")
        with pytest.raises(ValueError):
            ProcessSpec("lsv", gamma=0.5, burn_in=-1)
        with pytest.raises(ValueError):
            ProcessSpec("weird")


def test_bates_law():
    assert w1_vs_law([0.5], bates_law(1)) == pytest.approx(0.25)
    law = bates_law(2)
    assert law.cdf(0.5) == pytest.approx(0.5, abs=1e-6)
    assert law.cdf(0.25) == pytest.approx(0.125, abs=1e-6)
    s = simulate_series(ProcessSpec("mdep", m=3, seed=9), 200_000)
    assert w1_vs_law(s, bates_law(4)) < 0.005


def test_trajectory_round_trip(tmp_path):
    spec = ProcessSpec("lsv", gamma=0.25, seed=2)
    s = simulate_series(spec, 100)
    path = tmp_path / "traj.csv"
    export_trajectory(path, s, spec)
    h, back = load_trajectory(path)
    assert h == spec.spec_hash() and np.array_equal(back, s)


@pytest.mark.parametrize("gamma", [0.2, 0.4])
def test_ergodic_average_stable_across_seeds(gamma):
    a = simulate_series(ProcessSpec("lsv", gamma=gamma, seed=1), 1_000_000)
    b = simulate_series(ProcessSpec("lsv", gamma=gamma, seed=2), 1_000_000)
    assert abs(np.mean(a > 0.5) - np.mean(b > 0.5)) < 0.02


@pytest.mark.parametrize("gamma", [0.25, 0.5])
def test_burn_in_insensitivity(gamma):
    short = simulate_series(ProcessSpec("lsv", gamma=gamma, burn_in=1000, seed=4), 100_000)
    long = simulate_series(ProcessSpec("lsv", gamma=gamma, burn_in=100_000, seed=4), 100_000)
    assert w1_empirical_pair(short, long) < 0.01
