import numpy as np
import pytest
from scipy import sparse

from w1lab.distributions import Observable, PointMass
from w1lab.dynamics import GpmMap, LsvMap
from w1lab.transfer_operator import (UlamOperator, alpha1, alpha2, build_ulam, export_density, load_operator,
                                     mesh_edges, pushforward_law, save_operator)

IDENTITY = Observable("identity")
LAGS = [4, 8, 16, 32, 64, 128, 256]


@pytest.fixture(scope="module")
def lsv_half():
    return build_ulam(LsvMap(0.5), 4096, "graded")


@pytest.fixture(scope="module")
def doubling():
    return build_ulam(GpmMap.doubling(), 512)


def iid_operator(m=64):
    return UlamOperator.from_matrix(np.full((m, m), 1.0 / m))


class TestBuild:
    def test_doubling_hand_computed(self, doubling):
        L = doubling.L.toarray()
        m = doubling.m
        for i in range(m):
            j = (2 * i) % m
            row = np.zeros(m)
            row[[j, j + 1]] = 0.5
            assert np.array_equal(L[i], row)
        assert np.allclose(doubling.h, 1.0, atol=1e-12)

    @pytest.mark.parametrize("tmap,mesh", [(LsvMap(0.3), "uniform"), (LsvMap(0.75), "graded"),
                                           (GpmMap.doubling(), "uniform")])
    def test_invariants(self, tmap, mesh):
        op = build_ulam(tmap, 1024, mesh)
        assert np.abs(np.asarray(op.L.sum(axis=1)).ravel() - 1).max() <= 1e-12
        assert np.all(op.h >= 0) and np.sum(op.h * op.widths) == pytest.approx(1.0, abs=1e-12)
        assert np.abs(np.asarray(op.K.sum(axis=1)).ravel() - 1).max() <= 1e-10
        assert np.abs(op.K.T @ op.q - op.q).max() <= 1e-8

    def test_chain_kernel_is_time_reversal(self, lsv_half):
        q = lsv_half.q
        lhs = sparse.diags(q) @ lsv_half.K
        rhs = (sparse.diags(q) @ lsv_half.L).T
        assert abs(lhs - rhs).max() < 1e-15

    def test_too_few_bins(self):
        with pytest.raises(ValueError):
            build_ulam(LsvMap(0.5), 8)

    def test_mesh_edges(self):
        e = mesh_edges(64, "graded", 0.5)
        assert e[0] == 0 and e[-1] == 1 and np.all(np.diff(e) > 0)
        assert e[1] < 1 / 64
        assert np.array_equal(mesh_edges(4), [0, 0.25, 0.5, 0.75, 1])
        with pytest.raises(ValueError):
            mesh_edges(16, "bogus")

    @pytest.mark.parametrize("gamma", [0.25, 0.5])
    def test_density_shape(self, gamma):
        op = build_ulam(LsvMap(gamma), 4096, "uniform")
        r = (op.h * op.midpoints ** gamma)[:-1]
        assert r.max() / r.min() < 10


class TestAlpha:
    def test_iid_zero(self):
        op = iid_operator()
        assert np.all(alpha1(op, IDENTITY, [1, 2, 10]).values == 0)
        assert np.all(np.abs(alpha2(op, IDENTITY, [1, 2, 10]).values) < 1e-15)

    def test_doubling_mixes(self, doubling):
        a = alpha1(doubling, IDENTITY, [1, 64, 1024])
        assert a[1] == pytest.approx(0.25)
        assert a[64] < 1e-6 and a[1024] < 1e-6

    def test_lsv_decay_slope(self, lsv_half):
        a = alpha1(lsv_half, IDENTITY, LAGS)
        slope = np.polyfit(np.log(LAGS), np.log(a.values), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.2)

    def test_alpha2_dominates_and_decays(self, lsv_half):
        lags = [4, 16, 64, 256]
        a1 = alpha1(lsv_half, IDENTITY, lags)
        a2 = alpha2(lsv_half, IDENTITY, lags)
        assert np.all(a2.values >= a1.values)
        slope = np.polyfit(np.log(lags), np.log(a2.values), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.3)

    def test_isotonic_change_small(self, lsv_half):
        a = alpha1(lsv_half, IDENTITY, LAGS + [5, 6, 7])
        s = alpha1(lsv_half, IDENTITY, LAGS + [5, 6, 7], smooth=True)
        assert np.all(np.abs(s.values - a.raw) <= 0.05 * a.raw)
        order = np.argsort(s.lags)
        assert np.all(np.diff(s.values[order]) <= 0)

    def test_mesh_refinement_stable(self, lsv_half):
        coarse = build_ulam(LsvMap(0.5), 2048, "graded")
        lags = [1, 2, 4, 8, 16, 32, 64]
        a, b = alpha1(coarse, IDENTITY, lags).values, alpha1(lsv_half, IDENTITY, lags).values
        assert np.all(np.abs(a - b) < 0.1 * b)

    def test_monotone_observable_invariance(self, lsv_half):
        a = alpha1(lsv_half, IDENTITY, [8]).values
        b = alpha1(lsv_half, Observable("singular_zero", 0.3), [8]).values
        assert np.array_equal(a, b)

    def test_constant_observable(self, lsv_half):
        assert np.all(alpha1(lsv_half, Observable("singular_zero", 0.0), [1, 5]).values == 0)

    def test_bad_inputs(self, lsv_half):
        with pytest.raises(ValueError):
            alpha1(lsv_half, IDENTITY, [0])
        wiggle = Observable("custom", func=lambda x: np.sin(20 * x), increasing=True)
        with pytest.raises(ValueError, match="non-monotone"):
            alpha1(lsv_half, wiggle, [1])


class TestPushforward:
    def test_doubling_identity_is_uniform(self, doubling):
        law = pushforward_law(doubling, IDENTITY)
        x = np.linspace(0, 1, 1001)
        assert np.abs(law.cdf(x) - x).max() <= 1 / doubling.m

    def test_constant(self, lsv_half):
        law = pushforward_law(lsv_half, Observable("singular_zero", 0.0, 2.5))
        assert isinstance(law, PointMass) and law.c == 2.5

    def test_singular_tail_shape(self):
        op = build_ulam(LsvMap(0.25), 4096, "graded")
        law = pushforward_law(op, Observable("singular_zero", 0.25))
        assert law.tail_index == pytest.approx(3.0)
        t = np.geomspace(3, 30, 10)
        slope = np.polyfit(np.log(t), np.log(law.tail(t)), 1)[0]
        assert slope == pytest.approx(-3.0, abs=0.3)

    def test_decreasing_observable(self, lsv_half):
        law = pushforward_law(lsv_half, Observable("singular_one", 0.2))
        assert law.lower == pytest.approx(1.0) and law.tail_index == pytest.approx(5.0)
        assert np.all(np.diff(law.cdf(np.linspace(1, 10, 100))) >= 0)


def test_operator_round_trip(tmp_path, lsv_half):
    path = tmp_path / "op.bin"
    save_operator(lsv_half, path)
    back = load_operator(path)
    assert back.m == lsv_half.m and back.gamma == 0.5 and back.mesh == "graded"
    assert np.array_equal(back.edges, lsv_half.edges)
    assert abs(back.L - lsv_half.L).max() == 0
    assert np.allclose(back.q, lsv_half.q, rtol=1e-14, atol=0)
    (tmp_path / "junk.bin").write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        load_operator(tmp_path / "junk.bin")


def test_density_export(tmp_path, doubling):
    path = tmp_path / "h.csv"
    export_density(doubling, path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (doubling.m, 3)
    assert np.array_equal(rows[:, 2], doubling.h)
