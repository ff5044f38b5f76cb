"""Bound functionals, rate predictions and quantile conditions.

Dependence enters through an :class:`AlphaSequence` alpha(k), k >= 0, and the
marginal law through its tail ``H(t) = P(|X| > t)`` and tail quantile ``Q``.
The central objects are

    S_n(t)     = sum_{k=0}^n min(alpha(k), H(t))
    alpha^-1(u) = #{k >= 0 : alpha(k) >= u}
    R_n(u)     = (min{q >= 1 : alpha(q) <= u} ^ n) Q(u)

Improper integrals are checked for divergence before they are evaluated;
a divergent bound raises :class:`DivergentIntegral`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import special

from . import _quad
from ._quad import DivergentIntegral
from .distributions import ReferenceLaw, TabulatedLaw, quantile_from_tail

__all__ = [
    "AlphaSequence", "DivergentIntegral", "NoPrediction", "RatePrediction", "alpha_inverse",
    "s_alpha_n", "bound_mean_w1", "bound_l2_w1", "u_n_cesaro", "rate_poly", "rate_geo",
    "rate_nonsummable", "R_n", "R_n_inverse", "bound_vbe", "tail_bound_vbe", "bound_rosenthal",
    "predicted_rate", "clt_condition_check", "quantile_conditions", "power_family_conditions",
    "equiv_identity_check", "sufficient_conditions", "BoundReport", "rosenthal_terms", "TailBound",
    "CltVerdict", "QuantileReport",
]

DEFAULT_ALPHA0 = 0.25
EXPLICIT_TERMS = 1 << 16
_BIG = 2.0 ** 62
EFFECTIVE_INFINITE_ORDER = 64.0
# below this ln h the sums S(h) switch to the model asymptotics
_LOG_TINY = math.log(1e-280)


# ---------------------------------------------------------------------------
# model tails: continuous decreasing phi(x) on x >= K0


class _ZeroTail:
    summable = True

    def phi(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def inv(self, u):
        return np.full(np.shape(u), -np.inf)

    def sum_from(self, m):
        """sum_{k >= m} phi(k)."""
        return np.zeros_like(np.asarray(m, dtype=float))

    def log_count(self, logh, positive):
        """ln #{k : alpha(k) >= h} as h -> 0; ``positive`` counts the nonzero head terms."""
        with np.errstate(divide="ignore"):
            return np.full(np.shape(logh), math.log(positive) if positive else -np.inf)

    def log_S_small(self, logh, positive):
        return logh + self.log_count(logh, positive)


class _PowerTail:
    def __init__(self, C, a):
        self.C, self.a = float(C), float(a)
        self.summable = self.a > 1

    def phi(self, x):
        with np.errstate(divide="ignore", over="ignore"):
            return self.C * np.asarray(x, dtype=float) ** (-self.a)

    def dphi(self, x):
        return -self.a * self.C * np.asarray(x, dtype=float) ** (-self.a - 1)

    def antideriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.a == 1:
            return self.C * np.log(x)
        return self.C * x ** (1 - self.a) / (1 - self.a)

    def inv(self, u):
        with np.errstate(divide="ignore", over="ignore"):
            return np.exp((math.log(self.C) - np.log(np.asarray(u, dtype=float))) / self.a)

    def sum_from(self, m):
        m = np.asarray(m, dtype=float)
        if not self.summable:
            return np.full(m.shape, np.inf)
        return self.C * special.zeta(self.a, m)

    def log_count(self, logh, positive):
        return (math.log(self.C) - np.asarray(logh, dtype=float)) / self.a

    def log_S_small(self, logh, positive):
        # h N + C N^(1-a)/(a-1) with N = (C/h)^(1/a)
        if not self.summable:
            return np.full(np.shape(logh), np.inf)
        a = self.a
        return math.log(self.C) / a + (1 - 1 / a) * np.asarray(logh, dtype=float) + math.log(a / (a - 1))


class _GeometricTail:
    summable = True

    def __init__(self, C, r):
        self.C, self.r = float(C), float(r)

    def phi(self, x):
        return self.C * self.r ** np.asarray(x, dtype=float)

    def inv(self, u):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(np.asarray(u, dtype=float) / self.C) / math.log(self.r)

    def sum_from(self, m):
        return self.C * self.r ** np.asarray(m, dtype=float) / (1.0 - self.r)

    def _count(self, logh):
        return np.maximum((np.asarray(logh, dtype=float) - math.log(self.C)) / math.log(self.r), 1.0)

    def log_count(self, logh, positive):
        return np.log(self._count(logh))

    def log_S_small(self, logh, positive):
        return np.asarray(logh, dtype=float) + np.log(self._count(logh) + 1.0 / (1.0 - self.r))


class _LogPolyTail:
    """C / (x ln^a x), x >= 2."""

    def __init__(self, C, a):
        self.C, self.a = float(C), float(a)
        self.summable = self.a > 1

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return self.C / (x * np.log(x) ** self.a)

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        lx = np.log(x)
        with np.errstate(over="ignore"):
            # x^2 overflows to inf for huge x, sending the derivative to -0
            return -self.C * (lx + self.a) / (x * x * lx ** (self.a + 1))

    def antideriv(self, x):
        lx = np.log(np.asarray(x, dtype=float))
        if self.a == 1:
            return self.C * np.log(lx)
        return self.C * lx ** (1 - self.a) / (1 - self.a)

    def inv(self, u):
        with np.errstate(over="ignore"):
            return np.exp(self._log_inv(np.log(self.C / np.asarray(u, dtype=float))))

    def _log_inv(self, target):
        """y = ln x solving x ln^a x = e^target, i.e. y + a ln y = target."""
        target = np.asarray(target, dtype=float)
        lo = np.full(target.shape, math.log(2.0))
        hi = np.maximum(target, lo) + 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f = mid + self.a * np.log(mid)
            lo = np.where(f < target, mid, lo)
            hi = np.where(f < target, hi, mid)
        return 0.5 * (lo + hi)

    def log_count(self, logh, positive):
        return self._log_inv(math.log(self.C) - np.asarray(logh, dtype=float))

    def log_S_small(self, logh, positive):
        # h N + C y^(1-a)/(a-1) with y = ln N and h N = C y^-a
        if not self.summable:
            return np.full(np.shape(logh), np.inf)
        y = self.log_count(logh, positive)
        return math.log(self.C) + np.log(y ** -self.a + y ** (1 - self.a) / (self.a - 1))

    def sum_from(self, m):
        m = np.asarray(m, dtype=float)
        if not self.summable:
            return np.full(m.shape, np.inf)
        # Euler-Maclaurin beyond m (m >= 2, phi smooth and decreasing)
        return -self.antideriv(m) + 0.5 * self.phi(m) - self.dphi(m) / 12.0


def _em_partial(tail, m, M):
    """sum_{k=m}^{M} phi(k) via Euler-Maclaurin, for m <= M elementwise."""
    return (tail.antideriv(M) - tail.antideriv(m) + 0.5 * (tail.phi(m) + tail.phi(M))
            + (tail.dphi(M) - tail.dphi(m)) / 12.0)


class AlphaSequence:
    """Nonincreasing dependence coefficients alpha(k) in [0, 1], k >= 0.

    Built from an explicit head ``alpha(0..K0-1)`` followed by a model tail.
    Use the constructors :meth:`polynomial` (C k^-a), :meth:`geometric`
    (C r^k), :meth:`logpoly` (C / (k ln^a k)), :meth:`table` and :meth:`iid`.
    For models, alpha(0) is the model value when finite and ``1/4``
    otherwise; every term is clipped to alpha(0).
    """

    def __init__(self, head, tail, kind: str, params: dict):
        head = np.asarray(head, dtype=float)
        if head.ndim != 1 or head.size == 0:
            raise ValueError("alpha head must be a nonempty 1-d array")
        if np.any(head < 0) or np.any(head > 1) or np.any(np.diff(head) > 1e-15):
            raise ValueError("alpha values must be nonincreasing and lie in [0, 1]")
        self._head = head
        self._K0 = head.size
        self._tail = tail
        self.kind = kind
        self.params = params
        self._cum = np.concatenate(([0.0], np.cumsum(head)))
        self._ext = None

    # -- constructors -------------------------------------------------------
    @staticmethod
    def _alpha0(model0, alpha0):
        if alpha0 is not None:
            if not 0 <= alpha0 <= 1:
                raise ValueError("alpha(0) must lie in [0, 1]")
            return float(alpha0)
        if model0 is not None and math.isfinite(model0):
            return float(min(1.0, model0))
        return DEFAULT_ALPHA0

    @classmethod
    def polynomial(cls, a: float, C: float = 1.0, alpha0: Optional[float] = None) -> "AlphaSequence":
        if a <= 0 or C <= 0:
            raise ValueError("polynomial model needs a > 0 and C > 0")
        a0 = cls._alpha0(None, alpha0)
        K0 = int(min(max(2.0, math.ceil((C / a0) ** (1.0 / a)) + 1) if a0 > 0 else 2, 1e7))
        k = np.arange(K0, dtype=float)
        with np.errstate(divide="ignore"):
            head = np.minimum(a0, C * k ** (-a))
        head[0] = a0
        return cls(np.minimum.accumulate(head), _PowerTail(C, a), "polynomial", {"a": a, "C": C, "alpha0": a0})

    @classmethod
    def geometric(cls, r: float, C: float = 1.0, alpha0: Optional[float] = None) -> "AlphaSequence":
        if not 0 < r < 1 or C <= 0:
            raise ValueError("geometric model needs 0 < r < 1 and C > 0")
        a0 = cls._alpha0(C, alpha0)
        K0 = int(max(1, math.ceil(math.log(a0 / C) / math.log(r)) + 1 if a0 > 0 else 1))
        head = np.minimum(a0, C * r ** np.arange(K0, dtype=float))
        return cls(np.minimum.accumulate(head), _GeometricTail(C, r), "geometric", {"r": r, "C": C, "alpha0": a0})

    @classmethod
    def logpoly(cls, a: float, C: float = 1.0, alpha0: Optional[float] = None) -> "AlphaSequence":
        if a <= 0 or C <= 0:
            raise ValueError("log-polynomial model needs a > 0 and C > 0")
        a0 = cls._alpha0(None, alpha0)
        tail = _LogPolyTail(C, a)
        K0 = 2
        while tail.phi(K0) > a0 or tail.dphi(K0) >= 0:
            K0 *= 2
        k = np.arange(K0, dtype=float)
        head = np.full(K0, a0)
        head[2:] = np.minimum(a0, tail.phi(k[2:]))
        return cls(np.minimum.accumulate(head), tail, "logpoly", {"a": a, "C": C, "alpha0": a0})

    @classmethod
    def table(cls, values, tail_exponent: Optional[float] = None) -> "AlphaSequence":
        """Explicit alpha(0..K); zero beyond, or C k^-a anchored at the last value."""
        values = np.asarray(values, dtype=float)
        if tail_exponent is None or values[-1] == 0:
            return cls(values, _ZeroTail(), "table", {"values": values.tolist()})
        K = values.size - 1
        if K < 1:
            raise ValueError("a polynomial tail needs at least two table entries")
        C = values[-1] * K ** tail_exponent
        return cls(values, _PowerTail(C, tail_exponent), "table",
                   {"values": values.tolist(), "tail_exponent": tail_exponent})

    @classmethod
    def iid(cls, alpha0: float = DEFAULT_ALPHA0) -> "AlphaSequence":
        return cls.table([alpha0])

    @classmethod
    def mdep(cls, m: int, alpha0: float = DEFAULT_ALPHA0) -> "AlphaSequence":
        return cls.table([alpha0] * (m + 1))

    @classmethod
    def from_estimate(cls, lags, values, alpha0: float = DEFAULT_ALPHA0,
                      tail_exponent: Optional[float] = None) -> "AlphaSequence":
        """Step sequence through estimates at increasing lags.

        alpha(k) takes the estimate at the largest lag <= k, an upper bound
        for a nonincreasing sequence; lags below the first use alpha0.
        """
        lags = np.asarray(lags, dtype=int)
        values = np.minimum.accumulate(np.clip(np.asarray(values, dtype=float), 0, alpha0))
        K = int(lags.max())
        k = np.arange(K + 1)
        idx = np.searchsorted(lags, k, side="right") - 1
        table = np.where(idx >= 0, values[np.clip(idx, 0, None)], alpha0)
        table[0] = alpha0
        return cls.table(np.minimum.accumulate(table), tail_exponent=tail_exponent)

    def __repr__(self):
        return f"AlphaSequence({self.kind}, {self.params})"

    # -- evaluation ----------------------------------------------------------
    @property
    def alpha0(self) -> float:
        return float(self._head[0])

    @property
    def summable(self) -> bool:
        return bool(self._tail.summable)

    @property
    def poly_order(self) -> float:
        """Largest a with alpha(k) = O(k^-a) (inf for faster than any power)."""
        if isinstance(self._tail, (_ZeroTail, _GeometricTail)):
            return math.inf
        if isinstance(self._tail, _PowerTail):
            return self._tail.a
        return 1.0

    def __call__(self, k):
        k = np.asarray(k)
        kf = k.astype(float)
        inside = kf < self._K0
        head = self._head[np.clip(np.where(inside, kf, 0), 0, self._K0 - 1).astype(np.int64)]
        with np.errstate(all="ignore"):
            tail = self._tail.phi(np.where(inside, self._K0, kf))
        out = np.where(inside, head, tail)
        return float(out) if out.ndim == 0 else out

    def continuous(self, x):
        """Monotone interpolant used for series-vs-integral comparisons."""
        x = np.asarray(x, dtype=float)
        return np.where(x < self._K0, self(np.clip(np.floor(x), 0, self._K0 - 1)), self._tail.phi(np.maximum(x, self._K0)))

    def _count(self, u, strict: bool):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        negh = -self._head
        hc = np.searchsorted(negh, -u, side="left" if strict else "right").astype(float)
        out = hc.copy()
        full = hc >= self._K0
        if np.any(full):
            uu = u[full]
            with np.errstate(all="ignore"):
                est = self._tail.inv(uu)
            cnt = np.where(np.isfinite(est), np.floor(est) - self._K0 + 1, np.where(est > 0, np.inf, 0.0))
            small = np.isfinite(cnt) & (cnt < 2.0 ** 52)
            if np.any(small):
                c = np.maximum(cnt[small], 0.0)
                us = uu[small]
                cmp = (lambda v: v > us) if strict else (lambda v: v >= us)
                for _ in range(4):
                    up = cmp(self._tail.phi(self._K0 + c))
                    c = np.where(up, c + 1, c)
                    down = (c > 0) & ~cmp(self._tail.phi(self._K0 + c - 1))
                    c = np.where(down, c - 1, c)
                cnt[small] = c
            cnt = np.maximum(cnt, 0.0)
            if isinstance(self._tail, _ZeroTail):
                cnt = np.where(uu <= 0 if not strict else uu < 0, np.inf, 0.0)
            elif not strict:
                cnt = np.where(uu <= 0, np.inf, cnt)
            else:
                cnt = np.where(uu < 0, np.inf, np.where(uu == 0, np.inf, cnt))
            out[full] = self._K0 + cnt
        out = np.where(u <= 0, np.inf, out) if not strict else np.where(u < 0, np.inf, out)
        return float(out[0]) if scalar else out

    def count_ge(self, u):
        """alpha^-1(u) = #{k >= 0 : alpha(k) >= u} (inf for u <= 0)."""
        return self._count(u, strict=False)

    def count_gt(self, u):
        """#{k >= 0 : alpha(k) > u}."""
        return self._count(u, strict=True)

    def _tail_partial(self, m, M):
        """sum_{k=m}^{M-1} phi(k) for K0 <= m <= M (elementwise, M may be inf)."""
        m = np.asarray(m, dtype=float)
        M = np.asarray(M, dtype=float)
        t = self._tail
        if isinstance(t, _ZeroTail):
            return np.zeros(np.broadcast(m, M).shape)
        if t.summable and not isinstance(t, _LogPolyTail):
            return t.sum_from(m) - np.where(np.isfinite(M), t.sum_from(np.where(np.isfinite(M), M, m)), 0.0)
        # explicit cumulative table, Euler-Maclaurin beyond it
        if self._ext is None:
            k = np.arange(self._K0, self._K0 + EXPLICIT_TERMS, dtype=float)
            self._ext = np.concatenate(([0.0], np.cumsum(t.phi(k))))
        end = self._K0 + EXPLICIT_TERMS

        def cum(x):  # sum_{k=K0}^{x-1}
            x = np.asarray(x, dtype=float)
            inside = x <= end
            res = np.empty(x.shape)
            res[inside] = self._ext[(x[inside] - self._K0).astype(np.int64)]
            far = ~inside
            if np.any(far):
                xf = x[far]
                fin = np.isfinite(xf)
                val = np.full(xf.shape, np.inf if not t.summable else 0.0)
                if t.summable:
                    val[:] = self._ext[-1] + t.sum_from(end)
                    val[fin] = self._ext[-1] + _em_partial(t, end, xf[fin] - 1)
                else:
                    val[fin] = self._ext[-1] + _em_partial(t, end, xf[fin] - 1)
                res[far] = val
            return res

        return cum(M) - cum(m)

    def prefix(self, k):
        """sum_{j < k} alpha(j), k >= 0 (k may be inf)."""
        k = np.asarray(k, dtype=float)
        kh = np.minimum(k, self._K0)
        out = self._cum[kh.astype(np.int64)]
        beyond = k > self._K0
        if np.any(beyond):
            out = out + np.where(beyond, self._tail_partial(np.full(k.shape, float(self._K0)),
                                                             np.where(beyond, k, self._K0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def tail_sum(self, k):
        """sum_{j >= k} alpha(j)."""
        k = np.asarray(k, dtype=float)
        if not self.summable:
            return np.where(np.isfinite(k), np.inf, 0.0) if k.ndim else (math.inf if math.isfinite(k) else 0.0)
        kh = np.minimum(k, self._K0)
        head = self._cum[-1] - self._cum[kh.astype(np.int64)]
        t = self._tail_partial(np.maximum(k, self._K0), np.full(k.shape, np.inf))
        out = np.where(np.isfinite(k), head + t, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def total(self) -> float:
        return float(self.tail_sum(0)) if self.summable else math.inf

    def S_truncated(self, h, n: int):
        """sum_{k=0}^n min(alpha(k), h), vectorized in h."""
        h = np.asarray(h, dtype=float)
        N = self.count_ge(np.where(h > 0, h, 1.0))
        N = np.where(h > 0, N, 0.0)
        Nc = np.minimum(N, n + 1)
        rest = np.where(N <= n, self.prefix(np.full(h.shape, float(n + 1))) - self.prefix(np.minimum(N, n + 1)), 0.0)
        out = np.where(h > 0, h * Nc + np.maximum(rest, 0.0), 0.0)
        return float(out) if out.ndim == 0 else out

    def S_infinite(self, h):
        """sum_{k >= 0} min(alpha(k), h) = int_0^h alpha^-1."""
        h = np.asarray(h, dtype=float)
        N = self.count_ge(np.where(h > 0, h, 1.0))
        val = h * N + self.tail_sum(N)
        out = np.where(h > 0, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def log_S(self, logh, n: Optional[int] = None):
        """ln S_n(h) (or ln S_inf(h) when n is None) from ln h.

        Tails such as e^-t underflow long before ln H does; below h = 1e-280
        the model asymptotics h N(h) + sum_{k >= N(h)} alpha(k) take over,
        and the truncated sum becomes h min(n + 1, N(h)).
        """
        logh = np.asarray(logh, dtype=float)
        out = np.full(logh.shape, -np.inf)
        big = logh >= _LOG_TINY
        if np.any(big):
            h = np.exp(np.minimum(logh[big], 0.0))
            v = self.S_infinite(h) if n is None else self.S_truncated(h, n)
            with np.errstate(divide="ignore"):
                out[big] = np.log(v)
        small = np.isfinite(logh) & ~big
        if np.any(small):
            ls = logh[small]
            positive = int(np.count_nonzero(self._head > 0))
            if n is None:
                out[small] = self._tail.log_S_small(ls, positive)
            else:
                out[small] = ls + np.minimum(math.log(n + 1), self._tail.log_count(ls, positive))
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def alpha_inverse(seq: AlphaSequence, u):
    return seq.count_ge(u)


# ---------------------------------------------------------------------------
# tail / quantile adapters


def _clamped(Q):
    # quadrature nodes can round a hair past 1
    return lambda u: Q(np.clip(np.asarray(u, dtype=float), 5e-324, 1.0))


def _tail_and_quantile(law):
    """(H, Q, breakpoints_t, breakpoints_u) for a law or a tail callable."""
    if isinstance(law, ReferenceLaw):
        bt, bu = (), ()
        if isinstance(law, TabulatedLaw):
            xs = np.abs(law.x)
            bt = np.unique(xs[xs > 0])
            bu = np.unique(np.clip(1.0 - law.F, 0, 1))
            bu = bu[(bu > 0) & (bu < 1)]
        return law.tail, _clamped(law.quantile), bt, bu
    if callable(law):
        H = law

        def Q(u):
            u = np.asarray(u, dtype=float)
            return np.vectorize(lambda v: quantile_from_tail(H, float(v)), otypes=[float])(u)

        return (lambda t: np.vectorize(lambda s: float(H(s)), otypes=[float])(np.asarray(t, dtype=float))), Q, (), ()
    raise TypeError("expected a ReferenceLaw or a tail callable")


def _log_tail(law):
    """ln H as a function of t; laws supply it directly so light tails stay resolved."""
    if isinstance(law, ReferenceLaw):
        return lambda t: np.asarray(law.log_tail(np.asarray(t, dtype=float)), dtype=float)
    return _quad.log_of(_tail_and_quantile(law)[0])


def _quantile_only(Q):
    if isinstance(Q, ReferenceLaw):
        bu = ()
        if isinstance(Q, TabulatedLaw):
            bu = np.unique(np.clip(1.0 - Q.F, 0, 1))
            bu = bu[(bu > 0) & (bu < 1)]
        return _clamped(Q.quantile), bu
    if callable(Q):
        return (lambda u: np.asarray(Q(np.asarray(u, dtype=float)), dtype=float) * np.ones(np.shape(u))), ()
    raise TypeError("expected a ReferenceLaw or a quantile callable")


def _is_zero_quantile(Qf) -> bool:
    u = np.concatenate((2.0 ** -np.arange(1, 200, 7), [0.3, 0.7, 0.99]))
    return bool(np.all(np.asarray(Qf(u)) == 0))


def _u_integral(f, lo: float, hi: float, breakpoints=(), rtol: float = 1e-10, name: str = "integral"):
    """int_lo^hi f(u) du on (0, 1]; lo may be 0 (improper end checked)."""
    if hi <= lo:
        return 0.0
    bp = np.asarray(breakpoints, dtype=float)
    bp = bp[(bp > max(lo, 1e-200 * hi)) & (bp < hi)]
    if lo > 0:
        grid = np.geomspace(lo, hi, max(2, int(math.log2(hi / lo)) + 2))
        return _quad.panels(f, np.concatenate((grid, bp)), rtol=rtol)
    if _quad.diverges(_quad.log_of(lambda u: f(u * hi)), "zero"):
        raise DivergentIntegral(f"{name} diverges at u = 0")
    start = float(bp.min()) if bp.size else 0.5 * hi
    start = min(start, 0.5 * hi)
    grid = np.geomspace(start, hi, max(2, int(math.log2(hi / start)) + 2))
    body = _quad.panels(f, np.concatenate((grid, bp)), rtol=rtol)
    return body + _quad.dyadic(f, start, "zero", rtol=rtol, base=body)


# ---------------------------------------------------------------------------
# moment bounds


def s_alpha_n(seq: AlphaSequence, H, t, n: int):
    """S_{alpha,n}(t); ``H`` is a law, a tail callable, or a tail value."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if isinstance(H, (int, float, np.ndarray)) and not callable(H):
        h = np.asarray(H, dtype=float)
    else:
        Hf = _tail_and_quantile(H)[0]
        h = np.asarray(Hf(np.asarray(t, dtype=float)), dtype=float)
    return seq.S_truncated(h, n)


def _t_breakpoints(seq, Q, bt, n):
    k = np.arange(min(n + 1, 256))
    lv = np.asarray(seq(k), dtype=float)
    lv = lv[(lv > 0) & (lv < 1)]
    tk = np.asarray(Q(lv), dtype=float) if lv.size else np.array([])
    return np.concatenate((np.asarray(bt, dtype=float), tk[np.isfinite(tk)]))


def bound_mean_w1(seq: AlphaSequence, law, n: int, rtol: float = 1e-8) -> float:
    """4 int_0^inf sqrt(min(H^2, S_n / n)) dt."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _, Q, bt, _ = _tail_and_quantile(law)
    logH = _log_tail(law)

    def logf(t):
        lh = logH(t)
        return math.log(4.0) + 0.5 * np.minimum(2.0 * lh, seq.log_S(lh, n) - math.log(n))

    f = lambda t: np.exp(logf(t))
    return _quad.half_line(f, rtol=rtol, breakpoints=_t_breakpoints(seq, Q, bt, n), log_f=logf,
                           name="mean bound")


def _sqrt_S_integral(seq, law, n, rtol):
    _, Q, bt, _ = _tail_and_quantile(law)
    logH = _log_tail(law)
    logf = lambda t: 0.5 * seq.log_S(logH(t), n)
    f = lambda t: np.exp(logf(t))
    nb = 256 if n is None else n
    return _quad.half_line(f, rtol=rtol, breakpoints=_t_breakpoints(seq, Q, bt, nb), log_f=logf,
                           name="int sqrt(S)")


def bound_l2_w1(seq: AlphaSequence, law, n: int, rtol: float = 1e-8) -> float:
    """(2 sqrt 2 / sqrt n) int_0^inf sqrt(S_n(t)) dt."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * math.sqrt(2.0) / math.sqrt(n) * _sqrt_S_integral(seq, law, n, rtol)


def u_n_cesaro(seq: AlphaSequence, n: int) -> float:
    """(1/n) sum_{k=1}^n alpha(k)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(seq.prefix(n + 1) - seq.prefix(1)) / n


def _check_statistic(statistic):
    s = {"mean_w1": "mean", "l2_w1": "l2"}.get(statistic, statistic)
    if s not in ("mean", "l2"):
        raise ValueError("statistic must be 'mean' or 'l2'")
    return s


def rate_poly(seq: AlphaSequence, Q, n: int, statistic: str = "mean") -> float:
    """Quantile-integral bound for alpha(k) = O(k^-a), a > 1 (constants dropped)."""
    if seq.kind != "polynomial":
        raise ValueError("rate_poly needs a polynomial alpha model")
    a = seq.params["a"]
    if a <= 1:
        raise ValueError("rate_poly needs a > 1")
    s = _check_statistic(statistic)
    Qf, bu = _quantile_only(Q)
    e = (a + 1) / (2 * a)
    cut = n ** (-a / (a + 1)) if s == "mean" else n ** (-a)
    if s == "mean":
        low = _u_integral(Qf, 0.0, cut, bu, name="int Q")
    else:
        low = _u_integral(lambda u: Qf(u) / np.sqrt(u), 0.0, cut, bu, name="int Q / sqrt(u)")
    high = _u_integral(lambda u: Qf(u) * u ** (-e), cut, 1.0, bu)
    return low + high / math.sqrt(n)


def rate_geo(seq: AlphaSequence, Q, n: int, statistic: str = "mean") -> float:
    """Quantile-integral bound for geometric alpha (constants dropped)."""
    if seq.kind not in ("geometric", "table"):
        raise ValueError("rate_geo needs a geometric alpha model")
    s = _check_statistic(statistic)
    Qf, bu = _quantile_only(Q)
    cut = math.log(n) / n if s == "mean" else math.exp(-n)
    cut = min(cut, 1.0)
    if s == "mean":
        low = _u_integral(Qf, 0.0, cut, bu, name="int Q") if cut > 0 else 0.0
    else:
        low = _u_integral(lambda u: Qf(u) / np.sqrt(u), 0.0, cut, bu) if cut > 0 else 0.0
    g = lambda u: Qf(u) * np.abs(np.log(u)) / np.sqrt(u)
    high = _u_integral(g, cut, 1.0, bu) if cut > 0 else _u_integral(g, 0.0, 1.0, bu)
    return low + high / math.sqrt(n)


def rate_nonsummable(seq: AlphaSequence, Q, n: int, statistic: str = "mean") -> float:
    """int_0^{sqrt(u_n)} Q (mean) or int_0^{u_n} Q / sqrt(u) (l2)."""
    s = _check_statistic(statistic)
    if seq.summable:
        raise ValueError("rate_nonsummable needs a non-summable alpha sequence")
    Qf, bu = _quantile_only(Q)
    un = u_n_cesaro(seq, n)
    if s == "mean":
        return _u_integral(Qf, 0.0, min(1.0, math.sqrt(un)), bu, name="int Q")
    return _u_integral(lambda u: Qf(u) / np.sqrt(u), 0.0, min(1.0, un), bu, name="int Q / sqrt(u)")


# ---------------------------------------------------------------------------
# von Bahr-Esseen and Rosenthal bounds


def R_n(seq: AlphaSequence, Q, u, n: int):
    """(min{q >= 1 : alpha(q) <= u} ^ n) Q(u)."""
    Qf, _ = _quantile_only(Q)
    u = np.asarray(u, dtype=float)
    q = np.maximum(1.0, seq.count_gt(u))
    out = np.minimum(q, n) * np.asarray(Qf(u), dtype=float)
    return float(out) if out.ndim == 0 else out


def R_n_inverse(seq: AlphaSequence, Q, x: float, n: int) -> float:
    """inf{u in [0, 1] : R_n(u) <= x}, exact to the last float.

    Bisection runs over the bit patterns of positive doubles, which are
    ordered like the values, so the result is the smallest float u with
    R_n(u) <= x and R_n(R_n^-1(x)) <= x holds exactly.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    to_bits = lambda v: int(np.float64(v).view(np.int64))
    to_float = lambda i: float(np.int64(i).view(np.float64))
    lo, hi = 0, to_bits(1.0)
    if R_n(seq, Q, to_float(1), n) <= x:
        return 0.0
    lo = 1
    # invariant: R_n(lo) > x >= R_n(hi); R_n(1) = Q(1) * 1 may exceed x
    if R_n(seq, Q, 1.0, n) > x:
        return 1.0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if R_n(seq, Q, to_float(mid), n) <= x:
            hi = mid
        else:
            lo = mid
    return to_float(hi)


def _upper_quantile_moment(Q, levels, p: float):
    """J(x) = int_0^x Q^p at each level x in (0, 1], not via alpha."""
    levels = np.asarray(levels, dtype=float)
    law = Q if isinstance(Q, ReferenceLaw) else None
    if isinstance(law, TabulatedLaw) and law.lower >= 0:
        return law.upper_quantile_power(levels, p)
    from .distributions import Exponential
    if isinstance(law, Exponential):
        return special.gamma(p + 1) * special.gammaincc(p + 1, -np.log(levels)) / law.rate ** p
    Qf, bu = _quantile_only(Q)
    uniq = np.unique(levels[levels > 0])
    f = lambda u: np.asarray(Qf(u), dtype=float) ** p
    vals = np.empty(uniq.size)
    acc = _u_integral(f, 0.0, uniq[0], bu, name="int Q^p")
    vals[0] = acc
    for i in range(1, uniq.size):
        acc += _u_integral(f, uniq[i - 1], uniq[i], bu)
        vals[i] = acc
    out = np.zeros_like(levels)
    pos = levels > 0
    out[pos] = vals[np.searchsorted(uniq, levels[pos])]
    return out


def bound_vbe(seq: AlphaSequence, Q, p: float, n: int, form: str = "integral") -> float:
    """n^(1-p) int_0^1 (alpha^-1 ^ n)^(p-1) Q^p for p in (1, 2).

    ``form='integral'`` integrates the step integrand numerically;
    ``form='sum'`` is the exact rearrangement
    n^(1-p) sum_{k<n} ((k+1)^(p-1) - k^(p-1)) int_0^alpha(k) Q^p;
    ``form='displayed'`` uses the weights (k+1)^(p-2), k = 0..n, which agree
    with the exact ones up to a factor in [p - 1, 1].
    """
    if not 1 < p < 2:
        raise ValueError("von Bahr-Esseen bound needs 1 < p < 2")
    return _moment_integral(seq, Q, p, n, form)


def _moment_integral(seq, Q, p, n, form):
    if n < 1:
        raise ValueError("n must be >= 1")
    Qf, bu = _quantile_only(Q)
    if _is_zero_quantile(Qf):
        return 0.0
    scale = float(n) ** (1 - p)
    if form == "integral":
        k = np.arange(min(n, 1 << 20))
        steps = np.asarray(seq(k), dtype=float)
        steps = steps[(steps > 0) & (steps < 1)]
        f = lambda u: np.minimum(seq.count_ge(u), n) ** (p - 1) * np.asarray(Qf(u), dtype=float) ** p
        bp = np.concatenate((np.unique(steps), np.asarray(bu, dtype=float)))
        return scale * _u_integral(f, 0.0, 1.0, bp, name=f"int (alpha^-1 ^ n)^(p-1) Q^p")
    if form == "sum":
        k = np.arange(n, dtype=float)
        w = (k + 1) ** (p - 1) - k ** (p - 1)
    elif form == "displayed":
        k = np.arange(n + 1, dtype=float)
        w = (k + 1) ** (p - 2)
    else:
        raise ValueError(f"unknown form {form!r}")
    lv = np.minimum(np.asarray(seq(k.astype(np.int64)), dtype=float), 1.0)
    J = _upper_quantile_moment(Q, lv, p)
    if not np.all(np.isfinite(J)):
        raise DivergentIntegral("int Q^p diverges")
    return scale * float(np.sum(w * J))


@dataclass(frozen=True)
class TailBound:
    value: float
    raw: float
    level: float
    term1: float
    term2: float


def tail_bound_vbe(seq: AlphaSequence, Q, n: int, x: float, eta: float = 1.5) -> TailBound:
    """Bound on P(n W1 >= 6x):

    36 (n/x) int_0^v Q + 64/(2-eta) (n/x^eta) int_v^1 R_n^(eta-1) Q,
    v = R_n^-1(x), reported clipped to [0, 1].
    """
    if x <= 0:
        raise ValueError("x must be > 0")
    if not 1 <= eta < 2:
        raise ValueError("eta must lie in [1, 2)")
    Qf, bu = _quantile_only(Q)
    if _is_zero_quantile(Qf):
        return TailBound(0.0, 0.0, 0.0, 0.0, 0.0)
    v = R_n_inverse(seq, Q, x, n)
    c1, c2 = 36.0, 64.0 / (2.0 - eta)
    i1 = _u_integral(Qf, 0.0, v, bu, name="int Q") if v > 0 else 0.0
    steps = np.asarray(seq(np.arange(1, min(n, 1 << 16) + 1)), dtype=float)
    steps = steps[(steps > v) & (steps < 1)]
    g = lambda u: np.asarray(R_n(seq, Q, u, n), dtype=float) ** (eta - 1) * np.asarray(Qf(u), dtype=float)
    lo = v if v > 0 else 0.0
    i2 = _u_integral(g, lo, 1.0, np.concatenate((steps, np.asarray(bu, dtype=float))))
    t1 = c1 * n / x * i1
    t2 = c2 * n / x ** eta * i2
    raw = t1 + t2
    return TailBound(min(1.0, max(0.0, raw)), raw, v, t1, t2)


def rosenthal_terms(seq1: AlphaSequence, seq2: AlphaSequence, law, p: float, n: int) -> tuple:
    if p <= 2:
        raise ValueError("Rosenthal bound needs p > 2")
    H, Qf, _, _ = _tail_and_quantile(law)
    s = _sqrt_S_integral(seq1, law, n, 1e-8)
    first = s ** p / n ** (p / 2)
    second = _moment_integral(seq2, law, p, n, "integral")
    return first, second


def bound_rosenthal(seq1: AlphaSequence, seq2: AlphaSequence, law, p: float, n: int) -> float:
    """s_{alpha,n}^p / n^(p/2) + n^(1-p) int (alpha_2^-1 ^ n)^(p-1) Q^p."""
    a, b = rosenthal_terms(seq1, seq2, law, p, n)
    return a + b


# ---------------------------------------------------------------------------
# rate predictions for the intermittent-map examples


class NoPrediction(ValueError):
    pass


@dataclass(frozen=True)
class RatePrediction:
    exponent: float
    log_power: float
    regime: str


_EQ = 1e-12


def _cmp(b, thr):
    if abs(b - thr) <= _EQ:
        return 0
    return -1 if b < thr else 1


def predicted_rate(gamma: float, b: float, side: str, statistic: str, p: Optional[float] = None) -> RatePrediction:
    """Rate n^exponent (ln n)^log_power of the moment of W1 for g ~ C d^-b.

    ``side`` is 'zero' (g nonincreasing, singular at 0) or 'one' (g
    nondecreasing, singular at 1); ``statistic`` is 'mean', 'l2', 'lp'
    (p in (1, 2)) or 'rosenthal' (p > 2).  gamma = 0 stands for the
    iid / m-dependent baseline.
    """
    stat = {"mean_w1": "mean", "l2_w1": "l2", "lp_w1": "lp"}.get(statistic, statistic)
    if side not in ("zero", "one"):
        raise ValueError("side must be 'zero' or 'one'")
    if not 0.0 <= gamma < 1.0 or b < 0:
        raise NoPrediction("no paper prediction: need 0 <= gamma < 1 and b >= 0")
    g = gamma
    if stat == "mean":
        return _rate_mean(g, b, side)
    if stat == "l2":
        return _rate_l2(g, b, side)
    if stat in ("lp", "rosenthal"):
        if p is None:
            raise ValueError(f"statistic {stat!r} needs p")
        return _rate_lp(g, b, side, p) if stat == "lp" else _rate_ros(g, b, side, p)
    raise ValueError(f"unknown statistic {statistic!r}")


def _rate_mean(g, b, side):
    if side == "zero":
        if b >= 1 - g:
            raise NoPrediction("no paper prediction: need b < 1 - gamma")
        if g < 0.5:
            c = _cmp(b, (1 - 2 * g) / 2)
            if c < 0:
                return RatePrediction(-0.5, 0.0, "gamma<1/2, b<(1-2g)/2")
            if c == 0:
                return RatePrediction(-0.5, 1.0, "gamma<1/2, b=(1-2g)/2")
            return RatePrediction(b + g - 1, 0.0, "gamma<1/2, b>(1-2g)/2")
        if abs(g - 0.5) <= _EQ:
            e = (1 - 2 * b) / 2
            return RatePrediction(-e, e, "gamma=1/2")
        return RatePrediction((b + g - 1) / (2 * g), 0.0, "gamma>1/2")
    if b >= 1:
        raise NoPrediction("no paper prediction: need b < 1")
    if g < 0.5:
        c = _cmp(b, (1 - 2 * g) / (2 * (1 - g)))
        if c < 0:
            return RatePrediction(-0.5, 0.0, "gamma<1/2, b<(1-2g)/(2(1-g))")
        if c == 0:
            return RatePrediction(-0.5, 1.0, "gamma<1/2, b=(1-2g)/(2(1-g))")
        return RatePrediction((g - 1) * (1 - b), 0.0, "gamma<1/2, b>(1-2g)/(2(1-g))")
    if abs(g - 0.5) <= _EQ:
        e = (1 - b) / 2
        return RatePrediction(-e, e, "gamma=1/2")
    return RatePrediction((g - 1) * (1 - b) / (2 * g), 0.0, "gamma>1/2")


def _rate_l2(g, b, side):
    if side == "zero":
        if g < 0.5:
            c = _cmp(b, (1 - 2 * g) / 2)
            if c < 0:
                return RatePrediction(-0.5, 0.0, "gamma<1/2, b<(1-2g)/2")
            if c == 0:
                return RatePrediction(-0.5, 1.0, "gamma<1/2, b=(1-2g)/2")
            if b < (1 - g) / 2:
                return RatePrediction((2 * b + g - 1) / (2 * g), 0.0, "gamma<1/2, (1-2g)/2<b<(1-g)/2")
            raise NoPrediction("no paper prediction: need b < (1 - gamma)/2")
        if abs(g - 0.5) <= _EQ:
            if b < 0.25:
                e = (1 - 4 * b) / 2
                return RatePrediction(-e, e, "gamma=1/2, b<1/4")
            raise NoPrediction("no paper prediction: need b < 1/4")
        if b < (1 - g) / 2:
            return RatePrediction((2 * b + g - 1) / (2 * g), 0.0, "gamma>1/2, b<(1-g)/2")
        raise NoPrediction("no paper prediction: need b < (1 - gamma)/2")
    if g < 0.5:
        c = _cmp(b, (1 - 2 * g) / (2 * (1 - g)))
        if c < 0:
            return RatePrediction(-0.5, 0.0, "gamma<1/2, b<(1-2g)/(2(1-g))")
        if c == 0:
            return RatePrediction(-0.5, 1.0, "gamma<1/2, b=(1-2g)/(2(1-g))")
        if b < 0.5:
            return RatePrediction((g - 1) * (1 - 2 * b) / (2 * g), 0.0, "gamma<1/2, (1-2g)/(2(1-g))<b<1/2")
        raise NoPrediction("no paper prediction: need b < 1/2")
    if b >= 0.5:
        raise NoPrediction("no paper prediction: need b < 1/2")
    if abs(g - 0.5) <= _EQ:
        e = (1 - 2 * b) / 2
        return RatePrediction(-e, e, "gamma=1/2, b<1/2")
    return RatePrediction((g - 1) * (1 - 2 * b) / (2 * g), 0.0, "gamma>1/2, b<1/2")


def _rate_lp(g, b, side, p):
    if not 1 < p < 2:
        raise NoPrediction("no paper prediction: lp rates need 1 < p < 2")
    if side == "zero":
        if b >= (1 - g) / p:
            raise NoPrediction("no paper prediction: need b < (1 - gamma)/p")
        thr = (1 - p * g) / p
        above = lambda: RatePrediction((p * b + g - 1) / (p * g), 0.0, "b>(1-pg)/p" if g < 1 / p else "gamma>=1/p")
    else:
        if b >= 1 / p:
            raise NoPrediction("no paper prediction: need b < 1/p")
        thr = (1 - p * g) / (p * (1 - g))
        above = lambda: RatePrediction((g - 1) * (1 - p * b) / (p * g), 0.0,
                                       "b>(1-pg)/(p(1-g))" if g < 1 / p else "gamma>=1/p")
    if g < 1 / p:
        c = _cmp(b, thr)
        if c < 0:
            return RatePrediction((1 - p) / p, 0.0, "gamma<1/p, below threshold")
        if c == 0:
            return RatePrediction((1 - p) / p, 1.0 / p, "gamma<1/p, at threshold")
    return above()


def _rate_ros(g, b, side, p):
    if p <= 2:
        raise NoPrediction("no paper prediction: Rosenthal rates need p > 2")
    if side == "zero":
        if b >= (1 - g) / p:
            raise NoPrediction("no paper prediction: need b < (1 - gamma)/p")
        thr = (2 - g * (p + 2)) / (2 * p)
        above = lambda: RatePrediction((p * b + g - 1) / (p * g), 0.0, "above threshold" if g < 0.5 else "gamma>=1/2")
    else:
        if b >= 1 / p:
            raise NoPrediction("no paper prediction: need b < 1/p")
        thr = (2 - g * (p + 2)) / (2 * p * (1 - g))
        above = lambda: RatePrediction((g - 1) * (1 - p * b) / (p * g), 0.0,
                                       "above threshold" if g < 0.5 else "gamma>=1/2")
    if g < 0.5 and _cmp(b, thr) <= 0:
        return RatePrediction(-0.5, 0.0, "gamma<1/2, at or below threshold")
    return above()


# ---------------------------------------------------------------------------
# CLT condition


@dataclass(frozen=True)
class CltVerdict:
    holds: bool
    closed_form: Optional[bool]
    kappa: float


def _model_tail(gamma, b, side, log_exponent):
    """Tail of g = d^-b (beta/b + |ln d|)^-beta under a density ~ x^-gamma at 0."""
    expo = (1 - gamma) / b if side == "zero" else 1.0 / b

    def logH(t):
        t = np.asarray(t, dtype=float)
        lt = np.log(np.maximum(t, 1.0))
        # d ~ t^-1/b (ln t)^-beta/b, then H ~ d^(1-gamma) (zero) or d (one)
        val = -expo * (lt + log_exponent * np.log1p(lt / max(b, 1e-300)))
        return np.where(t <= 1.0, 0.0, val)

    return logH


def clt_condition_check(gamma: float, H=None, b: Optional[float] = None, side: Optional[str] = None,
                        log_exponent: float = 0.0) -> CltVerdict:
    """Finiteness of int_0^inf H(t)^kappa dt, kappa = (1-2g)/(2(1-g)).

    ``H`` is a law or a tail callable; alternatively (b, side, log_exponent)
    describe g ~ d^-b |ln d|^-beta at the singular endpoint, in which case
    the closed-form verdict is also returned.
    """
    if not 0.0 <= gamma < 0.5:
        raise ValueError("CLT condition requires γ < 1/2")
    kappa = (1 - 2 * gamma) / (2 * (1 - gamma))
    closed = None
    if b is not None:
        if side not in ("zero", "one"):
            raise ValueError("side must be 'zero' or 'one'")
        if b == 0:
            closed = True
        else:
            thr = (1 - 2 * gamma) / 2 if side == "zero" else kappa
            c = _cmp(b, thr)
            closed = c < 0 or (c == 0 and log_exponent > 1)
    if H is not None:
        logH = _log_tail(H)
        logf = lambda t: kappa * logH(t)
    elif b is not None:
        if b == 0:
            return CltVerdict(True, closed, kappa)
        logH = _model_tail(gamma, b, side, log_exponent)
        logf = lambda t: kappa * logH(t)
    else:
        raise ValueError("give a tail H or the model (b, side)")
    holds = not _quad.diverges(logf, "infinity")
    return CltVerdict(holds, closed, kappa)


# ---------------------------------------------------------------------------
# quantile conditions


@dataclass(frozen=True)
class QuantileReport:
    DMR: bool
    DM: bool
    D: bool
    values: dict = field(default_factory=dict)


def _log_count(seq, u):
    with np.errstate(divide="ignore"):
        return np.log(seq.count_ge(u))


def quantile_conditions(seq: AlphaSequence, Q, evaluate: bool = False) -> QuantileReport:
    """Finiteness of

    DMR: int alpha^-1 Q^2,   DM: int alpha^-1 Q / sqrt(int_0^u alpha^-1),
    D:   int sqrt(alpha^-1) Q / sqrt(u),

    all over (0, 1).  Divergence is decided at u -> 0; the hierarchy
    D => DM => DMR is asserted on the verdicts.
    """
    Qf, bu = _quantile_only(Q)
    if _is_zero_quantile(Qf):
        return QuantileReport(True, True, True, {"DMR": 0.0, "DM": 0.0, "D": 0.0})

    def logQ(u):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(Qf(u), dtype=float))

    log_dmr = lambda u: _log_count(seq, u) + 2 * logQ(u)
    log_d = lambda u: 0.5 * _log_count(seq, u) + logQ(u) - 0.5 * np.log(u)

    def log_dm(u):
        with np.errstate(divide="ignore"):
            return _log_count(seq, u) + logQ(u) - 0.5 * np.log(seq.S_infinite(u))

    dmr = not _quad.diverges(log_dmr, "zero")
    d = not _quad.diverges(log_d, "zero")
    dm = seq.summable and not _quad.diverges(log_dm, "zero")
    values = {}
    if evaluate:
        fns = {
            "DMR": lambda u: seq.count_ge(u) * np.asarray(Qf(u)) ** 2,
            "D": lambda u: np.sqrt(seq.count_ge(u)) * np.asarray(Qf(u)) / np.sqrt(u),
            "DM": lambda u: np.where(seq.count_ge(u) > 0,
                                     seq.count_ge(u) * np.asarray(Qf(u)) / np.sqrt(np.maximum(seq.S_infinite(u), 1e-300)), 0.0),
        }
        steps = np.asarray(seq(np.arange(min(4096, 1 << 12))), dtype=float)
        bp = np.concatenate((steps[(steps > 0) & (steps < 1)], np.asarray(bu, dtype=float)))
        for key, ok in (("DMR", dmr), ("DM", dm), ("D", d)):
            values[key] = _quad.unit_interval(fns[key], rtol=1e-8, breakpoints=bp, check=False) if ok else math.inf
    if (d and not dm) or (dm and not dmr):
        raise AssertionError(f"quantile-condition hierarchy violated: D={d}, DM={dm}, DMR={dmr}")
    return QuantileReport(dmr, dm, d, values)


def power_family_conditions(a: float, c: float) -> QuantileReport:
    """Exact verdicts for alpha(k) ~ k^-a, Q(u) = u^-c.

    alpha^-1(u) ~ u^(-1/a) and int_0^u alpha^-1 ~ u^(1 - 1/a) (a > 1), so
    the three integrands behave as u^-(1/a + 2c), u^-(1/(2a) + c + 1/2) and
    u^-((1/a + 2c + 1)/2): each is finite iff 1/a + 2c < 1.
    """
    e = 1.0 / a + 2.0 * c
    ok = e < 1.0
    return QuantileReport(ok, ok and a > 1, ok, {"exponent": e})


# ---------------------------------------------------------------------------
# equivalence identity


def _knot_table(seq: AlphaSequence):
    """Indices k and S_inf(alpha(k)), dense for small k and geometric beyond."""
    k = np.unique(np.concatenate((np.arange(4096.0), np.floor(np.geomspace(4096.0, 1e300, 8000)))))
    a = np.asarray(seq(k), dtype=float)
    keep = (a > 0) | (k == 0)
    k = k[keep]
    return k, seq.S_infinite(np.asarray(seq(k), dtype=float))


def _G_inverse(seq: AlphaSequence, v, table=None):
    """x with int_0^x alpha^-1 = v^2, i.e. S_inf(x) = v^2.

    S_inf is concave and piecewise linear, S(x) = x N(x) + T(N(x)) with
    N = alpha^-1 and T the tail sum.  Newton steps started left of the root
    stay left of it and land on the exact piece after a few iterations.
    """
    v = np.asarray(v, dtype=float)
    s = v * v
    kt, St = table if table is not None else _knot_table(seq)
    # start at a knot alpha(k) with S(alpha(k)) < s
    i = np.clip(np.searchsorted(-St, -s, side="right"), 0, kt.size - 1)
    x = np.asarray(seq(kt[i]), dtype=float)
    x = np.where(St[i] < s, x, 0.0)
    for _ in range(200):
        N = seq.count_ge(np.maximum(x, 1e-320))
        with np.errstate(invalid="ignore", divide="ignore"):
            x_new = np.where(np.isfinite(N) & (N > 0), (s - seq.tail_sum(N)) / N, x)
        x_new = np.maximum(x_new, x)
        if np.all(x_new <= x * (1 + 1e-15)):
            x = x_new
            break
        x = x_new
    return np.clip(x, 0.0, seq.alpha0)


def equiv_identity_check(seq: AlphaSequence, law) -> dict:
    """Compare int_0^inf sqrt(S_inf(t)) dt with int_0^{G(1)} Q(G^-1(v)) dv,
    G(x) = sqrt(int_0^x alpha^-1); returns lhs, rhs and relative discrepancy."""
    if not seq.summable:
        raise DivergentIntegral("S is infinite for a non-summable alpha")
    H, Qf, bt, _ = _tail_and_quantile(law)
    lhs = _sqrt_S_integral(seq, law, None, 1e-10)
    top = math.sqrt(seq.S_infinite(1.0))
    k = np.arange(256)
    knots = np.sqrt(seq.S_infinite(np.asarray(seq(k), dtype=float)))
    table = _knot_table(seq)
    f = lambda v: np.asarray(Qf(np.maximum(_G_inverse(seq, v, table), 1e-300)), dtype=float)
    rhs = _u_integral(f, 0.0, top, knots[(knots > 0) & (knots < top)], rtol=1e-10, name="int Q(G^-1)")
    if lhs == 0 and rhs == 0:
        return {"lhs": 0.0, "rhs": 0.0, "discrepancy": 0.0}
    return {"lhs": lhs, "rhs": rhs, "discrepancy": abs(lhs - rhs) / abs(lhs)}


# ---------------------------------------------------------------------------
# sufficient conditions


def _moment_order(law) -> float:
    if isinstance(law, TabulatedLaw):
        return math.inf if law.tail_index is None else law.tail_index
    if isinstance(law, ReferenceLaw):
        if law.has_moment(1e6):
            return math.inf
        lo, hi = 0.0, 1e6
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if law.has_moment(mid) else (lo, mid)
        return lo
    raise TypeError("sufficient conditions need a ReferenceLaw")


def _series_converges(seq: AlphaSequence, term) -> bool:
    """sum_k term(alpha(k), k) over the model tail, by the block-doubling test."""
    def logf(x):
        with np.errstate(all="ignore"):
            v = term(seq.continuous(x), x)
            return np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), -np.inf)
    return not _quad.diverges(logf, "infinity")


def sufficient_conditions(seq: AlphaSequence, law, p: Optional[float] = None) -> dict:
    """Evaluate the five sufficient conditions for DM and cross-check with DM."""
    logH = _log_tail(law)
    P = _moment_order(law)
    order = seq.poly_order
    items = {}

    def choose_p(strict: bool):
        if p is not None:
            return p if p > 2 and (p < P or (not strict and p <= P)) else None
        if P == math.inf:
            a = order if math.isfinite(order) else EFFECTIVE_INFINITE_ORDER
            return max(2.5, 2 * a / (a - 1) + 1.0) if a > 1 else 64.0
        if P <= 2:
            return None
        return P - 1e-9 if strict else P

    p1 = choose_p(True)
    if p1 is None:
        items[1] = {"applicable": False, "holds": False}
    else:
        e = (p1 - 2) / (2 * (p1 - 1))
        ok = _series_converges(seq, lambda a, k: (a / k) ** e)
        items[1] = {"applicable": True, "holds": ok, "p": p1}
    p2 = choose_p(False)
    if p2 is None:
        items[2] = {"applicable": False, "holds": False}
    else:
        e = (p2 - 2) / (2 * p2)
        ok = _series_converges(seq, lambda a, k: a ** e / np.sqrt(k))
        items[2] = {"applicable": True, "holds": ok, "p": p2}

    def t_integral_finite(log_g):
        # log_g maps ln H to ln g(H); ln H = -inf means g = 0
        def logf(t):
            lh = logH(t)
            with np.errstate(invalid="ignore"):
                return np.where(np.isfinite(lh), log_g(np.where(np.isfinite(lh), lh, 0.0)), -np.inf)
        return not _quad.diverges(logf, "infinity")

    if order > 1:
        a = order if math.isfinite(order) else EFFECTIVE_INFINITE_ORDER
        ok = t_integral_finite(lambda lh: (a - 1) / (2 * a) * lh)
        items[3] = {"applicable": True, "holds": ok, "a": a}
    else:
        items[3] = {"applicable": False, "holds": False}
    if seq.kind == "logpoly" and seq.params["a"] > 1 or order > 1:
        a = seq.params["a"] if seq.kind == "logpoly" else EFFECTIVE_INFINITE_ORDER

        # ln(1 + 1/h) = logaddexp(0, -ln h)
        g4 = lambda lh: -(a - 1) / 2 * np.log(np.logaddexp(0.0, -lh))
        items[4] = {"applicable": True, "holds": t_integral_finite(g4), "a": a}
    else:
        items[4] = {"applicable": False, "holds": False}
    if order == math.inf:
        def g5(lh):
            with np.errstate(divide="ignore"):
                return 0.5 * (lh + np.log(np.abs(lh)))

        items[5] = {"applicable": True, "holds": t_integral_finite(g5)}
    else:
        items[5] = {"applicable": False, "holds": False}
    dm = quantile_conditions(seq, law).DM
    any_item = any(v["holds"] for v in items.values())
    return {"items": items, "DM": dm, "consistent": (not any_item) or dm}


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    bound_name: str
    params: dict
    n: int
    value: float
    regime: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BoundReport":
        return cls(**json.loads(text))
