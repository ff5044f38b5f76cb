"""Reference laws on the real line, tail/quantile functions and observables.

Every law exposes the distribution function ``cdf``, its generalized inverse
``ppf``, the tail ``H(t) = P(|X| > t)`` and the tail quantile ``Q`` (generalized
inverse of ``H``).  The transport routines additionally need the weighted
antiderivatives

    cdf_antideriv(t, r) = int_{-inf}^t |x|^{r-1} F(x) dx
    sf_antideriv(t, r)  = int_t^{inf}  |x|^{r-1} (1 - F(x)) dx

and the quantile-strip integrals ``int_{u0}^{u1} |c - F^{-1}(u)|^r du``.
:class:`TabulatedLaw` evaluates all of these in closed form; the base class
falls back to adaptive quadrature.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

QUAD_RTOL = 1e-9
TRUNCATION_LEVEL = 1e-12


def _signed_pow(x, r):
    """sign(x) |x|^r / r, the antiderivative of |x|^(r-1)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** r / r


def _pow_linear_antideriv(x, A, B, r):
    """Antiderivative of |x|^(r-1) (A + B x), vanishing at 0."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    return np.sign(x) * A * ax ** r / r + B * ax ** (r + 1) / (r + 1)


def _abs_pow_antideriv(y, r):
    """Antiderivative of |y|^r."""
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.abs(y) ** (r + 1) / (r + 1)


class ReferenceLaw:
    """A probability law on the line.

    Subclasses must implement :meth:`cdf` and :meth:`ppf` and set ``lower`` /
    ``upper`` (the support bounds, possibly infinite).  Everything else has a
    generic implementation based on quadrature.
    """

    lower: float = -math.inf
    upper: float = math.inf

    # -- basic functions -------------------------------------------------
    def cdf(self, t):
        raise NotImplementedError

    def cdf_left(self, t):
        """P(X < t); equals :meth:`cdf` for continuous laws."""
        return self.cdf(t)

    def sf(self, t):
        return 1.0 - np.asarray(self.cdf(t), dtype=float)

    def ppf(self, u):
        """Generalized inverse ``inf{t : F(t) >= u}``."""
        raise NotImplementedError

    def tail(self, t):
        """H(t) = P(|X| > t) for t >= 0."""
        t = np.asarray(t, dtype=float)
        if self.lower >= 0:
            return np.asarray(self.sf(t), dtype=float)
        return np.asarray(self.sf(t), dtype=float) + np.asarray(self.cdf_left(-t), dtype=float)

    def log_tail(self, t):
        """ln H(t); subclasses override it where H underflows long before ln H does."""
        with np.errstate(divide="ignore"):
            return np.log(self.tail(t))

    def quantile(self, u):
        """Q(u) = inf{t >= 0 : H(t) <= u}, for u in (0, 1]."""
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0) or np.any(u > 1):
            raise ValueError("quantile level must lie in (0, 1]")
        if self.lower >= 0:
            return np.maximum(np.asarray(self.ppf(1.0 - u), dtype=float), 0.0)
        return np.vectorize(lambda v: quantile_from_tail(self.tail, float(v)))(u)

    def has_moment(self, r: float) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    def moment(self, r: float) -> float:
        """E|X|^r, through the tail: r int_0^inf t^(r-1) H(t) dt."""
        if not self.has_moment(r):
            return math.inf
        return float(integrate.quad(lambda v: float(self.quantile(v)) ** r, 0.0, 1.0,
                                    epsrel=QUAD_RTOL, limit=200)[0])

    # -- integrals used by the transport module --------------------------
    def _effective_bounds(self):
        lo = self.lower if math.isfinite(self.lower) else float(self.ppf(TRUNCATION_LEVEL))
        hi = self.upper if math.isfinite(self.upper) else float(self.ppf(1.0 - TRUNCATION_LEVEL))
        return lo, hi

    def _quad(self, f, a, b):
        if b <= a:
            return 0.0
        points = [0.0] if a < 0.0 < b else None
        return integrate.quad(f, a, b, epsrel=QUAD_RTOL, epsabs=0.0, limit=500, points=points)[0]

    def cdf_antideriv(self, t, r: float = 1.0):
        if not self.has_moment(r):
            raise ValueError("W1 undefined: law lacks the required finite moment")
        lo, _ = self._effective_bounds()

        def one(s):
            if s <= lo:
                return 0.0
            return self._quad(lambda x: abs(x) ** (r - 1) * float(self.cdf(x)), lo, s)

        return np.vectorize(one, otypes=[float])(np.asarray(t, dtype=float))

    def sf_antideriv(self, t, r: float = 1.0):
        if not self.has_moment(r):
            raise ValueError("W1 undefined: law lacks the required finite moment")
        lo, hi = self._effective_bounds()

        def one(s):
            extra = 0.0
            if s < lo:
                extra = float(_signed_pow(lo, r) - _signed_pow(s, r))
                s = lo
            if s >= hi:
                return extra
            return extra + self._quad(lambda x: abs(x) ** (r - 1) * float(self.sf(x)), s, hi)

        return np.vectorize(one, otypes=[float])(np.asarray(t, dtype=float))

    def quantile_power(self, c, u0, u1, r: float = 1.0):
        """int_{u0}^{u1} |c - F^{-1}(u)|^r du, elementwise."""
        c, u0, u1 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (c, u0, u1)))
        out = np.empty(c.shape)
        for idx in np.ndindex(c.shape):
            a, b, level = u0[idx], u1[idx], c[idx]
            if b <= a:
                out[idx] = 0.0
                continue
            split = float(np.clip(self.cdf(level), a, b))
            f = lambda u: abs(level - float(self.ppf(u))) ** r
            val = 0.0
            for lo, hi in ((a, split), (split, b)):
                if hi > lo:
                    val += integrate.quad(f, lo, hi, epsrel=QUAD_RTOL, limit=200)[0]
            out[idx] = val
        return out


class TabulatedLaw(ReferenceLaw):
    """Piecewise-linear distribution function through knots ``(x_i, F_i)``.

    Repeated abscissae encode jumps, so step functions (empirical laws, point
    masses) are tabulated laws too.  An optional Pareto-type right tail
    ``P(X > t) = m (t / x_K)^(-p)`` beyond the last knot carries the remaining
    mass ``m = 1 - F_K``.
    """

    def __init__(self, x, F, tail_index: Optional[float] = None):
        x = np.asarray(x, dtype=float)
        F = np.asarray(F, dtype=float)
        if x.ndim != 1 or x.shape != F.shape or x.size == 0:
            raise ValueError("knots must be two 1-d arrays of equal, positive length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(F))):
            raise ValueError("knots must be finite")
        if np.any(np.diff(x) < 0) or np.any(np.diff(F) < -1e-15):
            raise ValueError("knots must be nondecreasing in x and F")
        F = np.clip(np.maximum.accumulate(F), 0.0, 1.0)
        if abs(F[0]) > 1e-12:
            raise ValueError("tabulated CDF must start at 0")
        F[0] = 0.0
        self.tail_mass = 1.0 - F[-1]
        if self.tail_mass <= 1e-14:
            F[-1] = 1.0
            self.tail_mass = 0.0
            self.tail_index = None
        else:
            if tail_index is None or tail_index <= 0 or x[-1] <= 0:
                raise ValueError("CDF ends below 1: a positive tail index and last knot > 0 are required")
            self.tail_index = float(tail_index)
        self.x = x
        self.F = F
        self.lower = float(x[0])
        self.upper = float(x[-1]) if self.tail_index is None else math.inf
        dx = np.diff(x)
        dF = np.diff(F)
        with np.errstate(divide="ignore", invalid="ignore"):
            self._slope = np.where(dx > 0, dF / np.where(dx > 0, dx, 1.0), 0.0)
        self._cache = {}

    # -- basic functions -------------------------------------------------
    def _tail_sf(self, t):
        return self.tail_mass * (t / self.x[-1]) ** (-self.tail_index)

    def log_tail(self, t):
        t = np.asarray(t, dtype=float)
        out = super().log_tail(t)
        if self.tail_index is not None and self.lower > -math.inf:
            far = t >= max(self.x[-1], -self.lower)
            with np.errstate(divide="ignore"):
                power = math.log(self.tail_mass) - self.tail_index * (np.log(np.maximum(t, self.x[-1])) - math.log(self.x[-1]))
            out = np.where(far, power, out)
        return out

    def _interp(self, t, idx):
        K = self.x.size - 1
        i = np.clip(idx, 0, max(K - 1, 0))
        if K == 0:
            return np.full(t.shape, self.F[0])
        return self.F[i] + self._slope[i] * (t - self.x[i])

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.x, t, side="right") - 1
        inside = self._interp(t, idx)
        out = np.where(idx < 0, 0.0, inside)
        top = t >= self.x[-1]
        if self.tail_index is None:
            out = np.where(top, 1.0, out)
        else:
            with np.errstate(divide="ignore"):
                out = np.where(top, 1.0 - self._tail_sf(np.maximum(t, self.x[-1])), out)
        return out

    def sf(self, t):
        t = np.asarray(t, dtype=float)
        out = 1.0 - self.cdf(t)
        if self.tail_index is not None:
            with np.errstate(divide="ignore"):
                out = np.where(t >= self.x[-1], self._tail_sf(np.maximum(t, self.x[-1])), out)
        return out

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        out = super().quantile(u)
        if self.tail_index is not None and self.lower >= 0:
            with np.errstate(divide="ignore", over="ignore"):
                deep = self.x[-1] * (self.tail_mass / u) ** (1.0 / self.tail_index)
            out = np.where(u < self.tail_mass, deep, out)
        return out

    def cdf_left(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.x, t, side="left") - 1
        inside = self._interp(t, idx)
        out = np.where(idx < 0, 0.0, inside)
        beyond = t > self.x[-1]
        if self.tail_index is None:
            out = np.where(beyond, 1.0, out)
        else:
            out = np.where(beyond, 1.0 - self._tail_sf(np.maximum(t, self.x[-1])), out)
        return out

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        K = self.x.size - 1
        j = np.searchsorted(self.F, u, side="left")
        jj = np.clip(j, 1, max(K, 1))
        if K == 0:
            inside = np.full(u.shape, self.x[0])
        else:
            F0, F1 = self.F[jj - 1], self.F[jj]
            x0, x1 = self.x[jj - 1], self.x[jj]
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(F1 > F0, (u - F0) / np.where(F1 > F0, F1 - F0, 1.0), 1.0)
            inside = x0 + np.clip(frac, 0.0, 1.0) * (x1 - x0)
        out = np.where(j <= 0, self.x[0], inside)
        over = j > K
        if np.any(over):
            if self.tail_index is None:
                out = np.where(over, self.x[-1], out)
            else:
                with np.errstate(divide="ignore"):
                    tail = self.x[-1] * (self.tail_mass / np.maximum(1.0 - u, 0.0)) ** (1.0 / self.tail_index)
                out = np.where(over, tail, out)
        return out

    def has_moment(self, r: float) -> bool:
        return self.tail_index is None or self.tail_index > r

    def moment(self, r: float) -> float:
        if not self.has_moment(r):
            return math.inf
        if self.lower >= 0:
            # E X^r = r int_0^inf t^(r-1) P(X > t) dt
            return float(r * self.sf_antideriv(0.0, r))
        return float(r * (self.sf_antideriv(0.0, r) + self.cdf_antideriv(0.0, r)))

    # -- closed-form integrals -------------------------------------------
    def _cumulative(self, r: float):
        key = float(r)
        if key not in self._cache:
            x, F, s = self.x, self.F, self._slope
            A = F[:-1] - s * x[:-1]
            lower = np.concatenate(([0.0], np.cumsum(
                _pow_linear_antideriv(x[1:], A, s, r) - _pow_linear_antideriv(x[:-1], A, s, r))))
            upper = np.concatenate(([0.0], np.cumsum(
                _pow_linear_antideriv(x[1:], 1.0 - A, -s, r) - _pow_linear_antideriv(x[:-1], 1.0 - A, -s, r))))
            self._cache[key] = (A, lower, upper)
        return self._cache[key]

    def _tail_pow_integral(self, a, b, r):
        """int_a^b x^(r-1) m (x/x_K)^(-p) dx for x_K <= a <= b <= inf."""
        p, m, xk = self.tail_index, self.tail_mass, self.x[-1]
        coef = m * xk ** p
        e = r - p
        if abs(e) < 1e-14:
            return coef * (np.log(b) - np.log(a))
        with np.errstate(over="ignore", divide="ignore"):
            return coef * (b ** e - a ** e) / e

    def cdf_antideriv(self, t, r: float = 1.0):
        if not self.has_moment(r):
            raise ValueError("W1 undefined: law lacks the required finite moment")
        t = np.asarray(t, dtype=float)
        A, lower, _ = self._cumulative(r)
        K = self.x.size - 1
        idx = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, max(K - 1, 0))
        if K == 0:
            inside = np.zeros(t.shape)
        else:
            inside = lower[idx] + _pow_linear_antideriv(t, A[idx], self._slope[idx], r) \
                - _pow_linear_antideriv(self.x[idx], A[idx], self._slope[idx], r)
        out = np.where(t <= self.x[0], 0.0, inside)
        top = t >= self.x[-1]
        if np.any(top):
            tt = np.maximum(t, self.x[-1])
            extra = _signed_pow(tt, r) - _signed_pow(self.x[-1], r)
            if self.tail_index is not None:
                extra = extra - self._tail_pow_integral(self.x[-1], tt, r)
            out = np.where(top, lower[-1] + extra, out)
        return out

    def sf_antideriv(self, t, r: float = 1.0):
        if not self.has_moment(r):
            raise ValueError("W1 undefined: law lacks the required finite moment")
        t = np.asarray(t, dtype=float)
        A, _, upper = self._cumulative(r)
        K = self.x.size - 1
        tail_total = 0.0 if self.tail_index is None else float(self._tail_pow_integral(self.x[-1], math.inf, r))
        idx = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, max(K - 1, 0))
        if K == 0:
            inside = np.full(t.shape, tail_total)
        else:
            partial = upper[idx] + _pow_linear_antideriv(t, 1.0 - A[idx], -self._slope[idx], r) \
                - _pow_linear_antideriv(self.x[idx], 1.0 - A[idx], -self._slope[idx], r)
            inside = upper[-1] - partial + tail_total
        below = t < self.x[0]
        out = np.where(below, upper[-1] + tail_total + _signed_pow(self.x[0], r) - _signed_pow(t, r), inside)
        top = t >= self.x[-1]
        if np.any(top):
            if self.tail_index is None:
                out = np.where(top, 0.0, out)
            else:
                out = np.where(top, self._tail_pow_integral(np.maximum(t, self.x[-1]), math.inf, r), out)
        return out

    def quantile_power(self, c, u0, u1, r: float = 1.0):
        c, u0, u1 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (c, u0, u1)))
        shape = c.shape
        c, u0, u1 = c.ravel(), u0.ravel(), np.maximum(u1.ravel(), u0.ravel())
        F, x = self.F, self.x
        K = x.size - 1
        top = F[-1]
        # body: u in [0, F_K], F^{-1} linear on each [F_i, F_{i+1}]
        out = np.zeros(c.size)
        b0 = np.minimum(u0, top)
        b1 = np.minimum(u1, top)
        if K > 0:
            s0 = np.clip(np.searchsorted(F, b0, side="right") - 1, 0, K - 1)
            s1 = np.clip(np.searchsorted(F, b1, side="left") - 1, 0, K - 1)
            s1 = np.maximum(s1, s0)
            counts = s1 - s0 + 1
            q = np.repeat(np.arange(c.size), counts)
            seg = np.repeat(s0 - np.cumsum(counts) + counts, counts) + np.arange(counts.sum())
            lo = np.maximum(F[seg], b0[q])
            hi = np.minimum(F[seg + 1], b1[q])
            keep = hi > lo
            q, seg, lo, hi = q[keep], seg[keep], lo[keep], hi[keep]
            dF = F[seg + 1] - F[seg]
            slope = (x[seg + 1] - x[seg]) / dF
            y0 = x[seg] + slope * (lo - F[seg]) - c[q]
            y1 = x[seg] + slope * (hi - F[seg]) - c[q]
            flat = slope * (hi - lo) <= 1e-15 * np.maximum(1.0, np.abs(y0))
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where(flat, np.abs(0.5 * (y0 + y1)) ** r * (hi - lo),
                               (_abs_pow_antideriv(y1, r) - _abs_pow_antideriv(y0, r)) / np.where(flat, 1.0, slope))
            out = np.bincount(q, weights=val, minlength=c.size)
        if self.tail_index is not None:
            t0, t1 = np.maximum(u0, top), np.maximum(u1, top)
            for i in np.nonzero(t1 > t0)[0]:
                out[i] += self._tail_quantile_power(c[i], t0[i], t1[i], r)
        return out.reshape(shape)

    def upper_quantile_power(self, levels, r: float):
        """int_{1-v}^1 |F^{-1}(u)|^r du for each upper level v.

        Works in v directly, so levels below 2^-53 (where 1 - v rounds to 1)
        keep their digits.
        """
        v = np.asarray(levels, dtype=float)
        out = np.empty(v.size)
        m, top = self.tail_mass, self.F[-1]
        live = np.nonzero(np.diff(self.F) > 0)[0]
        j = int(live[-1]) if live.size else -1
        for i, lv in enumerate(v.ravel()):
            if lv <= 0:
                out[i] = 0.0
                continue
            val, rest = 0.0, lv
            if m > 0:
                w = min(lv, m)
                p = self.tail_index
                if r >= p:
                    out[i] = math.inf
                    continue
                e = 1.0 - r / p
                val = self.x[-1] ** r * m ** (r / p) * w ** e / e
                rest = lv - w
            if rest > 0:
                d = top - self.F[j] if j >= 0 else 0.0
                if rest < 1e-6 and rest <= d:
                    # one linear piece; the midpoint rule is accurate to O(rest^2)
                    slope = (self.x[j + 1] - self.x[j]) / (self.F[j + 1] - self.F[j])
                    val += rest * abs(self.x[j] + slope * (d - 0.5 * rest)) ** r
                elif rest < 1e-6:
                    val += rest * abs(self.x[-1]) ** r
                else:
                    val += float(self.quantile_power(0.0, top - rest, top, r))
            out[i] = val
        return out.reshape(v.shape)

    def _tail_quantile_power(self, c, a, b, r):
        p, m, xk = self.tail_index, self.tail_mass, self.x[-1]
        split = float(np.clip(self.cdf(c), a, b))
        if r == 1.0 and p > 1.0:
            e = 1.0 - 1.0 / p
            coef = xk * m ** (1.0 / p) / e

            def qint(lo, hi):
                return coef * ((1.0 - lo) ** e - (1.0 - hi) ** e)

            return c * (split - a) - qint(a, split) + qint(split, b) - c * (b - split)
        if c == 0.0 and r < p:
            e = 1.0 - r / p
            return xk ** r * m ** (r / p) * ((1.0 - a) ** e - (1.0 - b) ** e) / e
        # in v = 1 - u the pole sits at v = 0, which quadrature nodes never hit
        f = lambda v: abs(c - xk * (m / v) ** (1.0 / p)) ** r
        val = 0.0
        for lo, hi in ((a, split), (split, b)):
            if hi > lo:
                val += integrate.quad(f, 1.0 - hi, 1.0 - lo, epsrel=QUAD_RTOL, limit=200)[0]
        return val

    # -- serialization -----------------------------------------------------
    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            if self.tail_index is not None:
                fh.write(f"# tail_index={self.tail_index!r}\n")
            w = csv.writer(fh)
            w.writerow(["t", "F(t)"])
            for xi, Fi in zip(self.x, self.F):
                w.writerow([repr(float(xi)), repr(float(Fi))])

    @classmethod
    def from_csv(cls, path) -> "TabulatedLaw":
        tail_index = None
        xs, Fs = [], []
        with open(path, newline="") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if "tail_index=" in line:
                        tail_index = float(line.split("tail_index=")[1])
                    continue
                if line.replace(" ", "") == "t,F(t)":
                    continue
                try:
                    a, b = line.split(",")
                    xs.append(float(a))
                    Fs.append(float(b))
                except ValueError:
                    raise ValueError(f"malformed tabulated law at line {lineno}") from None
        return cls(xs, Fs, tail_index=tail_index)


class Uniform(TabulatedLaw):
    def __init__(self, a: float = 0.0, b: float = 1.0):
        if not b > a:
            raise ValueError("Uniform requires a < b")
        super().__init__([a, b], [0.0, 1.0])
        self.a, self.b = float(a), float(b)

    def __repr__(self):
        return f"Uniform({self.a}, {self.b})"


class PointMass(TabulatedLaw):
    def __init__(self, c: float = 0.0):
        super().__init__([c, c], [0.0, 1.0])
        self.c = float(c)

    def __repr__(self):
        return f"PointMass({self.c})"


class Pareto(TabulatedLaw):
    """H(t) = min(1, (t / scale)^(-index)) on [scale, inf)."""

    def __init__(self, index: float, scale: float = 1.0):
        if index <= 0 or scale <= 0:
            raise ValueError("Pareto requires positive index and scale")
        super().__init__([scale], [0.0], tail_index=index)
        self.index, self.scale = float(index), float(scale)

    def __repr__(self):
        return f"Pareto({self.index}, scale={self.scale})"


class Exponential(ReferenceLaw):
    lower = 0.0
    upper = math.inf

    def __init__(self, rate: float = 1.0):
        if rate <= 0:
            raise ValueError("Exponential requires a positive rate")
        self.rate = float(rate)

    def __repr__(self):
        return f"Exponential({self.rate})"

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-self.rate * np.maximum(t, 0.0)), 0.0)

    def sf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, np.exp(-self.rate * np.maximum(t, 0.0)), 1.0)

    def log_tail(self, t):
        return -self.rate * np.maximum(np.asarray(t, dtype=float), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return -np.log1p(-u) / self.rate

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0) or np.any(u > 1):
            raise ValueError("quantile level must lie in (0, 1]")
        return -np.log(u) / self.rate

    def has_moment(self, r: float) -> bool:
        return True

    def moment(self, r: float) -> float:
        return math.gamma(r + 1) / self.rate ** r

    def cdf_antideriv(self, t, r: float = 1.0):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        lam = self.rate
        return t ** r / r - special.gamma(r) * special.gammainc(r, lam * t) / lam ** r

    def sf_antideriv(self, t, r: float = 1.0):
        t = np.asarray(t, dtype=float)
        lam = self.rate
        pos = special.gamma(r) * special.gammaincc(r, lam * np.maximum(t, 0.0)) / lam ** r
        return pos + np.where(t < 0, np.abs(t) ** r / r, 0.0)


class CallableLaw(ReferenceLaw):
    """A law given by user callables; integrals go through quadrature."""

    def __init__(self, cdf: Callable, ppf: Callable, lower=-math.inf, upper=math.inf,
                 moments_below: float = math.inf):
        self._cdf, self._ppf = cdf, ppf
        self.lower, self.upper = float(lower), float(upper)
        self.moments_below = moments_below

    def cdf(self, t):
        return np.vectorize(lambda s: float(self._cdf(s)), otypes=[float])(np.asarray(t, dtype=float))

    def ppf(self, u):
        return np.vectorize(lambda v: float(self._ppf(v)), otypes=[float])(np.asarray(u, dtype=float))

    def has_moment(self, r: float) -> bool:
        return r < self.moments_below


def empirical_cdf(sample) -> TabulatedLaw:
    """Right-continuous step CDF with jumps 1/n at the order statistics."""
    pts = np.sort(np.asarray(getattr(sample, "points", sample), dtype=float).ravel())
    n = pts.size
    if n == 0:
        raise ValueError("empirical_cdf needs a nonempty sample")
    x = np.repeat(pts, 2)
    levels = np.arange(n + 1) / n
    F = np.empty(2 * n)
    F[0::2] = levels[:-1]
    F[1::2] = levels[1:]
    return TabulatedLaw(x, F)


def quantile_from_tail(H, u: float, tol: float = 1e-12) -> float:
    """inf{t >= 0 : H(t) <= u} for a nonincreasing tail ``H``.

    ``H`` is either a callable, bisected to absolute tolerance ``tol``, or a
    table ``(t, values)`` read as a piecewise-linear function (constant before
    the first and after the last knot), inverted exactly.
    """
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    if callable(H):
        if H(0.0) <= u:
            return 0.0
        hi = 1.0
        while H(hi) > u:
            hi *= 2.0
            if hi > 1e300:
                return math.inf
        lo = 0.0 if hi == 1.0 else hi / 2.0
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if H(mid) <= u:
                hi = mid
            else:
                lo = mid
        return hi
    t, h = (np.asarray(a, dtype=float) for a in H)
    if np.any(np.diff(t) < 0) or np.any(np.diff(h) > 0):
        raise ValueError("tail table must be nondecreasing in t and nonincreasing in H")
    if h[0] <= u:
        return max(0.0, float(t[0])) if t[0] <= 0 else 0.0
    idx = np.nonzero(h <= u)[0]
    if idx.size == 0:
        return math.inf
    j = int(idx[0])
    t0, t1, h0, h1 = t[j - 1], t[j], h[j - 1], h[j]
    if h1 == h0:
        return float(t1)
    return float(t0 + (h0 - u) / (h0 - h1) * (t1 - t0))


@dataclass(frozen=True)
class Observable:
    """Monotone observable g on (0, 1).

    ``singular_zero``: C x^-b, ``singular_one``: C (1-x)^-b, ``identity``: x,
    ``custom``: a user callable with declared direction.  A log exponent beta > 0
    multiplies the singular kinds by ``(beta/b + |ln d|)^-beta`` where d is the
    distance to the singular endpoint; the shift keeps g monotone on the whole
    interval while matching ``|ln d|^-beta`` near the endpoint.
    """

    kind: str = "identity"
    exponent: float = 0.0
    scale: float = 1.0
    log_exponent: float = 0.0
    func: Optional[Callable] = None
    increasing: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in ("identity", "singular_zero", "singular_one", "custom"):
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.exponent < 0 or self.scale <= 0 or self.log_exponent < 0:
            raise ValueError("observable needs b >= 0, C > 0, beta >= 0")
        if self.log_exponent > 0 and self.kind in ("singular_zero", "singular_one") and self.exponent == 0:
            raise ValueError("a log factor needs a positive power exponent to stay monotone")
        if self.kind == "custom" and (self.func is None or self.increasing is None):
            raise ValueError("custom observables need func and increasing")

    @property
    def is_increasing(self) -> bool:
        if self.kind == "custom":
            return bool(self.increasing)
        if self.kind == "singular_zero":
            return self.exponent == 0 and self.log_exponent == 0
        return True

    @property
    def is_constant(self) -> bool:
        return self.kind in ("singular_zero", "singular_one") and self.exponent == 0 and self.log_exponent == 0

    def _singular(self, d):
        out = self.scale * d ** (-self.exponent)
        if self.log_exponent > 0:
            out = out * (self.log_exponent / self.exponent - np.log(d)) ** (-self.log_exponent)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "singular_zero":
            with np.errstate(divide="ignore"):
                return self._singular(x)
        if self.kind == "singular_one":
            with np.errstate(divide="ignore"):
                return self._singular(1.0 - x)
        return np.asarray(self.func(x), dtype=float)

    @property
    def singular_side(self) -> Optional[str]:
        if self.kind == "singular_zero" and self.exponent > 0:
            return "zero"
        if self.kind == "singular_one" and self.exponent > 0:
            return "one"
        return None

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom observables are not serializable")
        return {"kind": self.kind, "exponent": self.exponent, "scale": self.scale,
                "log_exponent": self.log_exponent}


def observable_eval(g: Observable, x: float) -> float:
    if not 0.0 < x < 1.0:
        raise ValueError("observable argument must lie in (0, 1)")
    return float(g(x))
