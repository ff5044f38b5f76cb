"""Ulam discretization of the transfer operator and alpha coefficients.

``L[i, j] = leb(I_i & T^-1 I_j) / leb(I_i)`` is the row-stochastic Ulam
matrix.  With invariant bin masses ``q`` (``q L = q``) the chain kernel with
respect to the invariant measure is ``K[j, i] = q_i L[i, j] / q_j``, so that
``nu(u * v o T) = nu(K(u) * v)`` holds for bin-constant u and v.  The
dependence coefficients are then evaluated on the finite chain.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.optimize import isotonic_regression
from scipy.sparse.linalg import spsolve

from .distributions import Observable, PointMass, TabulatedLaw
from .dynamics import GpmMap, LsvMap

BISECTION_STEPS = 1100  # enough to reach adjacent doubles anywhere in [0, 1]
ROW_TOL = 1e-12
INVARIANCE_TOL = 1e-10
MIN_EDGE_LOG2 = 40.0
MAX_POWER_STEPS = 100_000
_MAGIC = b"W1ULAM01"
DEFAULT_GAPS = (0, 1, 2, 4, 8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class UlamOperator:
    edges: np.ndarray
    L: sparse.csr_matrix
    q: np.ndarray
    K: sparse.csr_matrix
    gamma: float = 0.0
    mesh: str = "uniform"

    @property
    def m(self) -> int:
        return self.edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def h(self) -> np.ndarray:
        """Invariant density, constant on each bin."""
        return self.q / self.widths

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @classmethod
    def from_matrix(cls, L, edges=None, gamma: float = 0.0, mesh: str = "uniform") -> "UlamOperator":
        L = sparse.csr_matrix(L, dtype=float)
        m = L.shape[0]
        if L.shape != (m, m):
            raise ValueError("transition matrix must be square")
        edges = np.linspace(0.0, 1.0, m + 1) if edges is None else np.asarray(edges, dtype=float)
        _check_rows(L)
        q = _invariant_masses(L)
        return cls(edges, L, q, _chain_kernel(L, q), gamma, mesh)

    def check(self) -> None:
        _check_rows(self.L)
        res = np.abs(self.L.T @ self.q - self.q).sum()
        if res > 1e-8:
            raise RuntimeError(f"invariance residual {res:.3g}")
        krow = np.abs(np.asarray(self.K.sum(axis=1)).ravel() - 1.0).max()
        if krow > 1e-10:
            raise RuntimeError(f"chain kernel rows deviate from 1 by {krow:.3g}")
        nu_res = np.abs(self.K.T @ self.q - self.q).max()
        if nu_res > 1e-8:
            raise RuntimeError(f"nu not invariant under K (residual {nu_res:.3g})")


def _check_rows(L):
    dev = np.abs(np.asarray(L.sum(axis=1)).ravel() - 1.0).max()
    if dev > ROW_TOL:
        raise RuntimeError(f"Ulam rows deviate from 1 by {dev:.3g}")


def _invariant_masses(L: sparse.csr_matrix) -> np.ndarray:
    m = L.shape[0]
    # generator with the diagonal rebuilt from off-diagonal row sums: 1 - L_ii
    # cancels badly for nearly absorbing bins next to a neutral fixed point
    off = L - sparse.diags(L.diagonal())
    out = np.asarray(off.sum(axis=1)).ravel()
    A = (off - sparse.diags(out)).T.tolil()
    A[m - 1, :] = np.ones(m)
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    q = np.asarray(spsolve(A.tocsc(), rhs)).ravel()
    if not np.all(np.isfinite(q)):
        q = np.full(m, 1.0 / m)
    q = np.clip(q, 0.0, None)
    q /= q.sum()
    LT = L.T.tocsr()
    for step in range(MAX_POWER_STEPS):
        nxt = LT @ q
        nxt /= nxt.sum()
        res = np.abs(nxt - q).sum()
        q = nxt
        if res <= INVARIANCE_TOL:
            return q
    raise RuntimeError(f"power iteration did not converge in {MAX_POWER_STEPS} steps (residual {res:.3g})")


def _chain_kernel(L: sparse.csr_matrix, q: np.ndarray) -> sparse.csr_matrix:
    with np.errstate(divide="ignore"):
        inv = np.where(q > 0, 1.0 / q, 0.0)
    K = (sparse.diags(inv) @ L.T @ sparse.diags(q)).tocsr()
    empty = q <= 0
    if np.any(empty):
        K = (K + sparse.diags(empty.astype(float))).tocsr()
    return K


def mesh_edges(m: int, mesh: str = "uniform", gamma: float = 0.0) -> np.ndarray:
    i = np.arange(m + 1) / m
    if mesh == "uniform":
        return i
    if mesh == "graded":
        if not 0.0 <= gamma < 1.0:
            raise ValueError("graded mesh needs 0 <= gamma < 1")
        # first edge kept >= 2^-40: finer bins near 0 have preimages under the
        # expanding branch that doubles cannot separate from 1/2
        k = min(1.0 / (1.0 - gamma), MIN_EDGE_LOG2 / math.log2(m)) if m > 1 else 1.0
        e = i ** max(k, 1.0)
        e[-1] = 1.0
        return e
    raise ValueError(f"unknown mesh {mesh!r}")


def _branch_preimages(f, lo, hi, targets):
    """x in [lo, hi] with f(x) = target for a monotone branch f."""
    flo, fhi = float(f(np.array(lo))), float(f(np.array(hi)))
    increasing = fhi >= flo
    a = np.full(targets.shape, lo, dtype=float)
    b = np.full(targets.shape, hi, dtype=float)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (a + b)
        live = (mid > a) & (mid < b)
        if not np.any(live):
            break
        fm = f(mid)
        below = fm < targets if increasing else fm > targets
        a = np.where(live & below, mid, a)
        b = np.where(live & ~below, mid, b)
    return 0.5 * (a + b)


def build_ulam(tmap: Union[LsvMap, GpmMap], m: int, mesh: str = "uniform") -> UlamOperator:
    """Ulam matrix, invariant masses and chain kernel on m bins."""
    if m < 16:
        raise ValueError("Ulam discretization needs m >= 16")
    gmap = tmap.as_gpm() if isinstance(tmap, LsvMap) else tmap
    gamma = float(getattr(tmap, "gamma", 0.0))
    edges = mesh_edges(m, mesh, gamma)
    y = np.asarray(gmap.breakpoints)
    rows, cols, vals = [], [], []
    for k, f in enumerate(gmap.branches):
        lo, hi = y[k], y[k + 1]
        flo, fhi = float(f(np.array(lo))), float(f(np.array(hi)))
        ilo, ihi = min(flo, fhi), max(flo, fhi)
        inner = edges[(edges > ilo) & (edges < ihi)]
        pts = np.concatenate(([lo, hi], edges[(edges > lo) & (edges < hi)],
                              _branch_preimages(f, lo, hi, inner)))
        pts = np.unique(np.clip(pts, lo, hi))
        a, b = pts[:-1], pts[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        mid = 0.5 * (a + b)
        src = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, m - 1)
        img = np.clip(f(mid), 0.0, 1.0)
        dst = np.clip(np.searchsorted(edges, img, side="right") - 1, 0, m - 1)
        rows.append(src)
        cols.append(dst)
        vals.append(b - a)
    L = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(m, m)).tocsr()
    L.sum_duplicates()
    L = (sparse.diags(1.0 / np.diff(edges)) @ L).tocsr()
    # renormalize away bisection rounding (relative error ~1e-16 per row)
    L = (sparse.diags(1.0 / np.asarray(L.sum(axis=1)).ravel()) @ L).tocsr()
    _check_rows(L)
    q = _invariant_masses(L)
    op = UlamOperator(edges, L, q, _chain_kernel(L, q), gamma, mesh)
    op.check()
    return op


@dataclass(frozen=True)
class AlphaEstimate:
    """Estimated coefficients ``values[i]`` at ``lags[i]`` using ``grid`` thresholds."""

    lags: np.ndarray
    values: np.ndarray
    grid: int
    raw: Optional[np.ndarray] = None

    def __getitem__(self, lag):
        idx = np.nonzero(self.lags == lag)[0]
        if idx.size == 0:
            raise KeyError(lag)
        return float(self.values[idx[0]])


def _threshold_cuts(q: np.ndarray, size: Optional[int]) -> np.ndarray:
    """Prefix lengths (1..m-1) defining the threshold sets A = first c bins.

    For monotone g, {g <= x} is a prefix or a suffix of bins, and a suffix
    gives the same value as the complementary prefix.  With ``size`` given,
    cuts are placed at nu-quantile levels, densest near the two ends.
    """
    m = q.size
    if size is None or size >= m - 1:
        return np.arange(1, m)
    cum = np.cumsum(q)[:-1]
    half = max(size // 2, 1)
    lin = np.linspace(0.0, 1.0, half + 2)[1:-1]
    ends = np.geomspace(1e-6, 0.5, max(size - half, 2) // 2 + 1)
    levels = np.unique(np.concatenate([lin, ends, 1.0 - ends]))
    cuts = np.searchsorted(cum, levels) + 1
    return np.unique(np.clip(cuts, 1, m - 1))


def _check_lags(lags) -> np.ndarray:
    lags = np.atleast_1d(np.asarray(lags, dtype=int))
    if np.any(lags < 1):
        raise ValueError("lags must be >= 1")
    return lags


def _indicator_columns(op: UlamOperator, cuts: np.ndarray) -> tuple:
    m = op.m
    U = (np.arange(m)[:, None] < cuts[None, :]).astype(float)
    F = np.cumsum(op.q)[cuts - 1]
    return U, F


def _iterate_lags(K, V, lags, reduce):
    """reduce(K^n V) for every n in lags (processed in increasing order)."""
    order = np.argsort(lags)
    out = np.empty(lags.size)
    cur, W = 0, V
    for idx in order:
        for _ in range(int(lags[idx]) - cur):
            W = K @ W
        cur = int(lags[idx])
        out[idx] = reduce(W)
    return out


def _smooth(values: np.ndarray, lags: np.ndarray) -> np.ndarray:
    order = np.argsort(lags)
    fitted = isotonic_regression(values[order], increasing=False).x
    out = np.empty_like(values)
    out[order] = np.clip(fitted, 0.0, None)
    return out


def _check_observable(g: Optional[Observable], op: UlamOperator) -> None:
    if g is not None and g.kind == "custom":
        v = g(op.midpoints)
        d = np.diff(v)
        if not (np.all(d >= 0) or np.all(d <= 0)):
            raise ValueError("non-monotone observable")


def alpha1(op: UlamOperator, g: Optional[Observable], lags, x_grid: Optional[int] = 256,
           smooth: bool = False) -> AlphaEstimate:
    """max over thresholds of sum_j nu_j |(K^n 1_A)_j - nu(A)|.

    The estimate depends on a monotone g only through the ordering of bins,
    so every strictly monotone g gives the same values.
    """
    lags = _check_lags(lags)
    _check_observable(g, op)
    if g is not None and g.is_constant:
        z = np.zeros(lags.size)
        return AlphaEstimate(lags, z, 0, z)
    cuts = _threshold_cuts(op.q, x_grid)
    U, F = _indicator_columns(op, cuts)
    q = op.q
    raw = _iterate_lags(op.K, U, lags, lambda W: float(np.max(q @ np.abs(W - F[None, :]))))
    vals = _smooth(raw, lags) if smooth else raw
    return AlphaEstimate(lags, vals, cuts.size, raw)


def alpha2(op: UlamOperator, g: Optional[Observable], lags, x_grid: Optional[int] = 256,
           pair_grid: int = 12, gap_grid: Sequence[int] = DEFAULT_GAPS,
           smooth: bool = False) -> AlphaEstimate:
    """Coefficient with products of up to two centered indicators.

    For thresholds (x1, x2) and gap d = i2 - i1 the pair term is
    ``|| K^n (f1 * K^d f2) - nu(f1 * K^d f2) ||_{L1(nu)}`` with
    ``f = 1_A - nu(A)``; the supremum over i1 >= n sits at i1 = n because
    K contracts centered functions in L1(nu).  The single-indicator term
    (``alpha1`` on ``x_grid``) is included, so alpha2 >= alpha1.
    """
    lags = _check_lags(lags)
    one = alpha1(op, g, lags, x_grid)
    if g is not None and g.is_constant:
        return one
    q = op.q
    cuts = _threshold_cuts(q, pair_grid)
    U, F = _indicator_columns(op, cuts)
    f = U - F[None, :]
    P = cuts.size
    blocks = []
    gaps = sorted(set(int(d) for d in gap_grid))
    if any(d < 0 for d in gaps):
        raise ValueError("gaps must be >= 0")
    cur, W = 0, f
    for d in gaps:
        for _ in range(d - cur):
            W = op.K @ W
        cur = d
        blocks.append((f[:, :, None] * W[:, None, :]).reshape(op.m, P * P))
    V = np.concatenate(blocks, axis=1)
    V = V - (q @ V)[None, :]

    def reduce(Wn):
        return float(np.max(q @ np.abs(Wn - (q @ Wn)[None, :])))

    pair = _iterate_lags(op.K, V, lags, reduce)
    raw = np.maximum(one.raw, pair)
    vals = _smooth(raw, lags) if smooth else raw
    return AlphaEstimate(lags, np.maximum(vals, one.values if smooth else vals), one.grid, raw)


def pushforward_law(op: UlamOperator, g: Observable):
    """Law of g(Y) with Y distributed by the Ulam invariant density.

    The CDF is tabulated at the images of the bin edges and interpolated
    linearly.  An infinite image at a singular endpoint becomes a power tail
    whose exponent uses the local density shape: ``x^-gamma`` at 0 and
    bounded at 1.
    """
    if g.is_constant:
        return PointMass(float(g.scale))
    _check_observable(g, op)
    q, e = op.q, op.edges
    with np.errstate(divide="ignore"):
        vals = np.asarray(g(e), dtype=float)
    finite = np.isfinite(vals)
    inner = vals[1:-1]
    d = np.diff(inner)
    if not (np.all(d >= 0) or np.all(d <= 0)):
        raise ValueError("non-monotone observable")
    increasing = g.is_increasing if g.kind != "custom" else bool(g.increasing)
    cum = np.concatenate(([0.0], np.cumsum(q)))
    cum[-1] = 1.0
    if increasing:
        t, F = vals[finite], cum[finite]
    else:
        t, F = vals[finite][::-1], (1.0 - cum[finite])[::-1]
    F = np.clip(F, 0.0, 1.0)
    F = F - F[0]
    tail_index = None
    if not finite.all():
        side = g.singular_side
        b = g.exponent
        if side == "zero":
            kappa = 1.0 - op.gamma
        elif side == "one":
            kappa = 1.0
        else:
            raise ValueError("observable is infinite at an edge but has no singular side")
        tail_index = kappa / b
    return TabulatedLaw(t, F, tail_index=tail_index)


def save_operator(op: UlamOperator, path) -> None:
    L = op.L.tocsr()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qd8s", op.m, op.gamma, op.mesh.encode()[:8].ljust(8, b"\0")))
        fh.write(struct.pack("<q", L.nnz))
        for arr, dt in ((L.indptr, "<i8"), (L.indices, "<i8"), (L.data, "<f8"), (op.edges, "<f8"), (op.h, "<f8")):
            fh.write(np.asarray(arr, dtype=dt).tobytes())


def load_operator(path) -> UlamOperator:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != _MAGIC:
        raise ValueError("not an Ulam operator file")
    m, gamma, mesh = struct.unpack_from("<qd8s", buf, 8)
    (nnz,) = struct.unpack_from("<q", buf, 32)
    off = 40

    def take(count, dt):
        nonlocal off
        arr = np.frombuffer(buf, dtype=dt, count=count, offset=off)
        off += arr.nbytes
        return arr.copy()

    indptr, indices, data = take(m + 1, "<i8"), take(nnz, "<i8"), take(nnz, "<f8")
    edges, h = take(m + 1, "<f8"), take(m, "<f8")
    L = sparse.csr_matrix((data, indices, indptr), shape=(m, m))
    q = h * np.diff(edges)
    return UlamOperator(edges, L, q, _chain_kernel(L, q), gamma, mesh.rstrip(b"\0").decode())


def export_density(op: UlamOperator, path) -> None:
    with open(path, "w") as fh:
        fh.write("left,right,h\n")
        for a, b, v in zip(op.edges[:-1], op.edges[1:], op.h):
            fh.write(f"{float(a)!r},{float(b)!r},{float(v)!r}\n")
