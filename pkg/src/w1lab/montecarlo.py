"""Monte Carlo experiments: moments of W1(mu_n, mu), rate fits, limit laws."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from ._rng import stream, stream_key
from .distributions import Observable, PointMass, ReferenceLaw, empirical_cdf
from .dynamics import GpmMap, LsvMap, ProcessSpec, bates_law, simulate_series
from .transfer_operator import build_ulam, pushforward_law
from .transport import w1_vs_law, wr_vs_law

__all__ = [
    "ExperimentPlan", "ExperimentResult", "KernelTooNoisy", "run_experiment", "resolve_reference",
    "regress_rate", "covariance_kernel", "bridge_kernel", "factor_kernel", "simulate_limit_law",
    "ks_distance", "tail_exponent",
]

REFERENCE_BINS = 1 << 14
BOOTSTRAP = 1000
MIN_CI_REPLICAS = 30


class KernelTooNoisy(ArithmeticError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    """Replicated W1 (or W_r) computations over a grid of sample sizes.

    ``reference`` overrides the law the samples are compared with; otherwise
    it is the analytic law of the process (iid and m-dependent kinds) or the
    pushforward of the Ulam invariant density on a graded mesh of
    ``reference_bins`` cells.  ``n_ref`` switches map processes to a long-run
    empirical reference instead.
    """

    process: ProcessSpec
    n_grid: tuple
    replicas: int
    statistic: str = "w1"
    r: float = 1.0
    reference: Optional[ReferenceLaw] = None
    n_ref: Optional[int] = None
    seed: int = 0
    moments: tuple = (1.0, 2.0)
    bootstrap: int = BOOTSTRAP
    workers: int = 1
    reference_bins: int = REFERENCE_BINS

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be a strictly increasing list of positive sizes")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "moments", tuple(float(p) for p in self.moments))
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.statistic not in ("w1", "wr"):
            raise ValueError("statistic must be 'w1' or 'wr'")
        if self.r < 1:
            raise ValueError("order r must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def describe(self) -> dict:
        return {
            "process": self.process.describe(),
            "n_grid": list(self.n_grid),
            "replicas": self.replicas,
            "statistic": self.statistic,
            "r": self.r,
            "reference": repr(self.reference) if self.reference is not None else None,
            "n_ref": self.n_ref,
            "seed": self.seed,
            "reference_bins": self.reference_bins,
        }

    def plan_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ExperimentResult:
    plan_hash: str
    n_grid: tuple
    raw: dict
    mean: dict
    mean_ci: dict
    norms: dict
    norms_ci: dict
    wall_time: float
    reference_bias: Optional[float] = None
    process: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def norm(self, p: float, n: int) -> float:
        return self.norms[float(p)][n]

    def to_csv(self, path) -> None:
        """Columns: process, gamma, b, n, replica, w1, seed."""
        kind = self.process.get("kind", "")
        gamma = self.process.get("gamma", 0.0)
        obs = self.process.get("observable", {})
        b = obs.get("exponent", 0.0) if isinstance(obs, dict) else float("nan")
        with open(path, "w") as fh:
            fh.write("process,gamma,b,n,replica,w1,seed\n")
            for n in self.n_grid:
                for i, v in enumerate(self.raw[n]):
                    fh.write(f"{kind},{gamma:.12g},{b:.12g},{n},{i},{v:.12g},{self.seeds[n][i]}\n")

    def summary(self) -> dict:
        rows = []
        for n in self.n_grid:
            row = {"n": n, "mean": self.mean[n], "mean_ci": list(self.mean_ci[n])}
            for p in self.norms:
                row[f"L{p:g}"] = self.norms[p][n]
                row[f"L{p:g}_ci"] = list(self.norms_ci[p][n])
            rows.append(row)
        return {"plan_hash": self.plan_hash, "wall_time": self.wall_time,
                "reference_bias": self.reference_bias, "rows": rows}


# ---------------------------------------------------------------------------
# references


@lru_cache(maxsize=16)
def _pushforward(kind: str, gamma: float, observable: Observable, bins: int, gpm_map=None):
    tmap = LsvMap(gamma) if kind == "lsv" else gpm_map
    mesh = "graded" if getattr(tmap, "gamma", 0.0) > 0 else "uniform"
    op = build_ulam(tmap, bins, mesh=mesh)
    return pushforward_law(op, observable)


def resolve_reference(plan: ExperimentPlan) -> tuple:
    """(law, bias): the reference law and, for long-run references, a bias proxy.

    The proxy is W1 between the two halves of the reference run, which is of
    the same order as W1 between the reference sample and the true law.
    """
    spec = plan.process
    if plan.reference is not None:
        return plan.reference, None
    if spec.kind == "iid":
        return spec.law, None
    if spec.kind == "mdep":
        return bates_law(spec.m + 1), None
    if spec.observable.is_constant:
        return PointMass(float(spec.observable.scale)), None
    if plan.n_ref is None:
        if spec.observable.kind == "custom":
            raise ValueError("reference unavailable: a custom observable needs n_ref or an explicit reference")
        return _pushforward(spec.kind, float(spec.gamma), spec.observable, plan.reference_bins,
                            spec.gpm_map if spec.kind == "gpm" else None), None
    series = simulate_series(spec, int(plan.n_ref), rng=stream("reference", plan.plan_hash()))
    half = series.size // 2
    ref = empirical_cdf(series)
    bias = w1_vs_law(series[:half], empirical_cdf(series[half:2 * half]))
    return ref, float(bias)


# ---------------------------------------------------------------------------
# running


def _replica_seed(plan_hash: str, n: int, replica: int) -> int:
    return stream_key("replica", plan_hash, n, replica) % (1 << 63)


def _statistic(plan: ExperimentPlan, series: np.ndarray, law: ReferenceLaw) -> float:
    if plan.statistic == "w1" or plan.r == 1:
        return w1_vs_law(series, law)
    return wr_vs_law(series, law, plan.r) ** (1.0 / plan.r)


def _bootstrap_ci(values: np.ndarray, fn, resamples: int, rng) -> tuple:
    est = fn(values)
    if values.size < MIN_CI_REPLICAS or resamples <= 0:
        return (float("nan"), float("nan"))
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    boot = fn(values[idx], axis=1)
    lo, hi = np.quantile(boot, [0.025, 0.975])
    return (float(min(lo, est)), float(max(hi, est)))


def _mean(v, axis=None):
    return np.mean(v, axis=axis)


def _norm(p):
    def f(v, axis=None):
        return np.mean(v ** p, axis=axis) ** (1.0 / p)
    return f


def run_experiment(plan: ExperimentPlan, law: Optional[ReferenceLaw] = None) -> ExperimentResult:
    """Simulate ``replicas`` fresh trajectories for every n and record W1.

    Replica (n, i) draws from its own counter-based stream keyed by the plan
    hash, so results do not depend on the worker count or on task order.
    """
    t0 = time.perf_counter()
    bias = None
    if law is None:
        law, bias = resolve_reference(plan)
    h = plan.plan_hash()
    tasks = [(n, i) for n in plan.n_grid for i in range(plan.replicas)]

    def one(task):
        n, i = task
        seed = _replica_seed(h, n, i)
        series = simulate_series(plan.process.with_seed(seed), n)
        return _statistic(plan, series, law)

    if plan.workers == 1:
        values = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            values = list(pool.map(one, tasks))
    raw, seeds, mean, mean_ci = {}, {}, {}, {}
    norms = {p: {} for p in plan.moments}
    norms_ci = {p: {} for p in plan.moments}
    k = 0
    for n in plan.n_grid:
        v = np.asarray(values[k:k + plan.replicas], dtype=float)
        k += plan.replicas
        raw[n] = v
        seeds[n] = [_replica_seed(h, n, i) for i in range(plan.replicas)]
        rng = stream("bootstrap", h, n)
        mean[n] = float(np.mean(v))
        mean_ci[n] = _bootstrap_ci(v, _mean, plan.bootstrap, rng)
        for p in plan.moments:
            norms[p][n] = float(_norm(p)(v))
            norms_ci[p][n] = _bootstrap_ci(v, _norm(p), plan.bootstrap, rng)
    return ExperimentResult(h, plan.n_grid, raw, mean, mean_ci, norms, norms_ci,
                            time.perf_counter() - t0, bias, plan.process.describe(), seeds)


# ---------------------------------------------------------------------------
# rate regression


def _design(n, log_correction):
    ln = np.log(n)
    cols = [np.ones_like(ln), ln]
    if log_correction == "fit":
        cols.append(np.log(ln))
    elif log_correction != "none":
        raise ValueError("log_correction must be 'none' or 'fit'")
    return np.column_stack(cols)


def _fit(n, m, log_correction):
    if np.any(m <= 0) or not np.all(np.isfinite(m)):
        raise ValueError("moments must be positive to fit a rate")
    X = _design(n, log_correction)
    y = np.log(m)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return coef, resid, r2, X


def regress_rate(result: Union[ExperimentResult, tuple], statistic: Union[str, float] = "mean",
                 log_correction: str = "none", resamples: int = 200) -> dict:
    """Least-squares slope of log moment against log n.

    ``result`` is an :class:`ExperimentResult` or a pair (n, moments).
    With ``log_correction='fit'`` a ln ln n column absorbs logarithmic
    factors.  For experiment results the standard error comes from
    resampling replicas within each n; for plain pairs it is the OLS one.
    """
    if isinstance(result, ExperimentResult):
        n = np.asarray(result.n_grid, dtype=float)
        fn = _mean if statistic == "mean" else _norm(2.0 if statistic == "l2" else float(statistic))
        m = np.array([fn(result.raw[k]) for k in result.n_grid])
    else:
        n, m = (np.asarray(a, dtype=float) for a in result)
        fn = None
    if n.size < 4:
        raise ValueError("need at least 4 grid points")
    coef, resid, r2, X = _fit(n, m, log_correction)
    dof = n.size - X.shape[1]
    if fn is not None and resamples > 0:
        rng = stream("regress", result.plan_hash, str(statistic), log_correction)
        slopes = np.empty(resamples)
        for b in range(resamples):
            mb = np.array([fn(v[rng.integers(0, v.size, v.size)]) for v in (result.raw[k] for k in result.n_grid)])
            slopes[b] = _fit(n, mb, log_correction)[0][1]
        stderr = float(np.std(slopes, ddof=1))
    elif dof > 0:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(X.T @ X)
        stderr = float(math.sqrt(max(cov[1, 1], 0.0)))
    else:
        stderr = 0.0
    out = {"slope": float(coef[1]), "stderr": stderr, "r2": float(r2)}
    if log_correction == "fit":
        out["log_coefficient"] = float(coef[2])
    return out


# ---------------------------------------------------------------------------
# covariance kernel and limit law


def covariance_kernel(process: Optional[ProcessSpec], grid, lag_cutoff: int, N: int,
                      series: Optional[np.ndarray] = None) -> np.ndarray:
    """Lag-windowed estimate of sum_{|k|<=L} Cov(1{X_0<=t}, 1{X_k<=s}).

    Built from one trajectory of length N (simulated from ``process`` unless
    ``series`` is given).  Joint exceedance frequencies come from a 2-d
    histogram of grid-cell codes, so each lag costs O(N + G^2).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    if lag_cutoff < 0 or lag_cutoff >= N / 10:
        raise ValueError("lag cutoff must satisfy 0 <= L < N/10")
    if series is None:
        series = simulate_series(process, N, rng=stream("kernel", process.spec_hash(), N))
    x = np.asarray(series, dtype=float)[:N]
    G = grid.size
    code = np.searchsorted(grid, x, side="left")  # X <= t_j  <=>  code <= j

    def joint(a, b):
        # P(A <= t_j, B <= t_l) for all j, l
        hist = np.bincount(a * (G + 1) + b, minlength=(G + 1) ** 2).reshape(G + 1, G + 1)
        c = np.cumsum(np.cumsum(hist, axis=0), axis=1)
        return c[:G, :G] / a.size

    def marg(a):
        return np.cumsum(np.bincount(a, minlength=G + 1))[:G] / a.size

    K = np.zeros((G, G))
    for k in range(lag_cutoff + 1):
        a, b = code[:code.size - k], code[k:]
        C = joint(a, b) - np.outer(marg(a), marg(b))
        K += C if k == 0 else C + C.T
    return 0.5 * (K + K.T)


def bridge_kernel(grid) -> np.ndarray:
    """min(t, s) - t s on a grid inside [0, 1]."""
    t = np.asarray(grid, dtype=float)
    return np.minimum.outer(t, t) - np.outer(t, t)


def factor_kernel(kernel) -> tuple:
    """(A, clipped) with A A^T the kernel after clipping negative eigenvalues.

    ``clipped`` is the clipped mass relative to the trace; above 5 % the
    kernel is rejected as too noisy.
    """
    Kmat = np.asarray(kernel, dtype=float)
    Kmat = 0.5 * (Kmat + Kmat.T)
    w, V = np.linalg.eigh(Kmat)
    trace = float(np.sum(np.abs(w)))
    neg = float(-np.sum(w[w < 0]))
    clipped = neg / trace if trace > 0 else 0.0
    if clipped > 0.05:
        raise KernelTooNoisy(f"kernel too noisy: clipping removes {clipped:.1%} of the trace")
    return V * np.sqrt(np.clip(w, 0.0, None)), clipped


def simulate_limit_law(kernel, widths, replicas: int, seed: int = 0) -> np.ndarray:
    """Samples of sum_i |G(t_i)| w_i for a centered Gaussian G with the kernel."""
    A, _ = factor_kernel(kernel)
    widths = np.asarray(widths, dtype=float)
    if widths.shape != (A.shape[0],):
        raise ValueError("need one cell width per grid point")
    rng = stream("limit", seed, A.shape[0], replicas)
    out = np.empty(replicas)
    step = 4096
    for s in range(0, replicas, step):
        z = rng.standard_normal((min(step, replicas - s), A.shape[1]))
        out[s:s + z.shape[0]] = np.abs(z @ A.T) @ widths
    return out


def ks_distance(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    return float(stats.ks_2samp(a, b).statistic)


def tail_exponent(samples, x_grid=None, min_exceed: int = 50) -> dict:
    """Slope of log P(W >= x) against log x over the upper decade of the grid.

    The default grid runs geometrically from the 90 % sample quantile (the
    top tenth of the sample is the tail region) to the largest x that still
    has ``min_exceed`` exceedances.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size < 1000:
        raise ValueError("need at least 1000 samples")
    if x_grid is None:
        top = s[-min_exceed]
        low = s[int(0.9 * s.size)]
        if top <= 0 or low <= 0 or top <= low:
            raise ValueError("too few exceedances: no spread in the upper tail")
        x_grid = np.geomspace(low, top, 12)
    x = np.asarray(x_grid, dtype=float)
    x = x[x >= x.max() / 10.0]
    counts = s.size - np.searchsorted(s, x, side="left")
    surv = counts / s.size
    if counts[-1] < min_exceed:
        raise ValueError(f"too few exceedances ({int(counts[-1])} < {min_exceed}) at the largest x")
    X = np.column_stack((np.ones_like(x), np.log(x)))
    y = np.log(surv)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(x.size - 2, 1)
    cov = float(resid @ resid) / dof * np.linalg.inv(X.T @ X)
    return {"slope": float(coef[1]), "stderr": float(math.sqrt(max(cov[1, 1], 0.0))), "points": int(x.size)}
