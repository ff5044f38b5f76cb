"""Trajectories of intermittent interval maps and baseline processes."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit
from scipy import special

from ._rng import stream
from .distributions import Observable, ReferenceLaw, TabulatedLaw

logger = logging.getLogger(__name__)

MAX_RESTARTS = 64


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise ValueError("map argument must lie in [0, 1]")
    return x


@dataclass(frozen=True)
class LsvMap:
    """x(1 + 2^g x^g) on [0, 1/2), 2x - 1 on [1/2, 1]."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("LSV map needs 0 < gamma < 1")

    def __call__(self, x):
        return lsv_step(x, self.gamma)

    def as_gpm(self) -> "GpmMap":
        return GpmMap.lsv(self.gamma)

    @property
    def breakpoints(self):
        return np.array([0.0, 0.5, 1.0])

    @property
    def branches(self):
        return self.as_gpm().branches


def lsv_step(x, gamma: float):
    x = _check_unit(x)
    c = 2.0 ** gamma
    out = np.where(x < 0.5, x * (1.0 + c * x ** gamma), 2.0 * x - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GpmMap:
    """Piecewise monotone map with branches on [y_k, y_{k+1}).

    ``branches`` are vectorized callables; each must be monotone on its
    interval and map it into [0, 1].  ``gamma`` is the exponent of the
    neutral branch at 0 (only used for graded meshes).
    """

    breakpoints: tuple
    branches: tuple = field(compare=False)
    gamma: float = 0.0
    name: str = "gpm"

    def __post_init__(self):
        y = np.asarray(self.breakpoints, dtype=float)
        if y.ndim != 1 or y.size < 2 or y[0] != 0.0 or y[-1] != 1.0 or np.any(np.diff(y) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if len(self.branches) != y.size - 1:
            raise ValueError("need one branch per interval")
        object.__setattr__(self, "breakpoints", tuple(float(v) for v in y))
        object.__setattr__(self, "branches", tuple(self.branches))

    @classmethod
    def lsv(cls, gamma: float) -> "GpmMap":
        if not 0.0 < gamma < 1.0:
            raise ValueError("LSV map needs 0 < gamma < 1")
        c = 2.0 ** gamma
        return cls((0.0, 0.5, 1.0),
                   (lambda x: x * (1.0 + c * x ** gamma), lambda x: 2.0 * x - 1.0),
                   gamma=gamma, name=f"lsv({gamma!r})")

    @classmethod
    def doubling(cls) -> "GpmMap":
        return cls((0.0, 0.5, 1.0), (lambda x: 2.0 * x, lambda x: 2.0 * x - 1.0), name="doubling")

    def branch_index(self, x):
        y = np.asarray(self.breakpoints)
        return np.clip(np.searchsorted(y, x, side="right") - 1, 0, y.size - 2)

    def __call__(self, x):
        return gpm_step(self, x)


def gpm_step(m: GpmMap, x):
    x = _check_unit(x)
    idx = m.branch_index(x)
    out = np.empty(x.shape)
    for k, f in enumerate(m.branches):
        sel = idx == k
        if np.any(sel):
            out[sel] = f(x[sel])
    return float(out) if out.ndim == 0 else out


@njit(cache=True)
def _lsv_orbit(x, gamma, burn, out, stop_on_fixed):
    c = 2.0 ** gamma
    n = out.shape[0]
    for k in range(burn + n):
        if x < 0.5:
            x = x * (1.0 + c * x ** gamma)
        else:
            x = 2.0 * x - 1.0
        if k >= burn:
            out[k - burn] = x
        if stop_on_fixed and (x == 0.0 or x == 1.0):
            return k
    return -1


def _gpm_orbit(m: GpmMap, x, burn, out, stop_on_fixed):
    n = out.shape[0]
    for k in range(burn + n):
        i = int(m.branch_index(x))
        x = float(min(max(m.branches[i](x), 0.0), 1.0))
        if k >= burn:
            out[k - burn] = x
        if stop_on_fixed and x == 0.0:
            return k
    return -1


@dataclass(frozen=True)
class ProcessSpec:
    """What to simulate.

    kind: ``lsv`` (needs gamma), ``gpm`` (needs gpm_map), ``iid`` (needs law)
    or ``mdep`` (moving mean of m + 1 iid uniforms).  Map kinds emit
    ``observable(theta^k x)``; ``x0`` forces the start point.
    """

    kind: str
    gamma: float = 0.0
    observable: Observable = Observable("identity")
    law: Optional[ReferenceLaw] = None
    m: int = 0
    burn_in: int = 10_000
    seed: int = 0
    x0: Optional[float] = None
    gpm_map: Optional[GpmMap] = None

    def __post_init__(self):
        if self.kind not in ("lsv", "gpm", "iid", "mdep"):
            raise ValueError(f"unknown process kind {self.kind!r}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.kind == "lsv" and not 0.0 < self.gamma < 1.0:
            raise ValueError("lsv process needs 0 < gamma < 1")
        if self.kind == "gpm" and self.gpm_map is None:
            raise ValueError("gpm process needs gpm_map")
        if self.kind == "iid" and self.law is None:
            raise ValueError("iid process needs a law")
        if self.kind == "mdep" and self.m < 0:
            raise ValueError("m-dependent process needs m >= 0")
        if self.x0 is not None and not 0.0 <= self.x0 <= 1.0:
            raise ValueError("x0 must lie in [0, 1]")

    def with_seed(self, seed: int) -> "ProcessSpec":
        return dataclasses.replace(self, seed=seed)

    def describe(self) -> dict:
        d = {"kind": self.kind, "burn_in": self.burn_in, "seed": self.seed}
        if self.kind in ("lsv", "gpm"):
            d["gamma"] = self.gamma if self.kind == "lsv" else self.gpm_map.gamma
            d["observable"] = repr(self.observable) if self.observable.kind == "custom" else self.observable.to_dict()
            if self.x0 is not None:
                d["x0"] = self.x0
            if self.kind == "gpm":
                d["map"] = self.gpm_map.name
        if self.kind == "iid":
            d["law"] = repr(self.law)
        if self.kind == "mdep":
            d["m"] = self.m
        return d

    def spec_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class SimulationLog:
    restarts: int = 0


def simulate_series(spec: ProcessSpec, n: int, rng: Optional[np.random.Generator] = None,
                    log: Optional[SimulationLog] = None) -> np.ndarray:
    """n observations of the process; deterministic given (spec, n) when rng is None.

    Map kinds start from a uniform point (or ``x0``), discard ``burn_in``
    iterates and emit the next n.  A random start whose orbit lands exactly
    on a fixed point through rounding is restarted from a fresh stream.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = stream("series", spec.seed, n)
    if spec.kind == "iid":
        return np.asarray(spec.law.ppf(rng.random(n)), dtype=float)
    if spec.kind == "mdep":
        u = rng.random(n + spec.m)
        return np.convolve(u, np.full(spec.m + 1, 1.0 / (spec.m + 1)), mode="valid")

    out = np.empty(n)
    forced = spec.x0 is not None
    for attempt in range(MAX_RESTARTS):
        if forced:
            x = float(spec.x0)
        else:
            g = rng if attempt == 0 else stream("restart", spec.seed, n, attempt)
            x = float(g.random())
            while x == 0.0:
                x = float(g.random())
        if spec.kind == "lsv":
            hit = _lsv_orbit(x, float(spec.gamma), int(spec.burn_in), out, not forced)
        else:
            hit = _gpm_orbit(spec.gpm_map, x, int(spec.burn_in), out, not forced)
        if hit < 0:
            break
        logger.info("orbit hit a fixed point at step %d; restarting (attempt %d)", hit, attempt + 1)
        if log is not None:
            log.restarts += 1
    else:
        raise RuntimeError(f"orbit collapsed onto a fixed point {MAX_RESTARTS} times")
    if spec.observable.kind == "identity":
        return out
    with np.errstate(divide="ignore"):
        return np.asarray(spec.observable(out), dtype=float)


def bates_law(k: int, knots: int = 4097) -> TabulatedLaw:
    """Law of the mean of k iid uniforms, tabulated from its exact CDF."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return TabulatedLaw([0.0, 1.0], [0.0, 1.0])
    t = np.linspace(0.0, 1.0, knots)
    s = k * t
    F = np.zeros_like(t)
    for j in range(k + 1):
        F += np.where(s > j, (-1.0) ** j * special.comb(k, j) * np.clip(s - j, 0, None) ** k, 0.0)
    F = np.clip(F / math.factorial(k), 0.0, 1.0)
    F[0], F[-1] = 0.0, 1.0
    return TabulatedLaw(t, np.maximum.accumulate(F))


def export_trajectory(path, series: Sequence[float], spec: ProcessSpec) -> None:
    with open(path, "w") as fh:
        fh.write(f"# spec_hash={spec.spec_hash()}\n")
        fh.write("x\n")
        for v in np.asarray(series, dtype=float):
            fh.write(f"{float(v)!r}\n")


def load_trajectory(path) -> tuple:
    spec_hash = None
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# spec_hash="):
                spec_hash = line.split("=", 1)[1]
            elif line and line != "x" and not line.startswith("#"):
                values.append(float(line))
    return spec_hash, np.array(values)
