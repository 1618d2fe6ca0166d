"""Numerical checks of the defining properties of partition functions.

The verifiers only call the function under test as a black box, so they stay
independent of how the closed forms are evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import combinatorics as cb
from . import partition_functions as pf
from .combinatorics import LinkPattern
from .errors import ConfigurationError, ConvergenceError
from .partition_functions import SleParams, as_config
from .probabilities import marginal_weighting_function

Field = Callable[[np.ndarray], float]

ASY_LEVELS = (5, 6, 7, 8, 9, 10)
DECAY_EPS = tuple(2.0 ** -k for k in range(4, 13))


def random_configuration(rng: np.random.Generator, n: int, low: float = 0.5, high: float = 2.0,
                         start: float | None = None) -> np.ndarray:
    """2n increasing points with consecutive gaps drawn uniformly from [low, high]."""
    gaps = rng.uniform(low, high, 2 * n)
    x0 = rng.uniform(-2.0, 2.0) if start is None else start
    return x0 + np.cumsum(gaps) - gaps[0]


# -- PDE ------------------------------------------------------------------

@dataclass(frozen=True)
class PdeResidualReport:
    i: int
    step: float
    residual: float
    scale: float

    @property
    def relative(self) -> float:
        return abs(self.residual) / self.scale if self.scale > 0 else abs(self.residual)


def pde_residual(f: Field, params: SleParams, x: Sequence[float], i: int, step: float) -> PdeResidualReport:
    """Finite-difference residual of the i-th second-order equation at x.

    The scale is the sum of the absolute values of the individual terms, so
    the relative residual measures how far the terms are from cancelling.
    """
    x = as_config(x)
    m = x.size
    if not 1 <= i <= m:
        raise IndexError(f"equation index {i} out of range")
    if np.min(np.diff(x)) <= 4.0 * step:
        raise ConfigurationError(f"points closer than 4*step = {4 * step}")
    k, h = params.kappa, params.h
    i0 = i - 1

    def at(j, s):
        y = x.copy()
        y[j] += s
        return f(y)

    f0 = f(x)
    d2 = (at(i0, step) - 2.0 * f0 + at(i0, -step)) / step ** 2
    terms = [0.5 * k * d2]
    for j in range(m):
        if j == i0:
            continue
        dx = x[j] - x[i0]
        dj = (at(j, step) - at(j, -step)) / (2.0 * step)
        terms.append(2.0 / dx * dj)
        terms.append(-2.0 * h / dx ** 2 * f0)
    terms = np.array(terms)
    return PdeResidualReport(i, step, float(terms.sum()), float(np.abs(terms).sum()))


def pde_observed_order(f: Field, params: SleParams, x: Sequence[float], i: int,
                       step: float) -> tuple[PdeResidualReport, PdeResidualReport, float]:
    """Residual reports at step and step/2 and the implied convergence order."""
    r1 = pde_residual(f, params, x, i, step)
    r2 = pde_residual(f, params, x, i, step / 2.0)
    order = math.log2(r1.relative / r2.relative) if r2.relative > 0 else math.inf
    return r1, r2, order


# -- Moebius covariance ---------------------------------------------------

@dataclass(frozen=True)
class MobiusMap:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if abs(self.a * self.d - self.b * self.c - 1.0) > 1e-9:
            raise ValueError("Moebius map must have ad - bc = 1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (self.a * x + self.b) / (self.c * x + self.d)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 / (self.c * x + self.d) ** 2

    def preserves_order(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        den = self.c * x + self.d
        if np.any(den == 0) or not (np.all(den > 0) or np.all(den < 0)):
            return False
        y = self(x)
        return bool(np.all(np.isfinite(y)) and np.all(np.diff(y) > 0))


IDENTITY = MobiusMap(1.0, 0.0, 0.0, 1.0)


def affine_map(scale: float, shift: float) -> MobiusMap:
    r = math.sqrt(scale)
    return MobiusMap(r, shift / r, 0.0, 1.0 / r)


def random_mobius(rng: np.random.Generator, x: Sequence[float], affine: bool = False) -> MobiusMap:
    """A random map with positive derivative whose pole (if any) lies outside [x_1, x_2N]."""
    x = np.asarray(x, dtype=float)
    span = float(x[-1] - x[0])
    while True:
        if affine:
            m = affine_map(math.exp(rng.uniform(-1.5, 1.5)), rng.uniform(-3.0, 3.0))
        else:
            gap = span * rng.uniform(0.2, 3.0)
            pole = x[0] - gap if rng.random() < 0.5 else x[-1] + gap
            c = rng.choice([-1.0, 1.0]) * math.exp(rng.uniform(-1.0, 1.0)) / span
            d = -c * pole
            a = rng.normal() / span
            b = (a * d - 1.0) / c
            m = MobiusMap(a, b, c, d)
        if m.preserves_order(x):
            return m


def covariance_check(f: Field, params: SleParams, x: Sequence[float], m: MobiusMap) -> float:
    x = as_config(x)
    if not m.preserves_order(x):
        raise ConfigurationError("map does not preserve the order of the points")
    lhs = f(x)
    rhs = float(np.prod(m.derivative(x) ** params.h)) * f(m(x))
    return abs(lhs - rhs) / abs(lhs)


# -- asymptotics ----------------------------------------------------------

@dataclass(frozen=True)
class AsyResult:
    value: float
    converged: bool
    eps: tuple[float, ...]
    samples: tuple[float, ...]
    estimates: tuple[float, ...]


def _insert_pair(y: np.ndarray, j: int, xi: float, eps: float) -> np.ndarray:
    return np.concatenate([y[:j - 1], [xi - eps / 2.0, xi + eps / 2.0], y[j - 1:]])


def _room(y: np.ndarray, j: int, xi: float) -> float:
    left = y[j - 2] if j >= 2 else -math.inf
    right = y[j - 1] if j - 1 < y.size else math.inf
    if not left < xi < right:
        raise ConfigurationError(f"xi={xi} is not strictly between its neighbours")
    room = min(xi - left, right - xi)
    return 1.0 if math.isinf(room) else room


def asy_limit(f: Field, params: SleParams, x_rest: Sequence[float], j: int, xi: float,
              levels: Sequence[int] = ASY_LEVELS, rtol: float = 1e-5,
              atol: float = 1e-9) -> AsyResult:
    """Limit of eps^{2h} f as x_j, x_{j+1} merge at xi, other points fixed.

    The pair is placed at xi -/+ eps/2 for eps = room * 2^-k, k in levels, and
    the values are Richardson-extrapolated assuming an O(eps) leading error.
    """
    y = np.asarray(x_rest, dtype=float)
    if not 1 <= j <= y.size + 1:
        raise IndexError(f"pair index {j} out of range")
    room = _room(y, j, xi)
    two_h = 2.0 * params.h
    eps = tuple(room * 2.0 ** -k for k in levels)
    samples = tuple(e ** two_h * f(_insert_pair(y, j, xi, e)) for e in eps)
    ests = []
    for k in range(1, len(eps)):
        r = eps[k - 1] / eps[k]
        ests.append((r * samples[k] - samples[k - 1]) / (r - 1.0))
    scale = max(abs(s) for s in samples)
    converged = abs(ests[-1] - ests[-2]) <= rtol * scale + atol
    return AsyResult(ests[-1], converged, eps, samples, tuple(ests))


def dual_functional(p: LinkPattern, f: Field, params: SleParams, strict: bool = True,
                    levels: Sequence[int] = ASY_LEVELS) -> float:
    """Apply the pair limits of p to f along the innermost-first ordering.

    Each collapse point is the midpoint of the gap it must sit in. Raises
    ConvergenceError if any ladder fails its Cauchy check and strict is set.
    """
    js = cb.removal_indices(p, cb.allowable_ordering(p))

    def level(k: int) -> Field:
        if k == 0:
            return f
        inner = level(k - 1)
        j = js[k - 1]

        def g(y):
            res = asy_limit(inner, params, y, j, _midpoint(y, j), levels=levels)
            if strict and not res.converged:
                raise ConvergenceError(f"pair limit at j={j} did not settle: {res.estimates}")
            return res.value

        return g

    return level(len(js))(np.empty(0))


def _midpoint(y: np.ndarray, j: int) -> float:
    left = y[j - 2] if j >= 2 else None
    right = y[j - 1] if j - 1 < y.size else None
    if left is not None and right is not None:
        return 0.5 * (left + right)
    if left is not None:
        return left + 1.0
    if right is not None:
        return right - 1.0
    return 0.0


# -- decay exponents ------------------------------------------------------

def decay_configuration(n: int, eps: float, mode: str) -> np.ndarray:
    first = eps * np.arange(1, n + 1)
    if mode == "one_end":
        second = np.arange(1, n + 1, dtype=float)
    elif mode == "both_ends":
        second = 1.0 + eps * np.arange(1, n + 1)
    else:
        raise ValueError("mode must be 'one_end' or 'both_ends'")
    return np.concatenate([first, second])


def decay_target(family: str, n: int, mode: str) -> float:
    factor = 2.0 if mode == "both_ends" else 1.0
    if family == "rainbow_Z":
        return factor * n * (n - 1) / 4.0
    if family == "gff_Z":
        return -factor * (n if n % 2 == 0 else n - 1) / 4.0
    raise ValueError("family must be 'rainbow_Z' or 'gff_Z'")


def decay_slope(family: str, n: int, mode: str, eps: Sequence[float] = DECAY_EPS,
                corrections: int = 2) -> float:
    """Least-squares slope of log f against log eps.

    The fit carries nuisance columns eps, eps^2, ... (``corrections`` of them)
    that absorb the analytic corrections to the leading power law.
    """
    if family == "rainbow_Z":
        p = cb.rainbow(n)

        def logf(x):
            return pf.log_conformal_block(p, x)
    elif family == "gff_Z":
        logf = pf.log_gff_symmetric
    else:
        raise ValueError("family must be 'rainbow_Z' or 'gff_Z'")
    e = np.asarray(eps, dtype=float)
    y = np.array([logf(decay_configuration(n, v, mode)) for v in e])
    cols = [np.log(e), np.ones_like(e)] + [e ** k for k in range(1, corrections + 1)]
    coef, *_ = np.linalg.lstsq(np.stack(cols, axis=1), y, rcond=None)
    return float(coef[0])


# -- function families ----------------------------------------------------

@dataclass(frozen=True)
class Family:
    name: str
    params: SleParams
    f: Field


def families(n: int, include: Sequence[str] = ("Z", "U", "GFF", "Ising", "LERW", "F")) -> list[Family]:
    """The partition-function families checked at size n."""
    k4, k3, k2 = SleParams(4.0), SleParams(3.0), SleParams(2.0)
    out: list[Family] = []
    ps = cb.enumerate_link_patterns(n)
    if "Z" in include:
        out += [Family(f"Z[{p}]", k4, lambda x, p=p: pf.pure_partition_k4(p, x)) for p in ps]
    if "U" in include:
        out += [Family(f"U[{p}]", k4, lambda x, p=p: pf.conformal_block(p, x)) for p in ps]
    if "GFF" in include:
        out.append(Family("Z_GFF", k4, pf.gff_symmetric))
    if "Ising" in include:
        out.append(Family("Z_Ising", k3, pf.ising_symmetric))
    if "LERW" in include:
        out.append(Family("Z_LERW", k2, pf.lerw_symmetric))
    if "F" in include:
        for a in range(1, 2 * n + 1, 2):
            for b in range(2, 2 * n + 1, 2):
                out.append(Family(f"F[{a},{b}]", k4,
                                  lambda x, a=a, b=b: marginal_weighting_function(x, a, b)))
    if "N2" in include and n == 2:
        for kappa in (2.5, 16.0 / 3.0, 6.0):
            for p in ps:
                out.append(Family(f"Z[{p}]@kappa={kappa:.4g}", SleParams(kappa),
                                  lambda x, p=p, kappa=kappa: pf.pure_partition_n2(p, kappa, x)))
    return out
