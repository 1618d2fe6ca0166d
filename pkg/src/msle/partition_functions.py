"""Closed-form partition functions on the upper half-plane.

Products over pairs of marked points are assembled as sums of logarithms of
positive differences, so large N does not overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from . import combinatorics as cb
from .combinatorics import LinkPattern
from .errors import CancellationError, CapacityError, ConfigurationError, InvalidPatternError
from .hypergeometric import hyp2f1, hyp2f1_at_one

CANCELLATION_THRESHOLD = 1e-12
PAIRING_MAX_N = 6

Configuration = Sequence[float]


@dataclass(frozen=True)
class SleParams:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def h(self) -> float:
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def c(self) -> float:
        return (3.0 * self.kappa - 8.0) * (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def lam(self) -> float:
        return math.pi / 2.0


def as_config(x: Configuration, n: int | None = None) -> np.ndarray:
    """Validate marked points: finite, strictly increasing, 2n of them."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size % 2:
        raise ConfigurationError(f"expected an even number of points, got shape {arr.shape}")
    if n is not None and arr.size != 2 * n:
        raise ConfigurationError(f"expected {2 * n} points, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("points must be finite")
    if np.any(np.diff(arr) <= 0):
        raise ConfigurationError("points must be strictly increasing")
    return arr


# -- conformal blocks -----------------------------------------------------

@lru_cache(maxsize=None)
def theta_table(p: LinkPattern) -> np.ndarray:
    """+1 where i and j are both openers or both closers, -1 otherwise, 0 on the diagonal."""
    m = 2 * p.n
    op = np.array([i in p.openers for i in range(1, m + 1)])
    t = np.where(op[:, None] == op[None, :], 1, -1).astype(np.int8)
    np.fill_diagonal(t, 0)
    t.flags.writeable = False
    return t


@lru_cache(maxsize=None)
def _block_data(n: int):
    ps = cb.enumerate_link_patterns(n, max_n=cb.DEFAULT_MAX_N)
    iu = np.triu_indices(2 * n, 1)
    thetas = np.array([theta_table(p)[iu] for p in ps], dtype=float) * 0.5
    inv = np.array(cb.inverse_matrix(n).entries, dtype=float)
    return ps, iu, thetas, inv


def _log_gaps(x: np.ndarray, iu) -> np.ndarray:
    return np.log(x[iu[1]] - x[iu[0]])


def log_conformal_blocks(x: Configuration) -> np.ndarray:
    """log U_beta for every pattern beta, in canonical order."""
    x = as_config(x)
    n = x.size // 2
    _, iu, thetas, _ = _block_data(n)
    return thetas @ _log_gaps(x, iu)


def log_conformal_block(p: LinkPattern, x: Configuration) -> float:
    x = as_config(x, p.n)
    iu = np.triu_indices(2 * p.n, 1)
    return 0.5 * float(theta_table(p)[iu] @ _log_gaps(x, iu))


def conformal_block(p: LinkPattern, x: Configuration) -> float:
    return math.exp(log_conformal_block(p, x))


# -- pure partition functions at kappa = 4 --------------------------------

@dataclass(frozen=True)
class ZResult:
    value: float
    log_value: float
    cancellation_ratio: float

    def to_json(self) -> dict:
        return {"value": self.value, "log_value": self.log_value,
                "cancellation_ratio": self.cancellation_ratio}


def _signed_logsum(coef: np.ndarray, logs: np.ndarray) -> tuple[float, float, float]:
    mask = coef != 0
    c, l = coef[mask], logs[mask]
    top = l.max()
    terms = c * np.exp(l - top)
    s = float(terms.sum())
    ratio = abs(s) / float(np.abs(terms).max())
    return s, top, ratio


def pure_partition_k4_detail(p: LinkPattern, x: Configuration,
                             threshold: float = CANCELLATION_THRESHOLD) -> ZResult:
    """Z_alpha at kappa = 4 as the signed sum of conformal blocks, with diagnostics.

    Raises CancellationError if the result is below threshold times the largest
    summand, or is not positive.
    """
    x = as_config(x, p.n)
    ps, iu, thetas, inv = _block_data(p.n)
    logs = thetas @ _log_gaps(x, iu)
    s, top, ratio = _signed_logsum(inv[cb.pattern_index(p.n)[p]], logs)
    if s <= 0 or ratio < threshold:
        raise CancellationError(f"Z_{p} lost precision: ratio {ratio:.3g}, sum {s:.3g}")
    log_value = top + math.log(s)
    return ZResult(math.exp(log_value), log_value, ratio)


def pure_partition_k4(p: LinkPattern, x: Configuration) -> float:
    return pure_partition_k4_detail(p, x).value


def all_pure_partitions_k4(x: Configuration) -> dict[LinkPattern, float]:
    """Z_alpha for every alpha of the right size, in canonical order."""
    x = as_config(x)
    ps, iu, thetas, inv = _block_data(x.size // 2)
    logs = thetas @ _log_gaps(x, iu)
    out = {}
    for row, p in zip(inv, ps):
        s, top, ratio = _signed_logsum(row, logs)
        if s <= 0 or ratio < CANCELLATION_THRESHOLD:
            raise CancellationError(f"Z_{p} lost precision: ratio {ratio:.3g}")
        out[p] = math.exp(top + math.log(s))
    return out


def grad_log_pure_partition_k4(p: LinkPattern, x: Configuration, a: int) -> float:
    """d/dx_a log Z_alpha, from dU_beta/dx_a = U_beta sum_j theta(a,j) / (2 (x_a - x_j))."""
    x = as_config(x, p.n)
    if not 1 <= a <= x.size:
        raise IndexError(f"index {a} out of range")
    ps, iu, thetas, inv = _block_data(p.n)
    logs = thetas @ _log_gaps(x, iu)
    coef = inv[cb.pattern_index(p.n)[p]]
    idx = np.flatnonzero(coef)
    i = a - 1
    d = x[i] - x
    d[i] = 1.0
    grads = np.array([np.sum(theta_table(ps[k])[i] / (2.0 * d)) for k in idx])
    top = logs[idx].max()
    w = coef[idx] * np.exp(logs[idx] - top)
    return float(w @ grads / w.sum())


# -- symmetric partition functions ----------------------------------------

def log_gff_symmetric(x: Configuration) -> float:
    x = as_config(x)
    m = x.size
    iu = np.triu_indices(m, 1)
    expo = 0.5 * (-1.0) ** (iu[1] - iu[0])
    return float(expo @ _log_gaps(x, iu))


def gff_symmetric(x: Configuration) -> float:
    """Sum of all kappa = 4 pure partition functions, as a product formula."""
    return math.exp(log_gff_symmetric(x))


def pfaffian(a: np.ndarray) -> float:
    """Pfaffian of a real skew-symmetric matrix by Parlett-Reid elimination with pivoting."""
    a = np.array(a, dtype=float)
    m = a.shape[0]
    if a.shape != (m, m):
        raise ValueError("matrix must be square")
    if m % 2:
        return 0.0
    pf = 1.0
    for k in range(0, m - 1, 2):
        kp = k + 1 + int(np.abs(a[k + 1:, k]).argmax())
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            pf = -pf
        piv = a[k, k + 1]
        if piv == 0.0:
            return 0.0
        pf *= piv
        if k + 2 < m:
            tau = a[k, k + 2:] / piv
            col = a[k + 2:, k + 1].copy()
            a[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf


def ising_symmetric(x: Configuration) -> float:
    """Pfaffian of (1/(x_j - x_i))_{i,j}."""
    x = as_config(x)
    d = x[None, :] - x[:, None]
    np.fill_diagonal(d, 1.0)
    a = 1.0 / d
    np.fill_diagonal(a, 0.0)
    return pfaffian(a)


def _pairings(items: tuple[int, ...]):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for k, other in enumerate(rest):
        for tail in _pairings(rest[:k] + rest[k + 1:]):
            yield ((first, other),) + tail


def pairing_sign(pairs) -> int:
    """Sign of the product (a-c)(a-d)(b-c)(b-d) over all pairs of pairs."""
    s = 1
    for (a, b), (c, d) in combinations(pairs, 2):
        if (a - c) * (a - d) * (b - c) * (b - d) < 0:
            s = -s
    return s


@lru_cache(maxsize=None)
def all_pairings(n: int, max_n: int = PAIRING_MAX_N) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All (2n-1)!! pair partitions of {1..2n}, each pair as (a, b) with a < b."""
    if n > max_n:
        raise CapacityError(f"pair partitions of {2 * n} points exceed cap N <= {max_n}")
    return tuple(_pairings(tuple(range(1, 2 * n + 1))))


@lru_cache(maxsize=None)
def _lerw_data(n: int):
    prs = all_pairings(n)
    starts = np.array([[a - 1 for a, _ in pr] for pr in prs], dtype=np.intp)
    ends = np.array([[b - 1 for _, b in pr] for pr in prs], dtype=np.intp)
    signs = np.array([pairing_sign(pr) for pr in prs], dtype=float)
    return starts, ends, signs


def lerw_symmetric(x: Configuration, max_n: int = PAIRING_MAX_N) -> float:
    """Signed sum over pair partitions of det(1/(x_{b_j} - x_{a_i})^2)."""
    x = as_config(x)
    n = x.size // 2
    if n > max_n:
        raise CapacityError(f"N={n} exceeds brute-force cap {max_n}")
    if n == 0:
        return 1.0
    starts, ends, signs = _lerw_data(n)
    mats = 1.0 / (x[ends][:, None, :] - x[starts][:, :, None]) ** 2
    return float(signs @ np.linalg.det(mats))


def bound_function(p: LinkPattern, x: Configuration) -> float:
    x = as_config(x, p.n)
    return math.exp(-sum(math.log(x[b - 1] - x[a - 1]) for a, b in p.links))


def bound_total(x: Configuration, n: int | None = None) -> float:
    x = as_config(x, n)
    return math.exp(2.0 * log_gff_symmetric(x))


# -- general kappa, N <= 2 ------------------------------------------------

def pure_partition_n1(kappa: float, x: Configuration) -> float:
    x = as_config(x, 1)
    return float((x[1] - x[0]) ** (-2.0 * SleParams(kappa).h))


def _n2_hyp(kappa: float, z: float) -> float:
    a, b, c = 4.0 / kappa, 1.0 - 4.0 / kappa, 8.0 / kappa
    return hyp2f1(a, b, c, z) / hyp2f1_at_one(a, b, c)


def cross_ratio(x: Configuration) -> float:
    x1, x2, x3, x4 = as_config(x, 2)
    return (x2 - x1) * (x4 - x3) / ((x4 - x2) * (x3 - x1))


def pure_partition_n2(p: LinkPattern, kappa: float, x: Configuration) -> float:
    """Z_alpha for the two N = 2 patterns at any kappa in (0, 8), via 2F1."""
    if not 0.0 < kappa < 8.0:
        raise ValueError("kappa must lie in (0, 8)")
    x1, x2, x3, x4 = as_config(x, 2)
    two_h = 2.0 * SleParams(kappa).h
    z = (x2 - x1) * (x4 - x3) / ((x4 - x2) * (x3 - x1))
    if p == cb.rainbow(2):
        pre = ((x4 - x1) * (x3 - x2)) ** (-two_h)
        return pre * z ** (2.0 / kappa) * _n2_hyp(kappa, z)
    if p == cb.unnested(2):
        pre = ((x2 - x1) * (x4 - x3)) ** (-two_h)
        return pre * (1.0 - z) ** (2.0 / kappa) * _n2_hyp(kappa, 1.0 - z)
    raise InvalidPatternError(f"{p} is not an N=2 pattern")


def pure_partition(p: LinkPattern, kappa: float, x: Configuration) -> float:
    """Dispatch: any N at kappa = 4, and N <= 2 at other kappa in (0, 8)."""
    if kappa == 4.0:
        return pure_partition_k4(p, x)
    if p.n == 1:
        return pure_partition_n1(kappa, x)
    if p.n == 2:
        return pure_partition_n2(p, kappa, x)
    if p.n == 0:
        return 1.0
    raise CapacityError(f"no closed form for N={p.n} at kappa={kappa}")


def symmetric_partition(kappa: float, x: Configuration) -> float:
    if kappa == 4.0:
        return gff_symmetric(x)
    if kappa == 3.0:
        return ising_symmetric(x)
    if kappa == 2.0:
        return lerw_symmetric(x)
    raise ValueError("symmetric partition functions are available for kappa in {2, 3, 4}")
