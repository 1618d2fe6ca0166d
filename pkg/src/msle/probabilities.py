"""Connection probabilities of GFF level lines and related boundary data."""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import combinatorics as cb
from .combinatorics import LinkPattern
from .errors import CancellationError, InvalidPatternError
from .partition_functions import (
    CANCELLATION_THRESHOLD,
    Configuration,
    _block_data,
    _log_gaps,
    _signed_logsum,
    as_config,
    log_conformal_block,
    log_gff_symmetric,
)

LAMBDA = math.pi / 2.0


@dataclass(frozen=True)
class ConnectionDistribution:
    n: int
    config: tuple[float, ...]
    probs: dict[LinkPattern, float]

    def sorted_by_probability(self) -> list[tuple[LinkPattern, float]]:
        idx = cb.pattern_index(self.n)
        return sorted(self.probs.items(), key=lambda kv: (-kv[1], idx[kv[0]]))

    def to_json(self) -> dict:
        return {str(p): v for p, v in self.sorted_by_probability()}


def connection_distribution(x: Configuration) -> ConnectionDistribution:
    """P_alpha = Z_alpha / Z_GFF for every link pattern alpha."""
    x = as_config(x)
    n = x.size // 2
    ps, iu, thetas, inv = _block_data(n)
    logs = thetas @ _log_gaps(x, iu)
    log_total = log_gff_symmetric(x)
    probs = {}
    for row, p in zip(inv, ps):
        s, top, ratio = _signed_logsum(row, logs)
        if s <= 0 or ratio < CANCELLATION_THRESHOLD:
            raise CancellationError(f"Z_{p} lost precision: ratio {ratio:.3g}")
        probs[p] = math.exp(top + math.log(s) - log_total)
    return ConnectionDistribution(n, tuple(float(v) for v in x), probs)


def _check_indices(m: int, a: int, b: int):
    if not (1 <= a <= m and 1 <= b <= m):
        raise IndexError(f"indices must lie in 1..{m}")
    if a % 2 != 1 or b % 2 != 0:
        raise InvalidPatternError("the level line runs from an odd index a to an even index b")


def log_marginal_probability(x: Configuration, a: int, b: int) -> float:
    x = as_config(x)
    _check_indices(x.size, a, b)
    total = 0.0
    for j in range(1, x.size + 1):
        if j in (a, b):
            continue
        xa, xb, xj = x[a - 1], x[b - 1], x[j - 1]
        total += (-1) ** j * (math.log(abs(xj - xa)) - math.log(abs(xj - xb)))
    return total


def marginal_probability(x: Configuration, a: int, b: int) -> float:
    """Probability that the level line started at x_a ends at x_b."""
    return math.exp(log_marginal_probability(x, a, b))


def marginal_weighting_function(x: Configuration, a: int, b: int) -> float:
    """Z_GFF times the marginal probability; equals the sum of Z_alpha over alpha containing {a, b}."""
    return math.exp(log_gff_symmetric(x) + log_marginal_probability(x, a, b))


def balanced_subset_probability(p: LinkPattern, x: Configuration) -> float:
    return math.exp(log_conformal_block(p, x) - log_gff_symmetric(x))


@dataclass(frozen=True)
class BoundaryData:
    n: int
    values: tuple[float, ...]   # boundary value on each of the 2N+1 intervals
    heights: tuple[float, ...]  # jump heights at x_1..x_{2N}


def conformal_block_boundary(p: LinkPattern) -> BoundaryData:
    h = cb.to_dyck(p).heights
    values = tuple(LAMBDA * (2 * hk - 1) for hk in h)
    heights = tuple(LAMBDA * (h[k - 1] + h[k] - 1) for k in range(1, len(h)))
    return BoundaryData(p.n, values, heights)

