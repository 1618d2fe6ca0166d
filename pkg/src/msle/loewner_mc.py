"""Monte Carlo simulation of Loewner chains for level lines and Z_alpha-driven curves.

The driving function is advanced by Euler-Maruyama while the force-point
images V_j follow the exact solution of dV = 2 dt / (V - W) with W frozen over
the step. Step sizes scale with the squared distance from W to the nearest
marked point, so the integration is scale invariant.

A sample stops when W reaches a cluster of marked points that is tight
relative to the next point out and whose summed force weight is at most -2,
i.e. the continuation threshold. For Z_alpha-driven chains the weights come
from the conformal block that dominates Z_alpha at the current state.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _mc_kernel_py
from . import combinatorics as cb
from .combinatorics import LinkPattern
from .errors import InvalidPatternError
from .partition_functions import as_config, theta_table
from .probabilities import marginal_probability

try:
    from . import _mc_kernel as _compiled
except ImportError:  # pragma: no cover - exercised only without a C toolchain
    _compiled = None

KERNELS = {"python": _mc_kernel_py}
if _compiled is not None:
    KERNELS["cython"] = _compiled

if os.environ.get("MSLE_PURE_PYTHON") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

DISCARD_REASONS = {
    _mc_kernel_py.UNDERFLOW: "step_underflow",
    _mc_kernel_py.MAX_STEPS: "max_steps",
    _mc_kernel_py.CROSSING: "crossing",
    _mc_kernel_py.DRIFT_FAILURE: "drift_failure",
}

STOP_RULES = {"cross_ratio": _mc_kernel_py.CROSS_RATIO, "absolute": _mc_kernel_py.ABSOLUTE}


@dataclass(frozen=True)
class McConfig:
    dt_base: float = 1e-3
    gap_exponent: float = 2.0
    delta_stop: float = 1e-3
    samples: int = 10_000
    seed: int = 0
    workers: int = 1
    max_steps: int = 5_000_000
    chunk: int = 512
    min_dt: float = 1e-250
    stop_rule: str = "cross_ratio"
    backend: str = "auto"
    # drop outer points of zero total weight once they are this many local
    # gaps away from W
    reduce_at: float = 1e15

    def __post_init__(self):
        if not (self.dt_base > 0 and self.delta_stop > 0):
            raise ValueError("dt_base and delta_stop must be positive")
        if self.samples < 0 or self.workers < 1:
            raise ValueError("samples must be >= 0 and workers >= 1")
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"stop_rule must be one of {sorted(STOP_RULES)}")
        if self.backend not in ("auto", *KERNELS):
            raise ValueError(f"unknown backend {self.backend!r}; available: {sorted(KERNELS)}")

    def kernel(self):
        return KERNELS[BACKEND if self.backend == "auto" else self.backend]


@dataclass(frozen=True)
class LoewnerState:
    t: float
    W: float
    V: tuple[float, ...]
    swallowed: tuple[bool, ...]


@dataclass(frozen=True)
class WilsonInterval:
    low: float
    high: float


def wilson_interval(k: int, n: int, z: float = 1.96) -> WilsonInterval:
    if n == 0:
        return WilsonInterval(0.0, 1.0)
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return WilsonInterval(max(0.0, mid - half), min(1.0, mid + half))


@dataclass(frozen=True)
class TerminalHistogram:
    counts: dict[int, int]
    discarded: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def attempted(self) -> int:
        return self.total + sum(self.discarded.values())

    @property
    def discard_fraction(self) -> float:
        return sum(self.discarded.values()) / self.attempted if self.attempted else 0.0

    def frequency(self, b: int) -> float:
        return self.counts.get(b, 0) / self.total if self.total else 0.0

    def wilson(self, b: int, z: float = 1.96) -> WilsonInterval:
        return wilson_interval(self.counts.get(b, 0), self.total, z)

    def z_scores(self, targets: dict[int, float]) -> dict[int, float]:
        out = {}
        for b, p in targets.items():
            sd = math.sqrt(p * (1 - p) / self.total) if self.total else math.inf
            out[b] = (self.frequency(b) - p) / sd if sd > 0 else 0.0
        return out

    def chi2_pvalue(self, targets: dict[int, float]) -> float:
        keys = sorted(targets)
        obs = np.array([self.counts.get(b, 0) for b in keys], dtype=float)
        exp = np.array([targets[b] for b in keys]) * self.total
        if len(keys) < 2:
            return 1.0
        chi2 = float(np.sum((obs - exp) ** 2 / exp))
        return float(stats.chi2.sf(chi2, len(keys) - 1))

    def merge(self, other: "TerminalHistogram") -> "TerminalHistogram":
        counts = dict(self.counts)
        for b, c in other.counts.items():
            counts[b] = counts.get(b, 0) + c
        disc = dict(self.discarded)
        for r, c in other.discarded.items():
            disc[r] = disc.get(r, 0) + c
        return TerminalHistogram(dict(sorted(counts.items())), dict(sorted(disc.items())))


@dataclass(frozen=True)
class _Drive:
    a: int  # 0-based start index
    mode: int
    kappa: float
    # level lines: force-point weights. Z_alpha chains: +-2^k tags on the two ends
    # of link k, so a set of points has zero total exactly when it is a union of links
    rho: np.ndarray
    theta_half: np.ndarray
    theta_a: np.ndarray
    coef: np.ndarray
    pattern: LinkPattern | None = None


def _level_line_drive(m: int, a: int) -> _Drive:
    # weight +2 at odd points, -2 at even points (1-based), none at the start
    rho = np.array([2.0 if (j + 1) % 2 else -2.0 for j in range(m)])
    rho[a] = 0.0
    empty = np.zeros((1, 1))
    return _Drive(a, 0, 4.0, rho, empty, empty, np.ones(1))


def _zalpha_drive(p: LinkPattern, a: int) -> _Drive:
    n, m = p.n, 2 * p.n
    ps = cb.enumerate_link_patterns(n)
    row = cb.inverse_matrix(n).row(p)
    iu = np.triu_indices(m, 1)
    keep = [k for k, c in enumerate(row) if c != 0]
    theta_half = np.array([0.5 * theta_table(ps[k])[iu] for k in keep], dtype=float)
    theta_a = np.array([theta_table(ps[k])[a] for k in keep], dtype=float)
    coef = np.array([row[k] for k in keep], dtype=float)
    tags = np.zeros(m)
    for k, (i, j) in enumerate(p.links):
        tags[i - 1], tags[j - 1] = 2.0 ** k, -(2.0 ** k)
    return _Drive(a, 1, 4.0, tags, theta_half, theta_a, coef, p)


def _subdrive(drive: _Drive, lo: int, hi: int) -> _Drive:
    """The drive on the points lo..hi-1 only."""
    if drive.mode == 0:
        return _Drive(drive.a - lo, 0, drive.kappa, drive.rho[lo:hi].copy(),
                      drive.theta_half, drive.theta_a, drive.coef)
    links = tuple((i - lo, j - lo) for i, j in drive.pattern.links if lo < i <= hi)
    return _zalpha_drive(LinkPattern(links), drive.a - lo)


@dataclass
class _Batch:
    W: np.ndarray
    scale: np.ndarray
    t: np.ndarray
    steps: np.ndarray
    status: np.ndarray
    dts: list | None = None
    # per sample: labels of the points still tracked, and their spacings
    final: list | None = None


@dataclass
class _Group:
    """Samples sharing the same set of tracked points."""
    labels: np.ndarray  # 0-based labels of the tracked points, in order
    drive: _Drive
    D: np.ndarray       # spacings, one row per sample of the whole block
    members: list = field(default_factory=list)


def _run_block(x: np.ndarray, drive: _Drive, cfg: McConfig, n: int, seed_seq,
               record: bool = False) -> _Batch:
    kern = cfg.kernel()
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    m = x.size
    W = np.full(n, x[drive.a])
    scale = np.ones(n)
    t = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int32)
    dts = [] if record else None
    reduce_at = cfg.reduce_at
    full = tuple(range(m))
    groups = {full: _Group(np.arange(m), drive, np.tile(np.diff(x), (n, 1)), list(range(n)))}
    owner = np.zeros(n, dtype=object)
    owner[:] = [full] * n
    while any(g.members for g in groups.values()):
        # fixed order keeps the random stream reproducible
        for key in sorted(groups, key=lambda k: (-len(k), k)):
            g = groups[key]
            if not g.members:
                continue
            active = np.array(g.members, dtype=np.int64)
            g.members = []
            dv = g.drive
            normals = rng.standard_normal((active.size, cfg.chunk))
            dt_out = np.full((active.size, cfg.chunk), np.nan) if record else None
            kern.advance(active, normals, W, g.D, scale, t, steps, status, dv.a, dv.kappa,
                         dv.mode, dv.rho, dv.theta_half, dv.theta_a, dv.coef, cfg.dt_base,
                         cfg.gap_exponent, cfg.delta_stop, STOP_RULES[cfg.stop_rule],
                         cfg.max_steps, cfg.min_dt, reduce_at, dt_out)
            if record:
                dts.append(dt_out)
            st = status[active]
            done = active[st > 0]
            status[done] = g.labels[st[st > 0] - 1] + 1
            g.members = list(active[st == _mc_kernel_py.RUNNING])
            red = active[st == _mc_kernel_py.REDUCE]
            if red.size:
                _reduce(red, g, groups, owner, status, reduce_at, n)
    final = None
    if record:
        final = []
        for i in range(n):
            g = groups[owner[i]]
            final.append((g.labels, g.drive.a, g.D[i].copy()))
    return _Batch(W, scale, t, steps, status, dts, final)


def _reduce(red, g: _Group, groups, owner, status, reduce_at, n):
    """Drop far points of zero total weight and move the samples to the smaller group."""
    a = g.drive.a
    m = g.labels.size
    d = g.D[red]
    near = [k for k in (a - 1, a) if 0 <= k < m - 1]
    lo, hi = _mc_kernel_py.far_range(d, a, reduce_at * d[:, near].min(axis=1))
    for i, s in enumerate(red):
        key = tuple(int(v) for v in g.labels[lo[i]:hi[i]])
        if key not in groups:
            groups[key] = _Group(g.labels[lo[i]:hi[i]].copy(),
                                 _subdrive(g.drive, lo[i], hi[i]),
                                 np.ones((n, hi[i] - lo[i] - 1)))
        h = groups[key]
        h.D[s] = g.D[s, lo[i]:hi[i] - 1]
        h.members.append(int(s))
        owner[s] = key
        status[s] = _mc_kernel_py.RUNNING


def _simulate(x: np.ndarray, drive: _Drive, cfg: McConfig) -> list[_Batch]:
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.workers)
    sizes = [len(c) for c in np.array_split(np.arange(cfg.samples), cfg.workers)]
    if cfg.workers == 1:
        return [_run_block(x, drive, cfg, sizes[0], children[0])]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(_run_block, x, drive, cfg, n, c) for n, c in zip(sizes, children)]
        return [f.result() for f in futures]


def _histogram(batches: list[_Batch]) -> TerminalHistogram:
    hist = TerminalHistogram({})
    for b in batches:
        vals, cnt = np.unique(b.status, return_counts=True)
        counts = {int(v): int(c) for v, c in zip(vals, cnt) if v > 0}
        disc = {DISCARD_REASONS[int(v)]: int(c) for v, c in zip(vals, cnt) if v < 0}
        hist = hist.merge(TerminalHistogram(counts, disc))
    return hist


def level_line_terminal(x, cfg: McConfig = McConfig(), start: int = 1) -> TerminalHistogram:
    """Terminal points of the GFF level line started at x_start (odd index)."""
    x = as_config(x)
    if start % 2 != 1 or not 1 <= start <= x.size:
        raise InvalidPatternError("level lines start at an odd index")
    return _histogram(_simulate(x, _level_line_drive(x.size, start - 1), cfg))


def level_line_targets(x, start: int = 1) -> dict[int, float]:
    x = as_config(x)
    return {b: marginal_probability(x, start, b) for b in range(2, x.size + 1, 2)}


@dataclass(frozen=True)
class DriveResult:
    pattern: LinkPattern
    start: int
    paired_endpoint: int
    histogram: TerminalHistogram
    mean_steps: float
    mean_capacity: float

    @property
    def hit_fraction(self) -> float:
        return self.histogram.frequency(self.paired_endpoint)


def zalpha_driven_curve(p: LinkPattern, a: int, x, cfg: McConfig = McConfig()) -> DriveResult:
    """Run the chain dW = 2 dB + 4 d/dx_a log Z_alpha dt from x_a, cfg.samples times.

    The curve should end at the partner of a in p.
    """
    x = as_config(x, p.n)
    b = p.partner(a)
    batches = _simulate(x, _zalpha_drive(p, a - 1), cfg)
    done = np.concatenate([bt.status for bt in batches]) > 0
    steps = np.concatenate([bt.steps for bt in batches])[done]
    caps = np.concatenate([bt.t for bt in batches])[done]
    return DriveResult(p, a, b, _histogram(batches),
                       float(steps.mean()) if steps.size else 0.0,
                       float(caps.mean()) if caps.size else 0.0)


@dataclass(frozen=True)
class PatternFrequencies:
    histogram: TerminalHistogram
    frequencies: dict[LinkPattern, float]
    exact: dict[LinkPattern, float]

    def z_scores(self) -> dict[LinkPattern, float]:
        n = self.histogram.total
        return {p: (self.frequencies[p] - q) / math.sqrt(q * (1 - q) / n)
                for p, q in self.exact.items()}


def full_pattern_n2(x, cfg: McConfig = McConfig()) -> PatternFrequencies:
    """Both N = 2 connection frequencies from the first level line's endpoint."""
    x = as_config(x, 2)
    hist = level_line_terminal(x, cfg)
    rb, un = cb.rainbow(2), cb.unnested(2)
    freqs = {un: hist.frequency(2), rb: hist.frequency(4)}
    exact = {un: marginal_probability(x, 1, 2), rb: marginal_probability(x, 1, 4)}
    return PatternFrequencies(hist, freqs, exact)


@dataclass(frozen=True)
class PathTrace:
    terminal: int
    steps: int
    dts: np.ndarray
    state: LoewnerState


def trace_path(x, cfg: McConfig = McConfig(), pattern: LinkPattern | None = None,
               start: int = 1) -> PathTrace:
    """Run one sample and keep its step sizes; the level line unless a pattern is given."""
    x = as_config(x)
    drive = (_level_line_drive(x.size, start - 1) if pattern is None
             else _zalpha_drive(pattern, start - 1))
    seed = np.random.SeedSequence(cfg.seed).spawn(1)[0]
    bt = _run_block(x, drive, cfg, 1, seed, record=True)
    dts = np.concatenate([d[0] for d in bt.dts])
    dts = dts[~np.isnan(dts)]
    term = int(bt.status[0])
    labels, slot, d = bt.final[0]
    y = _mc_kernel_py.gaps(d[None, :], slot)[0] * bt.scale[0]
    pos = np.full(x.size, np.nan)
    pos[labels] = bt.W[0] + y
    a = start - 1
    V = tuple(float(v) for j, v in enumerate(pos) if j != a)
    if term > 0:
        lo, hi = sorted((a + 1, term))
        swallowed = [lo <= j + 1 <= hi for j in range(x.size) if j != a]
    else:
        swallowed = [False] * (x.size - 1)
    state = LoewnerState(float(bt.t[0]), float(bt.W[0]), V, tuple(swallowed))
    return PathTrace(term, int(bt.steps[0]), dts, state)
