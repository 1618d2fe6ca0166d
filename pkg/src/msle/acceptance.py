"""The acceptance checks, shared by the test suite and ``msle suite``.

Every check returns a CriterionResult; none of them raise on a numerical
miss. Fixture values that come from published tables are frozen here, the
rest is recomputed from independent formulas.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from . import analysis as an
from . import combinatorics as cb
from . import partition_functions as pf
from . import loewner_mc as mc
from .errors import MsleError

# incidence and inverse matrices in canonical order
TABLE_M = {
    2: ((1, 0), (1, 1)),
    3: ((1, 0, 0, 0, 0), (1, 1, 0, 0, 0), (0, 1, 1, 0, 0), (0, 1, 0, 1, 0), (1, 1, 1, 1, 1)),
}
TABLE_M_INV = {
    2: ((1, 0), (-1, 1)),
    3: ((1, 0, 0, 0, 0), (-1, 1, 0, 0, 0), (1, -1, 1, 0, 0), (1, -1, 0, 1, 0),
        (-2, 1, -1, -1, 1)),
}
CATALAN = (1, 1, 2, 5, 14, 42, 132, 429, 1430)

MC_POINTS = ((0.0, 1.0, 2.0, 3.0), (0.0, 1.0, 2.0, 3.0, 4.0, 5.0))
MC_SAMPLES = 10_000
DRIVE_SAMPLES = 1_000
DRIVE_CASES = (("1-4,2-3", 1, 2), ("1-2,3-4", 1, 2), ("1-6,2-5,3-4", 1, 3), ("1-2,3-4,5-6", 1, 3))


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"

    def to_json(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "detail": self.detail, "metrics": self.metrics, "seconds": self.seconds}


def _rng(k: int) -> np.random.Generator:
    return np.random.default_rng(1000 + k)


# -- 1-3: combinatorics ----------------------------------------------------

def matrix_fixtures() -> tuple[bool, str, dict]:
    bad = []
    for n in (2, 3):
        if cb.incidence_matrix(n).entries != TABLE_M[n]:
            bad.append(f"M(N={n})")
        if cb.inverse_matrix(n).entries != TABLE_M_INV[n]:
            bad.append(f"M^-1(N={n})")
    detail = "tables match" if not bad else "table mismatch: " + ", ".join(bad)
    return not bad, detail, {"mismatches": bad}


def tiling_oracle() -> tuple[bool, str, dict]:
    pairs = bad = 0
    for n in range(1, 5):
        ps = cb.enumerate_link_patterns(n)
        inv = cb.inverse_matrix(n)
        for a in ps:
            for b in ps:
                if not cb.leq(a, b):
                    continue
                pairs += 1
                s = cb.skew_shape(a, b)
                if (-1) ** s.area * cb.count_cover_inclusive_tilings(s) != inv[a, b]:
                    bad += 1
    return bad == 0, f"{pairs} comparable pairs, {bad} mismatches", {"pairs": pairs, "bad": bad}


def _closure(rel: set, items) -> set:
    out = set(rel)
    changed = True
    while changed:
        changed = False
        for a, b in list(out):
            for c in items:
                if (b, c) in out and (a, c) not in out:
                    out.add((a, c))
                    changed = True
    return out


def catalan_and_kw() -> tuple[bool, str, dict]:
    counts = [len(cb.enumerate_link_patterns(n)) for n in range(9)]
    ok_counts = tuple(counts) == CATALAN and all(cb.catalan(n) == CATALAN[n] for n in range(9))
    ok_kw = True
    for n in range(1, 6):
        ps = cb.enumerate_link_patterns(n)
        kw = {(a, b) for a in ps for b in ps if cb.kw_related(a, b)}
        order = {(a, b) for a in ps for b in ps if cb.leq(a, b)}
        if not kw <= order or _closure(kw, ps) != order:
            ok_kw = False
    detail = f"counts {'ok' if ok_counts else counts}, KW closure {'ok' if ok_kw else 'differs'}"
    return ok_counts and ok_kw, detail, {"counts": counts}


# -- 4-5, 11-12: closed forms ---------------------------------------------

def sum_rule() -> tuple[bool, str, dict]:
    rng = _rng(4)
    worst = 0.0
    for n in range(1, 6):
        for _ in range(50):
            x = an.random_configuration(rng, n)
            total = sum(pf.all_pure_partitions_k4(x).values())
            worst = max(worst, abs(total / pf.gff_symmetric(x) - 1.0))
    return worst < 1e-10, f"max rel error {worst:.2e}", {"max_rel": worst}


def _block(parens: str, x) -> float:
    # U_alpha straight from the definition: +1/2 for opener-opener and closer-closer pairs
    v = 1.0
    for i, j in combinations(range(len(parens)), 2):
        v *= (x[j] - x[i]) ** (0.5 if parens[i] == parens[j] else -0.5)
    return v


# Z_alpha as combinations of blocks, listed against the canonical order
N3_EXPANSION = ((1, 0, 0, 0, 0), (-1, 1, 0, 0, 0), (1, -1, 1, 0, 0), (1, -1, 0, 1, 0),
                (-2, 1, -1, -1, 1))


def closed_forms() -> tuple[bool, str, dict]:
    rng = _rng(5)
    worst = 0.0
    rb, un = cb.rainbow(2), cb.unnested(2)
    ps3 = cb.enumerate_link_patterns(3)
    parens3 = [cb.to_parentheses(p) for p in ps3]
    for _ in range(20):
        x1, x2, x3, x4 = x = an.random_configuration(rng, 2)
        zr = math.sqrt((x4 - x3) * (x2 - x1) / ((x4 - x1) * (x3 - x1) * (x4 - x2) * (x3 - x2)))
        zu = math.sqrt((x4 - x1) * (x3 - x2) / ((x3 - x1) * (x2 - x1) * (x4 - x3) * (x4 - x2)))
        worst = max(worst, abs(pf.pure_partition_k4(rb, x) / zr - 1.0),
                    abs(pf.pure_partition_k4(un, x) / zu - 1.0))
        y = an.random_configuration(rng, 3)
        blocks = [_block(s, y) for s in parens3]
        for p, row in zip(ps3, N3_EXPANSION):
            ref = sum(c * u for c, u in zip(row, blocks))
            worst = max(worst, abs(pf.pure_partition_k4(p, y) / ref - 1.0))
    return worst < 1e-10, f"max rel error {worst:.2e}", {"max_rel": worst}


def _n2_special(kappa: float, z: float) -> float:
    if kappa == 2.0:
        return z * (2.0 - z)
    if kappa == 4.0:
        return math.sqrt(z)
    return z ** 0.375 * (1.0 + math.sqrt(1.0 - z)) ** -0.5


def hypergeometric_n2() -> tuple[bool, str, dict]:
    rng = _rng(11)
    worst_special = worst_k4 = 0.0
    rb, un = cb.rainbow(2), cb.unnested(2)
    for _ in range(20):
        x1, x2, x3, x4 = x = an.random_configuration(rng, 2)
        z = (x2 - x1) * (x4 - x3) / ((x4 - x2) * (x3 - x1))
        for kappa in (2.0, 4.0, 16.0 / 3.0):
            two_h = (6.0 - kappa) / kappa
            ref_r = ((x4 - x1) * (x3 - x2)) ** -two_h * _n2_special(kappa, z)
            ref_u = ((x2 - x1) * (x4 - x3)) ** -two_h * _n2_special(kappa, 1.0 - z)
            worst_special = max(worst_special,
                                abs(pf.pure_partition_n2(rb, kappa, x) / ref_r - 1.0),
                                abs(pf.pure_partition_n2(un, kappa, x) / ref_u - 1.0))
        for p in (rb, un):
            worst_k4 = max(worst_k4, abs(pf.pure_partition_n2(p, 4.0, x)
                                         / pf.pure_partition_k4(p, x) - 1.0))
    ok = worst_special < 1e-8 and worst_k4 < 1e-8
    return ok, f"special cases {worst_special:.2e}, vs kappa=4 sum {worst_k4:.2e}", {
        "max_rel_special": worst_special, "max_rel_k4": worst_k4}


def _pf_brute(a: np.ndarray) -> float:
    m = a.shape[0]

    def rec(items):
        if not items:
            yield 1.0, ()
            return
        first, rest = items[0], items[1:]
        for k, other in enumerate(rest):
            for v, prs in rec(rest[:k] + rest[k + 1:]):
                yield a[first, other] * v, ((first, other),) + prs

    total = 0.0
    for v, prs in rec(tuple(range(m))):
        crossings = sum(1 for (p, q), (r, s) in combinations(prs, 2) if p < r < q < s or r < p < s < q)
        total += (-1) ** crossings * v
    return total


def pfaffian_checks() -> tuple[bool, str, dict]:
    rng = _rng(12)
    worst = 0.0
    for n in range(1, 5):
        for _ in range(10):
            x = an.random_configuration(rng, n)
            d = x[None, :] - x[:, None]
            np.fill_diagonal(d, 1.0)
            ising = 1.0 / d
            np.fill_diagonal(ising, 0.0)
            g = rng.standard_normal((2 * n, 2 * n))
            for a in (ising, g - g.T):
                ref = _pf_brute(a)
                worst = max(worst, abs(pf.pfaffian(a) - ref) / abs(ref))
    negatives = 0
    for n in range(1, 5):
        for _ in range(100):
            x = an.random_configuration(rng, n, low=0.05, high=3.0)
            negatives += pf.ising_symmetric(x) <= 0
            negatives += pf.lerw_symmetric(x) <= 0
    ok = worst < 1e-12 and negatives == 0
    return ok, f"max rel error {worst:.2e}, {negatives} non-positive values", {
        "max_rel": worst, "non_positive": int(negatives)}


# -- 6-10: analysis --------------------------------------------------------

PDE_STEP = 1e-3
PDE_ORDER_STEPS = (1e-2, 5e-3)


def pde_residuals(ns=range(1, 5), configs: int = 10, seed: int = 6) -> tuple[bool, str, dict]:
    rng = _rng(seed)
    worst = 0.0
    lo_order, hi_order = math.inf, -math.inf
    failures = []
    for n in ns:
        for fam in an.families(n):
            for _ in range(configs):
                x = an.random_configuration(rng, n)
                for i in range(1, 2 * n + 1):
                    rel = an.pde_residual(fam.f, fam.params, x, i, PDE_STEP).relative
                    r1 = an.pde_residual(fam.f, fam.params, x, i, PDE_ORDER_STEPS[0]).relative
                    r2 = an.pde_residual(fam.f, fam.params, x, i, PDE_ORDER_STEPS[1]).relative
                    order = math.log(r1 / r2) / math.log(PDE_ORDER_STEPS[0] / PDE_ORDER_STEPS[1])
                    worst = max(worst, rel)
                    lo_order, hi_order = min(lo_order, order), max(hi_order, order)
                    if rel >= 1e-5 or abs(order - 2.0) > 0.2:
                        failures.append(f"{fam.name} i={i}")
    detail = f"max rel residual {worst:.2e}, order in [{lo_order:.3f}, {hi_order:.3f}]"
    if failures:
        detail += f", {len(failures)} failures (first: {failures[0]})"
    return not failures, detail, {"max_rel": worst, "order_min": lo_order, "order_max": hi_order,
                                  "failures": len(failures)}


def covariance(ns=range(1, 5), maps: int = 100, seed: int = 7) -> tuple[bool, str, dict]:
    rng = _rng(seed)
    worst, where = 0.0, ""
    for n in ns:
        for fam in an.families(n):
            for _ in range(maps):
                x = an.random_configuration(rng, n)
                err = an.covariance_check(fam.f, fam.params, x, an.random_mobius(rng, x))
                if err > worst:
                    worst, where = err, fam.name
    return worst < 1e-9, f"max rel error {worst:.2e} ({where})", {"max_rel": worst}


def asymptotics(ns=range(1, 5), seed: int = 8) -> tuple[bool, str, dict]:
    rng = _rng(seed)
    k4 = pf.SleParams(4.0)
    worst, unsettled, checks = 0.0, 0, 0
    for n in ns:
        for p in cb.enumerate_link_patterns(n):
            for j in range(1, 2 * n):
                x = an.random_configuration(rng, n)
                y = np.delete(x, [j - 1, j])
                res = an.asy_limit(lambda z, p=p: pf.pure_partition_k4(p, z), k4, y, j,
                                   0.5 * (x[j - 1] + x[j]))
                target = (pf.pure_partition_k4(cb.remove_link(p, j), y)
                          if (j, j + 1) in p else 0.0)
                worst = max(worst, abs(res.value - target))
                unsettled += not res.converged
                checks += 1
    # unsettled ladders are reported; the gate is the distance to the target
    return worst < 1e-4, f"{checks} limits, max abs error {worst:.2e}, {unsettled} unsettled", {
        "max_abs": worst, "unsettled": unsettled}


def dual_basis(n: int = 3) -> tuple[bool, str, dict]:
    k4 = pf.SleParams(4.0)
    ps = cb.enumerate_link_patterns(n)
    worst = 0.0
    errors = 0
    for a in ps:
        for b in ps:
            try:
                v = an.dual_functional(a, lambda z, b=b: pf.pure_partition_k4(b, z), k4)
            except MsleError:
                errors += 1
                continue
            worst = max(worst, abs(v - (a == b)))
    ok = worst < 1e-3 and errors == 0
    return ok, f"max |L_a(Z_b) - delta| {worst:.2e}, {errors} failed limits", {
        "max_abs": worst, "errors": errors}


def _decay_expected(family: str, n: int, mode: str) -> float:
    factor = 2.0 if mode == "both_ends" else 1.0
    if family == "rainbow_Z":
        return factor * n * (n - 1) / 4.0
    return -factor * (n if n % 2 == 0 else n - 1) / 4.0


def decay_slopes(ns=range(1, 6)) -> tuple[bool, str, dict]:
    worst = 0.0
    for n in ns:
        for family in ("rainbow_Z", "gff_Z"):
            for mode in ("one_end", "both_ends"):
                slope = an.decay_slope(family, n, mode)
                worst = max(worst, abs(slope - _decay_expected(family, n, mode)))
    return worst < 1e-2, f"max slope error {worst:.2e}", {"max_abs": worst}


# -- 13-14: Monte Carlo ----------------------------------------------------

def mc_marginals(cfg: mc.McConfig | None = None) -> tuple[bool, str, dict]:
    cfg = cfg or mc.McConfig(samples=MC_SAMPLES, seed=42)
    ok = True
    metrics = {}
    parts = []
    for x in MC_POINTS:
        t0 = time.perf_counter()
        hist = mc.level_line_terminal(x, cfg)
        elapsed = time.perf_counter() - t0
        targets = mc.level_line_targets(x)
        zs = hist.z_scores(targets)
        pval = hist.chi2_pvalue(targets)
        worst = max(abs(v) for v in zs.values())
        ok &= worst < 3.0 and pval > 1e-3 and hist.discard_fraction < 0.01 and elapsed < 300.0
        n = len(x) // 2
        metrics[f"N{n}"] = {"z": {str(b): v for b, v in zs.items()}, "chi2_pvalue": pval,
                            "discard_fraction": hist.discard_fraction, "seconds": elapsed}
        parts.append(f"N={n} max|z| {worst:.2f} p {pval:.3f} "
                     f"discards {hist.discard_fraction:.2%} {elapsed:.0f}s")
    return ok, "; ".join(parts), metrics


def mc_drive(cfg: mc.McConfig | None = None) -> tuple[bool, str, dict]:
    cfg = cfg or mc.McConfig(samples=DRIVE_SAMPLES, seed=42)
    ok = True
    metrics = {}
    for text, a, n in DRIVE_CASES:
        x = MC_POINTS[n - 2]
        res = mc.zalpha_driven_curve(cb.parse_pattern(text), a, x, cfg)
        ok &= res.hit_fraction >= 0.99
        metrics[text] = {"hit_fraction": res.hit_fraction,
                         "discarded": sum(res.histogram.discarded.values())}
    worst = min(v["hit_fraction"] for v in metrics.values())
    return ok, f"lowest hit fraction {worst:.3f} over {len(DRIVE_CASES)} patterns", metrics


CRITERIA: dict[int, tuple[str, Callable[[], tuple[bool, str, dict]]]] = {
    1: ("matrix fixtures", matrix_fixtures),
    2: ("tiling oracle", tiling_oracle),
    3: ("catalan counts and KW closure", catalan_and_kw),
    4: ("sum rule", sum_rule),
    5: ("closed-form fixtures", closed_forms),
    6: ("PDE residuals", pde_residuals),
    7: ("Mobius covariance", covariance),
    8: ("asymptotics", asymptotics),
    9: ("dual basis", dual_basis),
    10: ("decay slopes", decay_slopes),
    11: ("hypergeometric N=2", hypergeometric_n2),
    12: ("Pfaffian", pfaffian_checks),
    13: ("Monte Carlo marginals", mc_marginals),
    14: ("Z_alpha-driven chain", mc_drive),
}
FAST = tuple(range(1, 13))
FULL = tuple(range(1, 15))


def run_criterion(number: int) -> CriterionResult:
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        passed, detail, metrics = fn()
    except MsleError as exc:
        passed, detail, metrics = False, f"{type(exc).__name__}: {exc}", {}
    return CriterionResult(number, name, bool(passed), detail, metrics, time.perf_counter() - t0)


def run_suite(level: str = "fast", echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    numbers = FAST if level == "fast" else FULL
    out = []
    for k in numbers:
        res = run_criterion(k)
        if echo:
            echo(res.line())
        out.append(res)
    return out
