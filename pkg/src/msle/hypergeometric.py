"""Real Gauss hypergeometric function 2F1(a, b; c; z) on 0 <= z <= 1."""
from __future__ import annotations

import math

from scipy.special import digamma

from .errors import ConvergenceError

SERIES_TOL = 1e-16
SERIES_MAX_TERMS = 10_000
_INT_TOL = 1e-12


def _nonpositive_int(v: float) -> bool:
    return v <= 0 and abs(v - round(v)) < _INT_TOL


def _gamma_sign(x: float) -> float:
    if x > 0:
        return 1.0
    if _nonpositive_int(x):
        return 0.0
    return -1.0 if math.floor(-x) % 2 == 0 else 1.0


def _gamma_quotient(num: list[float], den: list[float]) -> float:
    """prod Gamma(num) / prod Gamma(den), with 1/Gamma at poles taken as 0."""
    sign, log = 1.0, 0.0
    for v in den:
        s = _gamma_sign(v)
        if s == 0.0:
            return 0.0
        sign *= s
        log -= math.lgamma(v)
    for v in num:
        s = _gamma_sign(v)
        if s == 0.0:
            raise ZeroDivisionError(f"Gamma pole at {v}")
        sign *= s
        log += math.lgamma(v)
    return sign * math.exp(log)


def _series(a, b, c, z, tol=SERIES_TOL, max_terms=SERIES_MAX_TERMS) -> float:
    term, total = 1.0, 1.0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        if term == 0.0 or abs(term) <= tol * abs(total):
            return total
    raise ConvergenceError(f"2F1({a},{b};{c};{z}) series did not converge in {max_terms} terms")


def _terminating(a, b, c, z) -> float:
    # one of a, b is a non-positive integer: a finite polynomial, exact for all z
    k = -round(a) if _nonpositive_int(a) else -round(b)
    term, total = 1.0, 1.0
    for n in range(k):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
    return total


def hyp2f1_at_one(a: float, b: float, c: float) -> float:
    """Gauss's summation; needs c - a - b > 0."""
    if c - a - b <= 0:
        raise ValueError("2F1 diverges at z=1 unless c - a - b > 0")
    return _gamma_quotient([c, c - a - b], [c - a, c - b])


def _log_case(a, b, m, w, tol=SERIES_TOL, max_terms=SERIES_MAX_TERMS) -> float:
    # c = a + b + m with integer m >= 0, w = 1 - z in (0, 1/2]
    c = a + b + m
    finite = 0.0
    if m > 0:
        pre = _gamma_quotient([float(m), c], [a + m, b + m])
        term = 1.0
        finite = 1.0
        for n in range(m - 1):
            term *= (a + n) * (b + n) / ((n + 1) * (1 - m + n)) * w
            finite += term
        finite *= pre
    pre = (-1) ** m * _gamma_quotient([c], [a, b])
    if pre == 0.0:
        return finite
    lw = math.log(w)
    coef = 1.0 / math.factorial(m)
    total = 0.0
    for n in range(max_terms):
        bracket = lw - digamma(n + 1) - digamma(n + m + 1) + digamma(a + n + m) + digamma(b + n + m)
        t = coef * bracket
        total += t
        if n > 2 and abs(t) <= tol * abs(total):
            return finite - pre * w ** m * total
        coef *= (a + m + n) * (b + m + n) / ((n + 1) * (n + m + 1)) * w
    raise ConvergenceError("logarithmic connection series did not converge")


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """2F1(a, b; c; z) for real parameters and 0 <= z <= 1.

    Power series for z <= 1/2; above that the z -> 1 - z connection formula,
    with the logarithmic variant when c - a - b is an integer.
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    if _nonpositive_int(c):
        raise ValueError("c must not be a non-positive integer")
    if _nonpositive_int(a) or _nonpositive_int(b):
        return _terminating(a, b, c, z)
    if z == 1.0:
        return hyp2f1_at_one(a, b, c)
    if z <= 0.5:
        return _series(a, b, c, z)
    w = 1.0 - z
    s = c - a - b
    if abs(s - round(s)) < _INT_TOL:
        m = round(s)
        if m < 0:
            # symmetric case: pull out (1-z)^{c-a-b} via Euler's transformation
            return w ** s * hyp2f1(c - a, c - b, c, z)
        return _log_case(a, b, m, w)
    first = _gamma_quotient([c, s], [c - a, c - b]) * _series(a, b, 1.0 - s, w)
    second = _gamma_quotient([c, -s], [a, b])
    if second != 0.0:
        second *= w ** s * _series(c - a, c - b, 1.0 + s, w)
    return first + second
