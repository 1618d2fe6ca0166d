"""Pure numpy stepping kernel; the reference semantics for the compiled one.

The state of a sample is the row of consecutive spacings D_k = P_{k+1} - P_k
between the ordered points P = (V_1, ..., W, ..., V_m), with W in slot a.
Every distance between two points is a sum of positive spacings, so clusters
that collapse onto W keep full relative precision.

Each step: half of the exact Loewner flow of the V_j with W frozen, an
Euler-Maruyama move of W with the drift evaluated there, then the other half
of the flow. When an outer cluster becomes tight against the total span the
chart is changed by a Mobius map that moves infinity next to it; the level
line and the Z_alpha-driven chain are both Mobius invariant, so only the
capacity clock changes.

Spacings are divided by the gap between W and its nearest neighbour whenever
that gap leaves [RESCALE_LO, RESCALE_HI]; the factor is kept per sample in
``scale`` so W, t and recorded step sizes stay in physical units. Spacings
beyond FAR times the local gap are clamped there: such points act on W at
relative order 1/FAR.

Each call advances the samples in ``idx`` by up to ``normals.shape[1]``
steps, one normal per step.
"""
from __future__ import annotations

import numpy as np

RUNNING = 0
UNDERFLOW = -1
MAX_STEPS = -2
CROSSING = -3
DRIFT_FAILURE = -4
REDUCE = -5

CROSS_RATIO = 0
ABSOLUTE = 1

CANCELLATION = 1e-12
RESCALE_LO = 1e-30
RESCALE_HI = 1e30
FAR = 1e150
GAUGE_RATIO = 1e3


def gaps(D, a):
    """Signed offsets V_j - W from the spacings; slot a holds 0."""
    n, k = D.shape
    y = np.zeros((n, k + 1))
    y[:, a + 1:] = np.cumsum(D[:, a:], axis=1)
    if a:
        y[:, :a] = -np.cumsum(D[:, :a][:, ::-1], axis=1)[:, ::-1]
    return y


def _dist(D, i, j):
    lo, hi = min(i, j), max(i, j)
    return D[:, lo:hi].sum(axis=1)


def _weights(D, y, a, mode, rho, theta_half, theta_a, coef, kappa):
    """Drift, per-point local weights, and a failure mask for each sample."""
    n, m = y.shape
    inv = np.zeros_like(y)
    others = np.arange(m) != a
    inv[:, others] = 1.0 / y[:, others]
    if mode == 0:
        drift = -(inv @ rho)
        return drift, np.broadcast_to(rho, y.shape), np.zeros(n, dtype=bool)
    iu0, iu1 = np.triu_indices(m, 1)
    logs = np.log(np.stack([_dist(D, i, j) for i, j in zip(iu0, iu1)], axis=1))
    logw = logs @ theta_half.T + np.log(np.abs(coef))
    top = logw.max(axis=1, keepdims=True)
    w = np.sign(coef) * np.exp(logw - top)
    grads = -0.5 * (inv @ theta_a.T)
    total = w.sum(axis=1)
    big = np.abs(w).max(axis=1)
    fail = (total <= 0) | (np.abs(total) < CANCELLATION * big)
    with np.errstate(invalid="ignore", divide="ignore"):
        drift = kappa * (w * grads).sum(axis=1) / total
    dom = np.argmax(logw, axis=1)
    local = 0.5 * kappa * theta_a[dom]
    return drift, local, fail


def _cross_ratio(D, i1, i2, i3, i4):
    """Cross-ratio of four points in cyclic order; small when the first two are close."""
    return (_dist(D, i1, i2) * _dist(D, i3, i4)) / (_dist(D, i1, i3) * _dist(D, i2, i4))


def _terminal(D, local, a, delta_stop, stop_rule):
    """1-based index of the point the driving value has reached, or 0.

    A point j qualifies once the summed local weight between W and x_j drops
    below -1. Under the cross-ratio rule [W, x_j] must also be tight against
    the points outside it, and the points strictly inside must have merged
    relative to their distance from both W and x_j. Under the absolute rule
    only |V_j - W| < delta_stop is required.
    """
    n, k = D.shape
    m = k + 1
    out = np.zeros(n, dtype=np.int64)
    for side in (1, -1):
        cum = np.zeros(n)
        js = range(a + 1, m) if side > 0 else range(a - 1, -1, -1)
        for j in js:
            cum = cum + local[:, j]
            ok = (out == 0) & (cum < -1.0)
            if not ok.any():
                continue
            if stop_rule == ABSOLUTE:
                ok &= _dist(D, a, j) < delta_stop
                out[ok] = j + 1
                continue
            if side > 0:
                outside = (m - 1 - j) + a
                r = j + 1 if j + 1 < m else 0
                l = a - 1 if a >= 1 else m - 1
                quad = (a, j, r, l)
                inner = (a + 1, j - 1, j, a)
            else:
                outside = j + (m - 1 - a)
                r = a + 1 if a + 1 < m else 0
                l = j - 1 if j >= 1 else m - 1
                quad = (j, a, r, l)
                inner = (j + 1, a - 1, a, j)
            if outside == 1:
                continue
            if outside >= 2:
                ok &= _cross_ratio(D, *quad) < delta_stop
            if abs(j - a) >= 3:
                ok &= _cross_ratio(D, *inner) < delta_stop
            out[ok] = j + 1
    return out


def _flow(D, y, a, dt):
    """Exact flow of dV = 2 dt / (V - W) for time dt (per sample), W fixed; updates D."""
    m = y.shape[1]
    new = np.sign(y) * np.sqrt(y * y + 4.0 * dt[:, None])
    for k in range(m - 1):
        if k == a - 1:
            D[:, k] = -new[:, k]
        elif k == a:
            D[:, k] = new[:, k + 1]
        else:
            # same side of W: difference of square roots without cancellation
            D[:, k] *= (np.abs(y[:, k + 1]) + np.abs(y[:, k])) / (
                np.abs(new[:, k + 1]) + np.abs(new[:, k]))


def _gauge(D, a):
    """Move infinity next to an outer cluster that has become tight against the span.

    Uses the Mobius map u -> L u / (L - u), which fixes W and sends the point L,
    placed one outer spacing beyond the outermost point, to infinity. The law
    of the remaining curve is invariant, so this only changes the chart.
    Rows are updated in place; returns the mask of rows that changed.
    """
    n, k = D.shape
    m = k + 1
    span = D.sum(axis=1)
    right = D[:, m - 2] if m - 1 - a >= 2 else np.full(n, np.inf)
    left = D[:, 0] if a >= 2 else np.full(n, np.inf)
    use_right = (span > GAUGE_RATIO * right) & (right <= left)
    use_left = (span > GAUGE_RATIO * left) & ~use_right
    if use_right.any():
        d = D[use_right]
        # e_k = L - u_k, built outward from the far end
        e = np.empty((d.shape[0], m))
        e[:, m - 1] = d[:, m - 2]
        for j in range(m - 2, -1, -1):
            e[:, j] = e[:, j + 1] + d[:, j]
        big = e[:, a]
        D[use_right] = d * big[:, None] ** 2 / (e[:, :-1] * e[:, 1:])
    if use_left.any():
        d = D[use_left]
        f = np.empty((d.shape[0], m))
        f[:, 0] = d[:, 0]
        for j in range(m - 1):
            f[:, j + 1] = f[:, j] + d[:, j]
        big = f[:, a]
        D[use_left] = d * big[:, None] ** 2 / (f[:, :-1] * f[:, 1:])
    return use_right | use_left


def far_range(D, a, limit):
    """Slots kept when points farther than limit from W are dropped: [lo, hi)."""
    n, k = D.shape
    m = k + 1
    hi = np.full(n, m)
    lo = np.zeros(n, dtype=np.int64)
    if a + 1 < m:
        beyond = np.cumsum(D[:, a:], axis=1) > limit[:, None]
        hit = beyond.any(axis=1)
        hi[hit] = a + 1 + beyond[hit].argmax(axis=1)
    if a >= 1:
        beyond = np.cumsum(D[:, :a][:, ::-1], axis=1) > limit[:, None]
        hit = beyond.any(axis=1)
        lo[hit] = a - beyond[hit].argmax(axis=1)
    return lo, hi


def advance(idx, normals, W, D, scale, t, steps, status, a, kappa, mode, rho, theta_half, theta_a,
            coef, dt_base, gap_exponent, delta_stop, stop_rule, max_steps, min_dt, reduce_at=0.0,
            dt_out=None):
    """Advance the listed samples; see the module docstring.

    With reduce_at > 0 a sample whose outer points beyond reduce_at times the
    local gap carry zero total rho stops with status REDUCE, so the caller can
    continue it without them.
    """
    m = D.shape[1] + 1
    sqk = np.sqrt(kappa)
    near = [k for k in (a - 1, a) if 0 <= k < m - 1]
    live = np.arange(idx.size)
    for k in range(normals.shape[1]):
        if live.size == 0:
            break
        s = idx[live]
        d = D[s]
        _gauge(d, a)
        local_scale = d[:, near].min(axis=1)
        out = (local_scale < RESCALE_LO) | (local_scale > RESCALE_HI)
        if out.any():
            d[out] /= local_scale[out, None]
            np.minimum(d, FAR, out=d)
            scale[s[out]] *= local_scale[out]
        st = np.zeros(s.size, dtype=np.int32)
        if reduce_at > 0:
            lo, hi = far_range(d, a, reduce_at * d[:, near].min(axis=1))
            prefix = np.concatenate([[0.0], np.cumsum(rho)])
            weight = prefix[m] - prefix[hi] + prefix[lo]
            st[((lo > 0) | (hi < m)) & (np.abs(weight) < 0.5)] = REDUCE
        y = gaps(d, a)
        _, local, fail = _weights(d, y, a, mode, rho, theta_half, theta_a, coef, kappa)
        term = _terminal(d, local, a, delta_stop, stop_rule)
        st = np.where((st == RUNNING) & (term > 0), term, st).astype(np.int32)
        go = st == RUNNING
        st[go & fail] = DRIFT_FAILURE
        go = st == RUNNING
        st[go & (steps[s] >= max_steps)] = MAX_STEPS
        go = st == RUNNING
        dt = dt_base * d[:, near].min(axis=1) ** gap_exponent
        st[go & (dt < min_dt)] = UNDERFLOW
        go = st == RUNNING
        status[s] = st
        D[s] = d
        g = live[go]
        d, y, dt = d[go], y[go], dt[go]
        _flow(d, y, a, 0.5 * dt)
        drift, _, fail = _weights(d, gaps(d, a), a, mode, rho, theta_half, theta_a, coef, kappa)
        status[idx[g[fail]]] = DRIFT_FAILURE
        g, d, dt, drift = g[~fail], d[~fail], dt[~fail], drift[~fail]
        sg = idx[g]
        dW = drift * dt + sqk * np.sqrt(dt) * normals[g, k]
        if a >= 1:
            d[:, a - 1] += dW
        if a + 1 < m:
            d[:, a] -= dW
        bad = (d[:, near] <= 0).any(axis=1)
        ok = ~bad
        dd = d[ok]
        _flow(dd, gaps(dd, a), a, 0.5 * dt[ok])
        d[ok] = dd
        D[sg] = d
        sc = scale[sg]
        W[sg] += dW * sc
        dt_phys = dt * sc * sc
        t[sg] += dt_phys
        steps[sg] += 1
        if dt_out is not None and dt_out.size:
            dt_out[g, k] = dt_phys
        status[sg[bad]] = CROSSING
        live = g[ok]
