# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel; same contract as msle._mc_kernel_py.advance."""

from libc.math cimport sqrt, log, exp, fabs
from libc.stdlib cimport malloc, free

cdef int RUNNING = 0
cdef int UNDERFLOW = -1
cdef int MAX_STEPS = -2
cdef int CROSSING = -3
cdef int DRIFT_FAILURE = -4
cdef int REDUCE = -5
cdef int ABSOLUTE = 1
cdef double CANCELLATION = 1e-12
cdef double RESCALE_LO = 1e-30
cdef double RESCALE_HI = 1e30
cdef double FAR = 1e150
cdef double GAUGE_RATIO = 1e3


cdef inline double _dist(double[:] d, int i, int j) nogil:
    cdef int k
    cdef double acc = 0.0
    if i > j:
        i, j = j, i
    for k in range(i, j):
        acc += d[k]
    return acc


cdef inline double _cross_ratio(double[:] d, int i1, int i2, int i3, int i4) nogil:
    return _dist(d, i1, i2) * _dist(d, i3, i4) / (_dist(d, i1, i3) * _dist(d, i2, i4))


cdef inline void _gaps(double[:] d, int a, int m, double* y) nogil:
    cdef int j
    y[a] = 0.0
    for j in range(a + 1, m):
        y[j] = y[j - 1] + d[j - 1]
    for j in range(a - 1, -1, -1):
        y[j] = y[j + 1] - d[j]


cdef inline int _terminal(double[:] d, double* local, int a, int m,
                          double delta_stop, int stop_rule) nogil:
    cdef int j, r, l, outside
    cdef double cum
    cum = 0.0
    for j in range(a + 1, m):
        cum += local[j]
        if cum >= -1.0:
            continue
        if stop_rule == ABSOLUTE:
            if _dist(d, a, j) < delta_stop:
                return j + 1
            continue
        outside = (m - 1 - j) + a
        if outside == 1:
            continue
        if outside >= 2:
            r = j + 1 if j + 1 < m else 0
            l = a - 1 if a >= 1 else m - 1
            if _cross_ratio(d, a, j, r, l) >= delta_stop:
                continue
        if j - a >= 3 and _cross_ratio(d, a + 1, j - 1, j, a) >= delta_stop:
            continue
        return j + 1
    cum = 0.0
    for j in range(a - 1, -1, -1):
        cum += local[j]
        if cum >= -1.0:
            continue
        if stop_rule == ABSOLUTE:
            if _dist(d, a, j) < delta_stop:
                return j + 1
            continue
        outside = j + (m - 1 - a)
        if outside == 1:
            continue
        if outside >= 2:
            r = a + 1 if a + 1 < m else 0
            l = j - 1 if j >= 1 else m - 1
            if _cross_ratio(d, j, a, r, l) >= delta_stop:
                continue
        if a - j >= 3 and _cross_ratio(d, j + 1, a - 1, a, j) >= delta_stop:
            continue
        return j + 1
    return 0


cdef inline double _drift(double[:] d, double* y, int a, int m, double kappa, int mode,
                          double[:] rho, double[:, :] theta_half, double[:, :] theta_a,
                          double[:] coef, double* local, double* logs, double* logw,
                          int* failed) nogil:
    """Drift of W; fills the local weights and flags cancellation."""
    cdef int i, j, b, p, dom
    cdef int nb = coef.shape[0]
    cdef int npairs = m * (m - 1) // 2
    cdef double drift, total, big, top, v, g, acc
    failed[0] = 0
    if mode == 0:
        drift = 0.0
        for j in range(m):
            if j != a:
                drift -= rho[j] / y[j]
                local[j] = rho[j]
        return drift
    p = 0
    for i in range(m):
        acc = 0.0
        for j in range(i + 1, m):
            acc += d[j - 1]
            logs[p] = log(acc)
            p += 1
    top = -1e308
    dom = 0
    for b in range(nb):
        v = log(fabs(coef[b]))
        for p in range(npairs):
            v += theta_half[b, p] * logs[p]
        logw[b] = v
        if v > top:
            top = v
            dom = b
    total = 0.0
    big = 0.0
    drift = 0.0
    for b in range(nb):
        v = exp(logw[b] - top)
        if coef[b] < 0:
            v = -v
        total += v
        if fabs(v) > big:
            big = fabs(v)
        g = 0.0
        for j in range(m):
            if j != a:
                g -= 0.5 * theta_a[b, j] / y[j]
        drift += v * g
    for j in range(m):
        local[j] = 0.5 * kappa * theta_a[dom, j]
    if total <= 0 or fabs(total) < CANCELLATION * big:
        failed[0] = 1
        return 0.0
    return kappa * drift / total


cdef inline void _flow(double[:] d, double* y, double* new, int a, int m, double dt) nogil:
    # exact solution of dV = 2 dt / (V - W) with W held fixed; y is refreshed
    cdef int j, k
    for j in range(m):
        new[j] = sqrt(y[j] * y[j] + 4.0 * dt) if j != a else 0.0
    for k in range(m - 1):
        if k == a - 1:
            d[k] = new[k]
        elif k == a:
            d[k] = new[k + 1]
        else:
            d[k] *= (fabs(y[k + 1]) + fabs(y[k])) / (new[k + 1] + new[k])
    _gaps(d, a, m, y)


cdef inline void _gauge(double[:] d, int a, int m, double* e) nogil:
    # Mobius change of chart moving infinity next to a tight outer cluster
    cdef int j
    cdef double span = 0.0, right = 1e308, left = 1e308, big
    for j in range(m - 1):
        span += d[j]
    if m - 1 - a >= 2:
        right = d[m - 2]
    if a >= 2:
        left = d[0]
    if span > GAUGE_RATIO * right and right <= left:
        e[m - 1] = d[m - 2]
        for j in range(m - 2, -1, -1):
            e[j] = e[j + 1] + d[j]
    elif span > GAUGE_RATIO * left:
        e[0] = d[0]
        for j in range(m - 1):
            e[j + 1] = e[j] + d[j]
    else:
        return
    big = e[a] * e[a]
    for j in range(m - 1):
        d[j] *= big / (e[j] * e[j + 1])


def advance(long[:] idx, double[:, :] normals, double[:] W, double[:, :] D, double[:] scale,
            double[:] t,
            long[:] steps, int[:] status, int a, double kappa, int mode, double[:] rho,
            double[:, :] theta_half, double[:, :] theta_a, double[:] coef, double dt_base,
            double gap_exponent, double delta_stop, int stop_rule, long max_steps,
            double min_dt, double reduce_at=0.0, dt_out=None):
    cdef int m = D.shape[1] + 1
    cdef int nb = coef.shape[0]
    cdef int K = normals.shape[1]
    cdef int npairs = m * (m - 1) // 2
    cdef bint record = dt_out is not None and dt_out.size > 0
    cdef double[:, :] dto
    if record:
        dto = dt_out
    cdef double sqk = sqrt(kappa)
    cdef Py_ssize_t q, s
    cdef int k, j, k2, term, failed
    cdef double drift, dmin, dt, dW, span, acc, weight
    cdef bint far
    cdef double* y = <double*> malloc(m * sizeof(double))
    cdef double* new = <double*> malloc(m * sizeof(double))
    cdef double* local = <double*> malloc(m * sizeof(double))
    cdef double* logs = <double*> malloc((npairs + 1) * sizeof(double))
    cdef double* logw = <double*> malloc((nb + 1) * sizeof(double))
    cdef double[:] d
    try:
        with nogil:
            for q in range(idx.shape[0]):
                s = idx[q]
                if status[s] != RUNNING:
                    continue
                d = D[s]
                _gaps(d, a, m, y)
                for k in range(K):
                    _gauge(d, a, m, new)
                    span = 1e308
                    if a >= 1:
                        span = d[a - 1]
                    if a + 1 < m and d[a] < span:
                        span = d[a]
                    if span < RESCALE_LO or span > RESCALE_HI:
                        for j in range(m - 1):
                            d[j] /= span
                            if d[j] > FAR:
                                d[j] = FAR
                        scale[s] *= span
                        span = 1.0
                    if reduce_at > 0:
                        far = False
                        weight = 0.0
                        acc = 0.0
                        for j in range(a + 1, m):
                            acc += d[j - 1]
                            if far or acc > reduce_at * span:
                                far = True
                                weight += rho[j]
                        acc = 0.0
                        for j in range(a - 1, -1, -1):
                            acc += d[j]
                            if acc > reduce_at * span:
                                far = True
                                for k2 in range(j + 1):
                                    weight += rho[k2]
                                break
                        if far and fabs(weight) < 0.5:
                            status[s] = REDUCE
                            break
                    _gaps(d, a, m, y)
                    drift = _drift(d, y, a, m, kappa, mode, rho, theta_half, theta_a, coef,
                                   local, logs, logw, &failed)
                    term = _terminal(d, local, a, m, delta_stop, stop_rule)
                    if term > 0:
                        status[s] = term
                        break
                    if failed:
                        status[s] = DRIFT_FAILURE
                        break
                    if steps[s] >= max_steps:
                        status[s] = MAX_STEPS
                        break
                    dmin = 1e308
                    if a >= 1:
                        dmin = d[a - 1]
                    if a + 1 < m and d[a] < dmin:
                        dmin = d[a]
                    dt = dt_base * dmin ** gap_exponent
                    if dt < min_dt:
                        status[s] = UNDERFLOW
                        break
                    # half flow, drift at the midpoint, half flow
                    _flow(d, y, new, a, m, 0.5 * dt)
                    drift = _drift(d, y, a, m, kappa, mode, rho, theta_half, theta_a, coef,
                                   local, logs, logw, &failed)
                    if failed:
                        status[s] = DRIFT_FAILURE
                        break
                    dW = drift * dt + sqk * sqrt(dt) * normals[q, k]
                    if a >= 1:
                        d[a - 1] += dW
                    if a + 1 < m:
                        d[a] -= dW
                    W[s] += dW * scale[s]
                    t[s] += dt * scale[s] * scale[s]
                    steps[s] += 1
                    if record:
                        dto[q, k] = dt * scale[s] * scale[s]
                    if (a >= 1 and d[a - 1] <= 0) or (a + 1 < m and d[a] <= 0):
                        status[s] = CROSSING
                        break
                    _gaps(d, a, m, y)
                    _flow(d, y, new, a, m, 0.5 * dt)
    finally:
        free(y)
        free(new)
        free(local)
        free(logs)
        free(logw)
