# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Mirrors ``_pykernels`` expression by expression; the loops run without the
GIL so replicate chunks can execute on several threads.
"""
import numpy as np
from libc.math cimport log, log1p, exp, sqrt, cos, pow, ceil, INFINITY
from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free
from scipy.special.cython_special cimport gammaincc


cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0

cdef enum:
    DATA_LOSS = 0
    UNAVAILABLE = 1
    CENSORED = 2


cdef struct Stream:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _rotl(uint64_t x, int r) noexcept nogil:
    return (x << r) | (x >> (64 - r))


cdef inline void stream_init(Stream* st, uint64_t seed, uint64_t index) noexcept nogil:
    cdef uint64_t x = seed ^ _mix(index + GOLDEN)
    x = x + GOLDEN
    st.s0 = _mix(x)
    x = x + GOLDEN
    st.s1 = _mix(x)
    x = x + GOLDEN
    st.s2 = _mix(x)
    x = x + GOLDEN
    st.s3 = _mix(x)
    if st.s0 == 0 and st.s1 == 0 and st.s2 == 0 and st.s3 == 0:
        st.s0 = 1


cdef inline uint64_t next64(Stream* st) noexcept nogil:
    cdef uint64_t result = _rotl(st.s1 * 5, 7) * 9
    cdef uint64_t t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = _rotl(st.s3, 45)
    return result


cdef inline double uniform(Stream* st) noexcept nogil:
    return <double>(next64(st) >> 11) * INV_2_53


cdef inline double exponential(Stream* st, double rate) noexcept nogil:
    return -log1p(-uniform(st)) / rate


cdef inline double normal(Stream* st) noexcept nogil:
    cdef double u1 = 1.0 - uniform(st)
    cdef double u2 = uniform(st)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef double gamma_draw(Stream* st, double shape) noexcept nogil:
    cdef double d = shape - 1.0 / 3.0
    cdef double c = 1.0 / sqrt(9.0 * d)
    cdef double x, v, u
    while True:
        x = normal(st)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = uniform(st)
        if u < 1.0 - 0.0331 * (x * x) * (x * x):
            return d * v
        if u <= 0.0 or log(u) < 0.5 * x * x + d * (1.0 - v + log(v)):
            return d * v


cdef inline double weibull_count(Stream* st, double shape, double scale) noexcept nogil:
    cdef double u = uniform(st)
    cdef double m = ceil(scale * pow(-log1p(-u), 1.0 / shape))
    if m < 1.0:
        return 1.0
    return m


cdef inline double robot_life(Stream* st, double omega, double wshape, double wscale) noexcept nogil:
    if omega <= 0.0:
        return INFINITY
    cdef double m = weibull_count(st, wshape, wscale)
    return gamma_draw(st, m) / omega


def stream_uniforms(uint64_t seed, uint64_t index, Py_ssize_t count):
    """First ``count`` uniforms of a replicate stream (backend cross-checks)."""
    cdef Stream st
    cdef Py_ssize_t i
    out = np.empty(count)
    cdef double[::1] o = out
    stream_init(&st, seed, index)
    for i in range(count):
        o[i] = uniform(&st)
    return out


def markov_chunk(double[::1] exit_rate, long[::1] row_ptr, long[::1] dest,
                 double[::1] rate, unsigned char[::1] is_fail,
                 unsigned char[::1] absorbing, long[::1] level, long initial,
                 double horizon, long threshold, double factor,
                 uint64_t seed, uint64_t rep_start, Py_ssize_t count):
    times_a = np.empty(count)
    weights_a = np.empty(count)
    final_a = np.empty(count, dtype=np.int64)
    censored_a = np.zeros(count, dtype=np.uint8)
    cdef double[::1] times = times_a
    cdef double[::1] weights = weights_a
    cdef long long[::1] final = final_a
    cdef unsigned char[::1] censored = censored_a
    cdef double log_factor = log(factor)
    cdef Stream st
    cdef Py_ssize_t r, e, lo, hi, pick
    cdef long s
    cdef double t, logw, q, qb, dt, target, acc
    cdef bint biased
    with nogil:
        for r in range(count):
            stream_init(&st, seed, rep_start + r)
            s = initial
            t = 0.0
            logw = 0.0
            while not absorbing[s]:
                q = exit_rate[s]
                biased = factor != 1.0 and level[s] >= threshold
                lo = row_ptr[s]
                hi = row_ptr[s + 1]
                if biased:
                    qb = 0.0
                    for e in range(lo, hi):
                        if is_fail[e]:
                            qb += rate[e] * factor
                        else:
                            qb += rate[e]
                else:
                    qb = q
                dt = -log1p(-uniform(&st)) / qb
                if t + dt >= horizon:
                    logw += -(q - qb) * (horizon - t)
                    t = horizon
                    censored[r] = 1
                    break
                t += dt
                logw += -(q - qb) * dt
                target = uniform(&st) * qb
                acc = 0.0
                pick = hi - 1
                for e in range(lo, hi):
                    if biased and is_fail[e]:
                        acc += rate[e] * factor
                    else:
                        acc += rate[e]
                    if target < acc:
                        pick = e
                        break
                if biased and is_fail[pick]:
                    logw -= log_factor
                s = dest[pick]
            times[r] = t
            weights[r] = exp(logw)
            final[r] = s
    return times_a, weights_a, final_a, censored_a


cdef inline int set_nth(int* node, int* up, int n, int state, long pick, int new_state) noexcept nogil:
    cdef int m
    cdef long seen = 0
    for m in range(n):
        if node[m] == state and (up == NULL or up[m]):
            if seen == pick:
                node[m] = new_state
                return m
            seen += 1
    return -1


def cold_full_chunk(int n, int k, double lam, double mu, double theta, double phi,
                    double omega, double[::1] deltas, double wshape, double wscale,
                    double horizon, uint64_t seed, uint64_t rep_start, Py_ssize_t count):
    times_a = np.empty(count)
    kinds_a = np.empty(count, dtype=np.int64)
    cdef double[::1] times = times_a
    cdef long long[::1] kinds = kinds_a
    cdef int* node = <int*>malloc(n * sizeof(int))
    cdef int* up = <int*>malloc(n * sizeof(int))
    cdef double* nxt = <double*>malloc(n * sizeof(double))
    cdef Stream st
    cdef Py_ssize_t r
    cdef int m, a, a_up, f_up, d_up, d, pending_down, mr, kind
    cdef long pick
    cdef double t, fail_r, det_r, rep_r, total, tr, dt, u, h
    cdef bint blocked
    if node == NULL or up == NULL or nxt == NULL:
        free(node); free(up); free(nxt)
        raise MemoryError()
    try:
        with nogil:
            for r in range(count):
                stream_init(&st, seed, rep_start + r)
                for m in range(n):
                    node[m] = 0
                    up[m] = 1
                for m in range(n):
                    nxt[m] = robot_life(&st, omega, wshape, wscale)
                t = 0.0
                kind = CENSORED
                while True:
                    a = 0
                    a_up = 0
                    f_up = 0
                    d_up = 0
                    pending_down = 0
                    d = 0
                    for m in range(n):
                        if node[m] == 0:
                            a += 1
                            a_up += up[m]
                        elif node[m] == 1:
                            f_up += up[m]
                            pending_down += 1 - up[m]
                        else:
                            d += 1
                            d_up += up[m]
                            pending_down += 1 - up[m]
                    fail_r = a * lam
                    det_r = f_up * theta
                    if a_up >= k:
                        rep_r = d_up * mu
                    else:
                        rep_r = 0.0
                    total = fail_r + det_r + rep_r
                    tr = INFINITY
                    mr = -1
                    for m in range(n):
                        if nxt[m] < tr:
                            tr = nxt[m]
                            mr = m
                    dt = -log1p(-uniform(&st)) / total
                    if t + dt >= tr or t + dt >= horizon:
                        if horizon <= tr:
                            t = horizon
                            kind = CENSORED
                            break
                        t = tr
                        if up[mr]:
                            up[mr] = 0
                            nxt[mr] = t + exponential(&st, phi)
                        else:
                            up[mr] = 1
                            nxt[mr] = t + robot_life(&st, omega, wshape, wscale)
                        continue
                    t += dt
                    u = uniform(&st) * total
                    if u < fail_r:
                        pick = <long>(uniform(&st) * a)
                        if pick >= a:
                            pick = a - 1
                        h = uniform(&st)
                        if h < deltas[a]:
                            set_nth(node, NULL, n, 0, pick, 1)
                        else:
                            blocked = d > 0 and a_up < k
                            if pending_down > 0 or blocked:
                                kind = UNAVAILABLE
                            else:
                                kind = DATA_LOSS
                            break
                    elif u < fail_r + det_r:
                        pick = <long>(uniform(&st) * f_up)
                        if pick >= f_up:
                            pick = f_up - 1
                        set_nth(node, up, n, 1, pick, 2)
                    else:
                        pick = <long>(uniform(&st) * d_up)
                        if pick >= d_up:
                            pick = d_up - 1
                        set_nth(node, up, n, 2, pick, 0)
                times[r] = t
                kinds[r] = kind
    finally:
        free(node)
        free(up)
        free(nxt)
    return times_a, kinds_a


cdef inline double harmonic(int x) noexcept nogil:
    cdef double acc = 0.0
    cdef int m
    for m in range(1, x + 1):
        acc += 1.0 / m
    return acc


cdef inline void maybe_renew(Stream* st, int m, double* beta, double* budget,
                             double* tau, double t, double wshape, double wscale) noexcept nogil:
    cdef double v = uniform(st)
    if v < 1.0 - beta[m]:
        budget[m] = weibull_count(st, wshape, wscale)
        tau[m] = t


def cold_approx_chunk(int n, int k, double lam, double mu, double theta, double phi,
                      double omega, double[::1] deltas, double wshape, double wscale,
                      double horizon, bint write_j, double[::1] binom,
                      uint64_t seed, uint64_t rep_start, Py_ssize_t count):
    times_a = np.empty(count)
    kinds_a = np.empty(count, dtype=np.int64)
    cdef double[::1] times = times_a
    cdef long long[::1] kinds = kinds_a
    cdef int nb = n + 1
    cdef double c_th = theta * theta / (theta + phi)
    cdef double c_mu = mu * mu / (mu + phi)
    cdef int* node = <int*>malloc(n * sizeof(int))
    cdef double* budget = <double*>malloc(n * sizeof(double))
    cdef double* tau = <double*>malloc(n * sizeof(double))
    cdef double* beta = <double*>malloc(n * sizeof(double))
    cdef double* psi = <double*>malloc(nb * sizeof(double))
    cdef Stream st
    cdef Py_ssize_t r
    cdef int m, a, f, d, weak, cnt, o, dead, x, top, chosen, kind
    cdef long pick
    cdef double t, det_r, wsum, rep_r, mu_z, b, wgt, inner, frac, fail_r, total
    cdef double dt, u, h, target, acc
    if node == NULL or budget == NULL or tau == NULL or beta == NULL or psi == NULL:
        free(node); free(budget); free(tau); free(beta); free(psi)
        raise MemoryError()
    try:
        with nogil:
            for r in range(count):
                stream_init(&st, seed, rep_start + r)
                for m in range(n):
                    node[m] = 0
                    budget[m] = 0.0
                    tau[m] = 0.0
                    beta[m] = 1.0
                for m in range(n):
                    budget[m] = weibull_count(&st, wshape, wscale)
                t = 0.0
                kind = CENSORED
                while True:
                    a = 0
                    f = 0
                    d = 0
                    det_r = 0.0
                    wsum = 0.0
                    weak = 0
                    for m in range(n):
                        if omega > 0.0:
                            beta[m] = gammaincc(budget[m], omega * (t - tau[m]))
                        else:
                            beta[m] = 1.0
                        if node[m] == 0:
                            a += 1
                        elif node[m] == 1:
                            f += 1
                            det_r += theta - c_th * (1.0 - beta[m])
                            if write_j:
                                wsum += 1.0 - beta[m]
                            if beta[m] < 0.5:
                                weak += 1
                        else:
                            d += 1
                            if not write_j:
                                wsum += 1.0 - beta[m]
                            if beta[m] < 0.5:
                                weak += 1
                    if det_r < 0.0:
                        det_r = 0.0
                    rep_r = 0.0
                    if d > 0:
                        mu_z = d * mu - c_mu * wsum
                        if mu_z > 0.0:
                            psi[0] = 1.0
                            cnt = 0
                            for m in range(n):
                                if node[m] == 0:
                                    b = beta[m]
                                    cnt += 1
                                    psi[cnt] = psi[cnt - 1] * b
                                    for o in range(cnt - 1, 0, -1):
                                        psi[o] = psi[o] * (1.0 - b) + psi[o - 1] * b
                                    psi[0] = psi[0] * (1.0 - b)
                            for dead in range(a + 1):
                                wgt = psi[a - dead]
                                if wgt == 0.0:
                                    continue
                                inner = 0.0
                                top = dead if dead < k else k
                                for x in range(top + 1):
                                    frac = binom[(a - dead) * nb + (k - x)] * binom[dead * nb + x] / binom[a * nb + k]
                                    if frac != 0.0:
                                        inner += frac / (1.0 / mu_z + harmonic(x) / phi)
                                rep_r += wgt * inner
                    fail_r = a * lam
                    total = fail_r + det_r + rep_r
                    dt = -log1p(-uniform(&st)) / total
                    if t + dt >= horizon:
                        t = horizon
                        kind = CENSORED
                        break
                    t += dt
                    u = uniform(&st) * total
                    if u < fail_r:
                        pick = <long>(uniform(&st) * a)
                        if pick >= a:
                            pick = a - 1
                        h = uniform(&st)
                        if h < deltas[a]:
                            set_nth(node, NULL, n, 0, pick, 1)
                        else:
                            if weak > 0:
                                kind = UNAVAILABLE
                            else:
                                kind = DATA_LOSS
                            break
                    elif u < fail_r + det_r:
                        target = uniform(&st) * det_r
                        acc = 0.0
                        chosen = -1
                        for m in range(n):
                            if node[m] == 1:
                                chosen = m
                                acc += theta - c_th * (1.0 - beta[m])
                                if target < acc:
                                    break
                        node[chosen] = 2
                        maybe_renew(&st, chosen, beta, budget, tau, t, wshape, wscale)
                    else:
                        pick = <long>(uniform(&st) * d)
                        if pick >= d:
                            pick = d - 1
                        chosen = set_nth(node, NULL, n, 2, pick, 0)
                        maybe_renew(&st, chosen, beta, budget, tau, t, wshape, wscale)
                times[r] = t
                kinds[r] = kind
    finally:
        free(node)
        free(budget)
        free(tau)
        free(beta)
        free(psi)
    return times_a, kinds_a
