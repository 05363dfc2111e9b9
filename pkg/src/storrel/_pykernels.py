"""Pure-Python simulation kernels.

Operation-for-operation twin of the compiled ``_kernels`` module: same random
stream, same draw order and the same floating-point expression order, so both
backends return bit-identical results for a given seed.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaincc

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TWO_PI = 6.283185307179586
INV_2_53 = 1.0 / 9007199254740992.0

DATA_LOSS, UNAVAILABLE, CENSORED = 0, 1, 2


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _rotl(x: int, r: int) -> int:
    return ((x << r) | (x >> (64 - r))) & MASK


class Stream:
    """xoshiro256** generator keyed by (seed, replicate index)."""

    __slots__ = ("s",)

    def __init__(self, seed: int, index: int):
        x = (seed ^ _mix((index + GOLDEN) & MASK)) & MASK
        s = []
        for _ in range(4):
            x = (x + GOLDEN) & MASK
            s.append(_mix(x))
        if not any(s):
            s[0] = 1
        self.s = s

    def next64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK, 7) * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next64() >> 11) * INV_2_53

    def exponential(self, rate: float) -> float:
        return -math.log1p(-self.uniform()) / rate

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)

    def gamma(self, shape: float) -> float:
        """Marsaglia-Tsang sampler, valid for shape >= 1."""
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.uniform()
            if u < 1.0 - 0.0331 * (x * x) * (x * x):
                return d * v
            if u <= 0.0 or math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
                return d * v

    def weibull_count(self, shape: float, scale: float) -> float:
        u = self.uniform()
        m = math.ceil(scale * math.pow(-math.log1p(-u), 1.0 / shape))
        return 1.0 if m < 1.0 else float(m)


def stream_uniforms(seed, index, count):
    """First ``count`` uniforms of a replicate stream (backend cross-checks)."""
    rng = Stream(seed, index)
    return np.array([rng.uniform() for _ in range(count)])


def markov_chunk(exit_rate, row_ptr, dest, rate, is_fail, absorbing, level,
                 initial, horizon, threshold, factor, seed, rep_start, count):
    """Simulate ``count`` replicates of a CSR-encoded absorbing chain.

    Returns times, weights, final states and censored flags.
    """
    times = np.empty(count)
    weights = np.empty(count)
    final = np.empty(count, dtype=np.int64)
    censored = np.zeros(count, dtype=np.uint8)
    log_factor = math.log(factor)
    for r in range(count):
        rng = Stream(seed, rep_start + r)
        s = initial
        t = 0.0
        logw = 0.0
        while not absorbing[s]:
            q = exit_rate[s]
            biased = factor != 1.0 and level[s] >= threshold
            lo, hi = row_ptr[s], row_ptr[s + 1]
            if biased:
                qb = 0.0
                for e in range(lo, hi):
                    qb += rate[e] * factor if is_fail[e] else rate[e]
            else:
                qb = q
            dt = -math.log1p(-rng.uniform()) / qb
            if t + dt >= horizon:
                logw += -(q - qb) * (horizon - t)
                t = horizon
                censored[r] = 1
                break
            t += dt
            logw += -(q - qb) * dt
            target = rng.uniform() * qb
            acc = 0.0
            pick = hi - 1
            for e in range(lo, hi):
                acc += rate[e] * factor if (biased and is_fail[e]) else rate[e]
                if target < acc:
                    pick = e
                    break
            if biased and is_fail[pick]:
                logw -= log_factor
            s = dest[pick]
        times[r] = t
        weights[r] = math.exp(logw)
        final[r] = s
    return times, weights, final, censored


def _robot_life(rng, omega, wshape, wscale):
    if omega <= 0.0:
        return math.inf
    m = rng.weibull_count(wshape, wscale)
    return rng.gamma(m) / omega


def cold_full_chunk(n, k, lam, mu, theta, phi, omega, deltas, wshape, wscale,
                    horizon, seed, rep_start, count):
    """Cold-storage replicates with explicit robot lives and repairs.

    Node states: 0 available, 1 failed undetected, 2 detected.  Detection of a
    node needs its own robot; a repair needs the node's robot plus ``k``
    available nodes with working robots.  Returns times and kinds.
    """
    times = np.empty(count)
    kinds = np.empty(count, dtype=np.int64)
    for r in range(count):
        rng = Stream(seed, rep_start + r)
        node = [0] * n
        up = [1] * n
        nxt = [0.0] * n
        for m in range(n):
            nxt[m] = _robot_life(rng, omega, wshape, wscale)
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
            rep_r = d_up * mu if a_up >= k else 0.0
            total = fail_r + det_r + rep_r
            tr = math.inf
            mr = -1
            for m in range(n):
                if nxt[m] < tr:
                    tr = nxt[m]
                    mr = m
            dt = -math.log1p(-rng.uniform()) / total
            if t + dt >= tr or t + dt >= horizon:
                if horizon <= tr:
                    t = horizon
                    kind = CENSORED
                    break
                t = tr
                if up[mr]:
                    up[mr] = 0
                    nxt[mr] = t + rng.exponential(phi)
                else:
                    up[mr] = 1
                    nxt[mr] = t + _robot_life(rng, omega, wshape, wscale)
                continue
            t += dt
            u = rng.uniform() * total
            if u < fail_r:
                pick = int(rng.uniform() * a)
                if pick >= a:
                    pick = a - 1
                h = rng.uniform()
                if h < deltas[a]:
                    _set_nth(node, None, 0, pick, 1)
                else:
                    blocked = d > 0 and a_up < k
                    kind = UNAVAILABLE if (pending_down > 0 or blocked) else DATA_LOSS
                    break
            elif u < fail_r + det_r:
                pick = int(rng.uniform() * f_up)
                if pick >= f_up:
                    pick = f_up - 1
                _set_nth(node, up, 1, pick, 2)
            else:
                pick = int(rng.uniform() * d_up)
                if pick >= d_up:
                    pick = d_up - 1
                _set_nth(node, up, 2, pick, 0)
        times[r] = t
        kinds[r] = kind
    return times, kinds


def _set_nth(node, up, state, pick, new_state):
    """Move the ``pick``-th node in ``state`` (robot up, if ``up`` given) to ``new_state``."""
    seen = 0
    for m in range(len(node)):
        if node[m] == state and (up is None or up[m]):
            if seen == pick:
                node[m] = new_state
                return m
            seen += 1
    return -1


def _harmonic(x):
    acc = 0.0
    for m in range(1, x + 1):
        acc += 1.0 / m
    return acc


def cold_approx_chunk(n, k, lam, mu, theta, phi, omega, deltas, wshape, wscale,
                      horizon, write_j, binom, seed, rep_start, count):
    """Cold-storage replicates with exponential-tail detection and repair rates.

    Rates are evaluated from robot survival probabilities at each state entry
    and held until the next event.  ``binom`` is a flat (n+1) x (n+1) table of
    binomial coefficients.  Returns times and kinds.
    """
    times = np.empty(count)
    kinds = np.empty(count, dtype=np.int64)
    nb = n + 1
    c_th = theta * theta / (theta + phi)
    c_mu = mu * mu / (mu + phi)
    for r in range(count):
        rng = Stream(seed, rep_start + r)
        node = [0] * n
        budget = [0.0] * n
        tau = [0.0] * n
        beta = [1.0] * n
        psi = [0.0] * nb
        for m in range(n):
            budget[m] = rng.weibull_count(wshape, wscale)
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
                    beta[m] = float(gammaincc(budget[m], omega * (t - tau[m])))
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
                                inner += frac / (1.0 / mu_z + _harmonic(x) / phi)
                        rep_r += wgt * inner
            fail_r = a * lam
            total = fail_r + det_r + rep_r
            dt = -math.log1p(-rng.uniform()) / total
            if t + dt >= horizon:
                t = horizon
                kind = CENSORED
                break
            t += dt
            u = rng.uniform() * total
            if u < fail_r:
                pick = int(rng.uniform() * a)
                if pick >= a:
                    pick = a - 1
                h = rng.uniform()
                if h < deltas[a]:
                    _set_nth(node, None, 0, pick, 1)
                else:
                    kind = UNAVAILABLE if weak > 0 else DATA_LOSS
                    break
            elif u < fail_r + det_r:
                target = rng.uniform() * det_r
                acc = 0.0
                chosen = -1
                for m in range(n):
                    if node[m] == 1:
                        chosen = m
                        acc += theta - c_th * (1.0 - beta[m])
                        if target < acc:
                            break
                node[chosen] = 2
                _maybe_renew(rng, chosen, beta, budget, tau, t, wshape, wscale)
            else:
                pick = int(rng.uniform() * d)
                if pick >= d:
                    pick = d - 1
                chosen = _set_nth(node, None, 2, pick, 0)
                _maybe_renew(rng, chosen, beta, budget, tau, t, wshape, wscale)
        times[r] = t
        kinds[r] = kind
    return times, kinds


def _maybe_renew(rng, m, beta, budget, tau, t, wshape, wscale):
    """With probability 1 - beta the robot had died and comes back new."""
    v = rng.uniform()
    if v < 1.0 - beta[m]:
        budget[m] = rng.weibull_count(wshape, wscale)
        tau[m] = t
