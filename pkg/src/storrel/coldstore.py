"""Cold-storage (tape library) reliability model.

Every node (library) is in one of ``s`` node states.  With ``s = 3`` these are
available (A), failed but undetected (F) and detected, under repair (D); the
system state is the count vector ``(a, f, d)`` plus one absorbing data-loss
state.  Each node has a robot ("carrier") that dies after a random number of
exchanges; detection and repair need working robots, so their effective rates
depend on robot survival probabilities.

Rates are per hour.  ``exchange_rate`` is the robot exchange rate (exchanges
per hour), kept apart from the repair-to-failure ratio used elsewhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb
from typing import Sequence

import numpy as np
from scipy import special

from . import ctmc
from .errors import MediaErrorParams, delta_i
from .exceptions import ModelError, OutOfRangeError

EULER_GAMMA = 0.5772156649015329
HARMONIC_EXACT_LIMIT = 10**6
ABSORBED = "F"


# -- state space -----------------------------------------------------------------

def n_states(n: int, k: int, s: int) -> int:
    """Number of system states including the absorbing one."""
    _check_nks(n, k, s)
    return comb(n - k + s - 1, n - k) + 1


def _check_nks(n, k, s):
    if not n > k >= 1:
        raise ModelError(f"need n > k >= 1, got n={n}, k={k}")
    if s < 2:
        raise ModelError("need at least two node states")


def enumerate_states(n: int, k: int, s: int = 3):
    """All count vectors with ``a >= k`` available nodes, then ``"F"``.

    Vectors are ordered by the number of unavailable nodes and then by the
    trailing counts (last node state varying slowest), which for ``s = 3``
    is the order of :func:`state_index`.

    Returns
    -------
    (list, int)
        State list and its length.
    """
    _check_nks(n, k, s)
    out = []
    for down in range(n - k + 1):
        tails = []
        # distribute `down` nodes over the s-1 non-available node states
        for combo in combinations_with_replacement(range(s - 1), down):
            tails.append(tuple(combo.count(b) for b in range(s - 1)))
        tails.sort(key=lambda t: tuple(reversed(t)))
        out.extend((n - down,) + t for t in tails)
    out.append(ABSORBED)
    return out, len(out)


def state_index(state, n: int) -> int:
    """Pairing index ``C(n-a+1, 2) + d + 1`` of an ``(a, f, d)`` state (1-based)."""
    a, f, d = state
    if min(a, f, d) < 0 or a + f + d != n:
        raise OutOfRangeError(f"{state} is not a state of an n={n} system")
    return comb(n - a + 1, 2) + d + 1


def index_to_state(index: int, n: int, k: int) -> tuple:
    """Inverse of :func:`state_index` over states with ``a >= k``."""
    top = comb(n - k + 1, 2) + (n - k) + 1
    if not 1 <= index <= top:
        raise OutOfRangeError(f"index {index} outside [1, {top}]")
    # largest down-count whose block starts before the index
    down = max(x for x in range(n - k + 1) if index > x * (x + 1) // 2)
    d = index - down * (down + 1) // 2 - 1
    return (n - down, down - d, d)


def ns_bounds(n: int, k: int, s: int) -> dict:
    """Exact state count with a lower and an upper bound.

    All three count the absorbing state.  ``lower = sum_{j<s} C(n-k+1, j)``
    is tight for ``s`` in {2, 3}; ``upper = C(s+n-k, s-1)``.
    """
    exact = n_states(n, k, s)
    lower = sum(comb(n - k + 1, j) for j in range(s))
    upper = comb(s + n - k, s - 1)
    return {"lower": lower, "exact": exact, "upper": upper}


# -- robot survival and availability -----------------------------------------------

def carrier_survival(remaining, exchange_rate: float, t):
    """Probability that a robot with ``remaining`` exchanges left survives ``t`` hours.

    Exchanges arrive at ``exchange_rate`` per hour, so the robot life is
    Gamma(remaining, exchange_rate) and the survival is the upper regularized
    incomplete gamma function ``Q(remaining, exchange_rate * t)``.
    """
    remaining = np.asarray(remaining, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(remaining < 1) or np.any(t < 0) or not exchange_rate > 0:
        raise ModelError("need remaining >= 1, t >= 0 and exchange_rate > 0")
    out = special.gammaincc(remaining, exchange_rate * t)
    return float(out) if out.ndim == 0 else out


def poisson_binomial_pmf(betas: Sequence[float]) -> np.ndarray:
    """Distribution of the number of successes by direct convolution."""
    pmf = np.ones(1)
    for b in betas:
        pmf = np.convolve(pmf, [1.0 - b, b])
    return pmf


def available_carriers_dist(betas: Sequence[float], n: int | None = None,
                            roots: str = "n+1") -> np.ndarray:
    """Distribution of the number of working robots among ``len(betas)`` nodes.

    Evaluated with the discrete Fourier transform of the Poisson-binomial
    generating function.  ``roots="n+1"`` uses the ``n + 1`` roots of unity of
    an ``n``-node system; ``roots="i+1"`` uses the minimal set.  Any number of
    roots above ``len(betas)`` inverts exactly.

    Returns
    -------
    numpy.ndarray
        ``psi[o]`` for o = 0..len(betas), tiny negative values clamped to 0.
    """
    b = np.asarray(betas, dtype=float)
    if np.any((b < 0) | (b > 1)):
        raise ModelError("survival probabilities must lie in [0, 1]")
    i = b.size
    if roots == "n+1":
        if n is None:
            n = i
        if n < i:
            raise ModelError("n must be at least the number of nodes")
        size = n + 1
    elif roots == "i+1":
        size = i + 1
    else:
        raise ValueError("roots must be 'n+1' or 'i+1'")
    w = np.exp(2j * np.pi * np.arange(size) / size)
    gen = np.prod(1.0 + np.outer(w - 1.0, b), axis=1) if i else np.ones(size, complex)
    pmf = np.fft.fft(gen).real[: i + 1] / size
    return np.where(np.abs(pmf) < 1e-12, np.maximum(pmf, 0.0), pmf).clip(min=0.0)


@lru_cache(maxsize=64)
def _harmonic_exact(x: int) -> float:
    return float(np.sum(1.0 / np.arange(x, 0, -1, dtype=float)))


def harmonic_sum(x: int) -> float:
    """``sum_{m=1}^x 1/m``; exact summation up to 10**6, asymptotic series above."""
    x = int(x)
    if x < 0:
        raise ModelError("x must be nonnegative")
    if x == 0:
        return 0.0
    if x <= HARMONIC_EXACT_LIMIT:
        return _harmonic_exact(x)
    return harmonic_asymptotic(x)


def harmonic_asymptotic(x: float) -> float:
    return (math.log(x) + EULER_GAMMA + 1.0 / (2 * x) - 1.0 / (12 * x**2)
            + 1.0 / (120 * x**4))


def exp_tail_rate(phi: float, thetas: Sequence[float] = ()) -> float:
    """Rate of the exponential matching the mean of a sum of exponentials."""
    if not phi > 0 or any(not th > 0 for th in thetas):
        raise ModelError("rates must be positive")
    return 1.0 / (1.0 / phi + sum(1.0 / th for th in thetas))


def detection_rate(j: int, phi: float, theta: float, betas: Sequence[float]) -> float:
    """Effective detection rate with ``j`` undetected failures.

    ``betas`` holds the robot survival probabilities of those ``j`` nodes.
    A node whose robot is down first waits for the robot repair (rate
    ``phi``), which the exponential-tail rate folds into one exponential.
    """
    if len(betas) != j:
        raise ModelError("need one survival probability per failed node")
    if math.isinf(phi):
        return j * theta
    loss = theta * theta / (theta + phi)
    return j * theta - loss * float(np.sum(1.0 - np.asarray(betas, dtype=float)))


def write_rate(z: int, phi: float, mu: float, writer_betas: Sequence[float]) -> float:
    """Rate at which ``z`` detected nodes finish writing, before helper waits."""
    if math.isinf(phi):
        return z * mu
    loss = mu * mu / (mu + phi)
    return max(z * mu - loss * float(np.sum(1.0 - np.asarray(writer_betas, dtype=float))), 0.0)


def repair_rate(i: int, z: int, phi: float, mu: float, k: int,
                available_betas: Sequence[float], writer_betas: Sequence[float],
                n: int | None = None) -> float:
    """Effective repair rate in a state with ``i`` available and ``z`` detected nodes.

    The ``k`` helpers are drawn without replacement from the ``i`` available
    nodes, ``l`` of which have a dead robot (distribution from
    ``available_betas``).  Drawing ``x`` dead-robot helpers adds a wait of
    mean ``hs(x)/phi`` for the slowest robot repair.

    Parameters
    ----------
    writer_betas : sequence of float
        Survival probabilities of the nodes whose robots do the writing;
        normally the ``z`` detected nodes (see :class:`ColdModel`
        ``write_sum`` for the alternative).
    """
    if z == 0:
        return 0.0
    if not k <= i:
        raise ModelError("repair needs at least k available nodes")
    if len(available_betas) != i:
        raise ModelError("need one survival probability per available node")
    mu_z = write_rate(z, phi, mu, writer_betas)
    if mu_z <= 0.0:
        return 0.0
    if math.isinf(phi):
        return mu_z
    psi = available_carriers_dist(available_betas, n=n)
    total = comb(i, k)
    rate = 0.0
    for dead in range(i + 1):
        weight = psi[i - dead]
        if weight == 0.0:
            continue
        inner = 0.0
        for x in range(min(dead, k) + 1):
            frac = comb(i - dead, k - x) * comb(dead, x) / total
            if frac:
                inner += frac / (1.0 / mu_z + harmonic_sum(x) / phi)
        rate += weight * inner
    return rate


# -- model and bounds ------------------------------------------------------------------

@dataclass(frozen=True)
class ColdModel:
    """Parameters of an (n, k) MDS code spread over ``n`` tape libraries.

    Attributes
    ----------
    n, k : int
        Code length and dimension.
    lam, mu, theta, phi : float
        Node failure, node repair, failure detection and robot repair rates.
    exchange_rate : float
        Robot exchanges per hour; 0 means robots never wear out.
    errors : MediaErrorParams
        Read and media-damage error description, giving ``eta``.
    weibull_shape, weibull_scale : float
        Distribution of exchanges a robot makes before it fails.
    write_sum : {"z", "j"}
        Which nodes' robots enter the write-rate correction: the ``z``
        detected nodes (default) or the ``j`` undetected ones.
    """

    n: int
    k: int
    lam: float = 1.0 / 50000
    mu: float = 1.0 / 24
    theta: float = 1.0 / 8760
    phi: float = 1.0 / 48
    exchange_rate: float = 10.0
    errors: MediaErrorParams = MediaErrorParams(1e-19, 6e12, 0.001)
    weibull_shape: float = 0.67
    weibull_scale: float = 525985.0
    s: int = 3
    write_sum: str = "z"

    def __post_init__(self):
        _check_nks(self.n, self.k, self.s)
        for name in ("lam", "mu", "theta", "phi"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be positive")
        if self.exchange_rate < 0:
            raise ModelError("exchange_rate must be nonnegative")
        if not (self.weibull_shape > 0 and self.weibull_scale > 0):
            raise ModelError("Weibull parameters must be positive")
        if self.write_sum not in ("z", "j"):
            raise ModelError("write_sum must be 'z' or 'j'")

    @property
    def eta(self) -> float:
        return self.errors.eta

    def deltas(self) -> list:
        """Survival factors of a failure in a state with ``i`` available nodes."""
        return [0.0 if i <= self.k else delta_i(i, self.k, self.eta)
                for i in range(self.n + 1)]

    def replace(self, **kw) -> "ColdModel":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "lam": self.lam, "mu": self.mu,
                "theta": self.theta, "phi": self.phi,
                "exchange_rate": self.exchange_rate, "ucer": self.errors.ucer,
                "capacity": self.errors.capacity, "kappa": self.errors.kappa,
                "eta": self.eta, "weibull_shape": self.weibull_shape,
                "weibull_scale": self.weibull_scale, "write_sum": self.write_sum}


def lower_bound(model: ColdModel) -> float:
    """Mean time to loss when robots never work, so nothing is detected or repaired.

    The system walks down ``n, n-1, ..., k`` available nodes; a failure at
    ``i`` nodes ends in loss with probability ``1 - Delta_i``.
    """
    n, k = model.n, model.k
    deltas = model.deltas()
    hs_n = harmonic_sum(n)
    total = 0.0
    survive = 1.0  # product of Delta_j for j > i
    for i in range(n, k - 1, -1):
        total += (1.0 - deltas[i]) * survive * (hs_n - harmonic_sum(i - 1)) / model.lam
        survive *= deltas[i]
    return total


def no_carrier_model(model: ColdModel) -> ctmc.RateModel:
    """Chain over ``(a, f, d)`` states with hard errors and always-working robots."""
    n, k = model.n, model.k
    states, _ = enumerate_states(n, k, 3)
    index = {st: pos for pos, st in enumerate(states)}
    fail = index[ABSORBED]
    deltas = model.deltas()
    trans = []
    for st in states[:-1]:
        a, f, d = st
        src = index[st]
        go = a * model.lam
        if a > k:
            trans.append((src, index[(a - 1, f + 1, d)], go * deltas[a]))
        trans.append((src, fail, go * (1.0 - deltas[a])))
        if f:
            trans.append((src, index[(a, f - 1, d + 1)], f * model.theta))
        if d:
            trans.append((src, index[(a + 1, f, d - 1)], d * model.mu))
    labels = [s if s == ABSORBED else f"{s[0]}A{s[1]}F{s[2]}D" for s in states]
    levels = [n - k + 1 if s == ABSORBED else n - s[0] for s in states]
    return ctmc.RateModel.build(labels, trans, 0, [fail], levels=levels)


def upper_bound(model: ColdModel, method: str = "gth") -> float:
    """Mean time to loss with always-available robots (fundamental-matrix route)."""
    return ctmc.fundamental_matrix_mttdl(no_carrier_model(model), method).mttdl
