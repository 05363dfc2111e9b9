"""Explicit MTTDL and reliability formulas.

Covers the c = 1..3 exact expressions for MDS arrays with concurrent repair,
the large repair-ratio approximation, its hard-error extension, sums of
exponentials approximating R(t), and the key-rate-vector evaluation of the
generalized chain (one failure-count state per level with extra jumps to
data loss and repairs back to full health).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ctmc import RateModel, chain_model
from .exceptions import (ConditionViolatedError, DimensionError, ModelError,
                         UnsupportedOrderError)


def _check_rates(lam, mu):
    if not lam > 0:
        raise ModelError("failure rate must be positive")
    if mu < 0:
        raise ModelError("repair rate must be nonnegative")


def mttdl_exact(m: int, c: int, lam: float, mu: float) -> float:
    """Exact MTTDL of an (m+c, m) array with concurrent repair, c <= 3.

    Parameters
    ----------
    m : int
        Data devices.
    c : int
        Parity devices, 1, 2 or 3.
    lam, mu : float
        Per-device failure and repair rates (per hour).
    """
    _check_rates(lam, mu)
    if m < 1:
        raise ModelError("m must be at least 1")
    l, u = float(lam), float(mu)
    if c == 1:
        return (u + l * (2 * m + 1)) / (l**2 * m * (m + 1))
    if c == 2:
        num = 2 * u * u + u * l * (5 * m + 6) + l * l * (3 * m * m + 6 * m + 2)
        return num / (l**3 * m * (m + 1) * (m + 2))
    if c == 3:
        num = (6 * u**3 + u * u * l * (17 * m + 33)
               + u * l * l * (14 * m * m + 47 * m + 33)
               + 2 * l**3 * (2 * m**3 + 9 * m * m + 11 * m + 3))
        return num / (l**4 * m * (m + 1) * (m + 2) * (m + 3))
    raise UnsupportedOrderError(
        f"no closed form for c={c}; use ctmc.mttdl_linear_solve or mttdl_general")


def omega_ratio(lam: float, mu: float) -> float:
    """Repair-to-failure ratio mu/lam.

    Not to be confused with :attr:`storrel.coldstore.ColdModel.exchange_rate`,
    the robot exchange rate of the cold-storage model.
    """
    _check_rates(lam, mu)
    return mu / lam


def mttdl_simple(n: int, c: int, lam: float, mu: float) -> float:
    """Leading-order MTTDL ``omega**c / (lam (n-c) C(n, c))``, omega = mu/lam."""
    _check_rates(lam, mu)
    if not 0 <= c < n:
        raise ModelError("need 0 <= c < n")
    ratio = omega_ratio(lam, mu)
    if c > 0 and ratio < 100:
        warnings.warn("repair/failure ratio below 100; approximation is loose",
                      RuntimeWarning, stacklevel=2)
    return ratio**c / (lam * (n - c) * math.comb(n, c))


def mttdl_hard_error(n: int, c: int, lam: float, mu: float, eta: float) -> float:
    """Approximate MTTDL when rebuild reads can hit unrecoverable errors.

    ``c! omega**c / (n (n-1) ... (n-c) (lam + eta mu))``.
    """
    _check_rates(lam, mu)
    if not 0 < c < n:
        raise ModelError("need 0 < c < n")
    if n * eta > 0.5:
        warnings.warn("n*eta > 0.5; hard-error approximation is loose",
                      RuntimeWarning, stacklevel=2)
    falling = math.prod(range(n - c, n + 1))
    return math.factorial(c) * omega_ratio(lam, mu) ** c / (falling * (lam + eta * mu))


def _reliability_terms(m, c, lam, mu):
    """(coefficient, decay rate) pairs; the leading term is returned first."""
    omega = omega_ratio(lam, mu)
    lead = mttdl_exact(m, c, lam, mu) if c else 1.0 / (m * lam)
    if c == 0:
        return 0.0, [(1.0, m * lam)]
    harm = sum(1.0 / i for i in range(1, c + 1))
    delta = harm * m * math.comb(m + c, c) * omega ** (-c - 1)
    rising = math.prod(range(m, m + c + 1))  # m (m+1) ... (m+c)
    x = lam / mu
    if c == 1:
        rest = [(-x**2 * m * (m + 1), mu + lam * (2 * m + 1))]
    elif c == 2:
        rest = [(-rising * x**3, mu + lam * (2 * m + 3)),
                (-rising * x**3 / 4, 2 * mu + lam * m)]
    else:
        rest = [(-rising * x**4 / 2, mu + lam * (2 * m + 5)),
                (-rising * x**4 / 4, 2 * mu + lam * (m + 1)),
                (-rising * x**4 / 18, 3 * mu + lam * m)]
    return delta, [(1.0 + delta, 1.0 / lead)] + rest


def unreliability_approx(m: int, c: int, lam: float, mu: float, t: float) -> float:
    """``1 - R_c(t)`` from the sum-of-exponentials approximation.

    Evaluated as ``-expm1(-t/M) - delta e^{-t/M} - sum C_i e^{-a_i t}`` so
    that loss probabilities far below machine epsilon survive.
    """
    if c not in (0, 1, 2, 3):
        raise UnsupportedOrderError(f"reliability approximation covers c <= 3, got {c}")
    _check_rates(lam, mu if c else 0.0)
    if t < 0:
        raise ValueError("time must be nonnegative")
    delta, terms = _reliability_terms(m, c, lam, mu)
    lead_rate = terms[0][1]
    loss = -math.expm1(-lead_rate * t) - delta * math.exp(-lead_rate * t)
    loss -= sum(coef * math.exp(-rate * t) for coef, rate in terms[1:])
    return min(1.0, max(0.0, loss))


def reliability_approx(m: int, c: int, lam: float, mu: float, t: float) -> float:
    """Sum-of-exponentials approximation of R(t) for c = 0..3, clamped to [0, 1]."""
    if c == 0:
        _check_rates(lam, 0.0)
        return math.exp(-m * lam * t)
    return 1.0 - unreliability_approx(m, c, lam, mu, t)


# ---------------------------------------------------------------------------
# generalized chain

@dataclass(frozen=True)
class GeneralRates:
    """Rates of the generalized chain with c+1 transient states.

    State i exits by ``lambdas[i]`` to i+1 (to data loss from state c), by
    ``gammas[i]`` straight to data loss and by ``mus[i-1]`` back to state 0.
    ``gammas[c]`` is ignored by the chain.
    """

    lambdas: tuple
    gammas: tuple
    mus: tuple

    def __post_init__(self):
        lams = tuple(float(v) for v in self.lambdas)
        gams = tuple(float(v) for v in self.gammas)
        mus = tuple(float(v) for v in self.mus)
        c = len(lams) - 1
        if c < 0 or len(gams) != c + 1 or len(mus) != c:
            raise DimensionError("need c+1 lambdas, c+1 gammas and c mus")
        if any(not v >= 0 for v in lams + gams + mus):
            raise ModelError("rates must be nonnegative")
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "gammas", gams)
        object.__setattr__(self, "mus", mus)

    @property
    def c(self) -> int:
        return len(self.lambdas) - 1

    def exit_totals(self) -> np.ndarray:
        c = self.c
        out = np.array(self.lambdas)
        out[:c] += self.gammas[:c]
        out[1:] += self.mus
        return out

    def to_rate_model(self) -> RateModel:
        c = self.c
        return chain_model(self.lambdas, list(self.gammas[:c]) + [0.0], self.mus)


def repair_vector(c: int, mu: float, policy: str = "homogeneous") -> tuple:
    """Repair rates mu_0..mu_{c-1}: constant (HR) or (i+1) mu (PR)."""
    if policy in ("homogeneous", "HR"):
        return tuple(mu for _ in range(c))
    if policy in ("progressive", "PR"):
        return tuple((i + 1) * mu for i in range(c))
    raise ValueError(f"unknown repair policy {policy!r}")


def canonical_rates(m: int, c: int, lam: float, mu: float,
                    policy: str = "progressive") -> GeneralRates:
    n = m + c
    return GeneralRates(tuple((n - i) * lam for i in range(c + 1)),
                        (0.0,) * (c + 1), repair_vector(c, mu, policy))


def hard_error_rates(m: int, c: int, lam: float, mu: float, eta: float,
                     policy: str = "homogeneous") -> GeneralRates:
    """MDS chain where a failure in the last-redundancy state may hit a read error.

    The failure out of state c-1 (m+1 survivors) goes to data loss with the
    probability that rebuilding from m devices meets an unrecoverable read.
    """
    from .errors import uncorrectable_read_prob

    n = m + c
    lams = [(n - i) * lam for i in range(c + 1)]
    gams = [0.0] * (c + 1)
    if c >= 1:
        gams[c - 1] = lams[c - 1] * uncorrectable_read_prob(eta, m)
        lams[c - 1] -= gams[c - 1]
    return GeneralRates(tuple(lams), tuple(gams), repair_vector(c, mu, policy))


def leading_zero_gammas(rates: GeneralRates) -> int:
    z = 0
    for g in rates.gammas[: rates.c]:
        if g != 0.0:
            break
        z += 1
    return z


def xi3_condition_holds(rates: GeneralRates) -> bool:
    """True when the third-order correction term is the whole story.

    The correction used by ``exact-xi3`` only accounts for one direct
    loss jump three levels back; it is exact when gamma_0..gamma_{c-4} vanish.
    """
    return leading_zero_gammas(rates) >= rates.c - 3


def key_rate_vector(rates: GeneralRates, x: int) -> np.ndarray:
    """Lambda_x(j) = lambda_j, plus the state's other exits for j >= x."""
    c = rates.c
    add = np.array([rates.gammas[0]] +
                   [rates.mus[j - 1] + rates.gammas[j] for j in range(1, c)] +
                   ([rates.mus[c - 1]] if c else []))
    if c == 0:
        add = np.array([0.0])
    vec = np.array(rates.lambdas, dtype=float)
    vec[x:] += add[x:]
    return vec


def _prod(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 1.0
    if np.any(values == 0.0):
        return 0.0
    # log-space accumulation keeps long products away from underflow
    return float(np.exp(np.sum(np.log(values))))


def _phi_recursive(lams, gams, mus, with_xi: bool) -> float:
    # Track rest_t = phi_t - prod(lams[:t+1]) instead of phi_t itself: the
    # recursion for rest_t only adds nonnegative terms, whereas the direct form
    # subtracts nearly equal numbers and loses ~6 digits per level.
    c = len(lams) - 1
    rest = 0.0
    for t in range(1, c + 1):
        xi = 0.0
        if with_xi and t >= 3:
            xi = gams[t - 3] * mus[t - 3] * _prod(lams[: t - 3])
        inner = rest + gams[t - 1] * (
            _prod([gams[i] + lams[i] for i in range(t - 1)]) + xi)
        rest = (mus[t - 1] + lams[t]) * inner
    return _prod(lams) + rest


def _regenerative(rates: GeneralRates, scale: float):
    """Per-state occupancy from one excursion away from full health.

    Each excursion from state 0 climbs i -> i+1 until it is repaired back or
    absorbed.  Occupancy = (expected time per excursion) / P(absorb per
    excursion); every term is a product or sum of nonnegative numbers.
    """
    c = rates.c
    lams = np.array(rates.lambdas) / scale
    out = rates.exit_totals() / scale
    reach = 1.0
    occupancy = np.empty(c + 1)
    absorb = 0.0
    for i in range(c + 1):
        occupancy[i] = reach / out[i]
        direct = rates.gammas[i] / scale if i < c else lams[c]
        absorb += reach * direct / out[i]
        if i < c:
            reach *= lams[i] / out[i]
    return occupancy / absorb / scale


def mttdl_general(rates: GeneralRates, mode: str = "approx",
                  return_states: bool = False):
    """MTTDL of the generalized chain through its key rate vectors.

    Each occupancy is ``prod_{j != x} Lambda_x(j) / phi_c``, and MTTDL is the
    sum over x.

    Parameters
    ----------
    rates : GeneralRates
    mode : {"approx", "exact-xi3", "exact"}
        ``approx`` runs the phi recursion without the third-order correction
        term and slightly overestimates.  ``exact-xi3`` adds the correction,
        which is exact when gamma_0..gamma_{c-4} vanish, and raises
        ConditionViolatedError otherwise.  ``exact`` takes phi_c as the
        determinant of the coefficient matrix, evaluated without
        subtractions through the excursion decomposition.
    return_states : bool
        Also return the per-state occupancies, full health first.

    Returns
    -------
    float or (float, ndarray)
    """
    c = rates.c
    totals = rates.exit_totals()
    if np.any(totals <= 0.0):
        raise ModelError("every state needs a positive exit rate")
    if rates.lambdas[c] <= 0.0 and not any(rates.gammas[:c]):
        raise ModelError("data loss is unreachable")
    scale = float(max(totals))
    if mode == "exact":
        occ = _regenerative(rates, scale)
    elif mode in ("approx", "exact-xi3"):
        if mode == "exact-xi3" and not xi3_condition_holds(rates):
            raise ConditionViolatedError(
                f"gamma prefix condition fails: need gamma_0..gamma_{c - 4} = 0")
        lams = [v / scale for v in rates.lambdas]
        gams = [v / scale for v in rates.gammas]
        mus = [v / scale for v in rates.mus]
        phi = _phi_recursive(lams, gams, mus, with_xi=(mode == "exact-xi3"))
        if not phi > 0.0:
            raise ModelError("recursion produced a nonpositive determinant")
        scaled = GeneralRates(tuple(lams), tuple(gams), tuple(mus))
        occ = np.empty(c + 1)
        for x in range(c + 1):
            vec = key_rate_vector(scaled, x)
            occ[x] = _prod(np.delete(vec, x)) / phi
        occ = occ / scale
    else:
        raise ValueError(f"unknown mode {mode!r}")
    total = float(occ.sum())
    return (total, occ) if return_states else total
