"""Error-probability primitives: hard read errors, sector errors, AFR."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special

from .exceptions import ModelError

HOURS_PER_YEAR = 8760.0


def hard_error_prob(ucer: float, capacity: float) -> float:
    """Probability that reading ``capacity`` units hits an unrecoverable error.

    ``1 - (1 - ucer)**capacity`` evaluated as ``-expm1(capacity*log1p(-ucer))``
    so rates around 1e-19 keep full precision.
    """
    if not 0.0 <= ucer <= 1.0:
        raise ModelError("ucer must lie in [0, 1]")
    if capacity < 0:
        raise ModelError("capacity must be nonnegative")
    if ucer == 0.0 or capacity == 0:
        return 0.0
    if ucer == 1.0:
        return 1.0
    return -math.expm1(capacity * math.log1p(-ucer))


def uncorrectable_read_prob(eta: float, m: int) -> float:
    """Chance that at least one of ``m`` device reads fails: ``1 - (1-eta)**m``."""
    if not 0.0 <= eta <= 1.0:
        raise ModelError("eta must lie in [0, 1]")
    if m < 1:
        raise ModelError("m must be at least 1")
    if eta == 1.0:
        return 1.0
    return -math.expm1(m * math.log1p(-eta))


def combined_hard_error(epsilon: float, kappa: float) -> float:
    """Read error or static damage: ``1 - (1 - epsilon)(1 - kappa)``."""
    for name, v in (("epsilon", epsilon), ("kappa", kappa)):
        if not 0.0 <= v <= 1.0:
            raise ModelError(f"{name} must lie in [0, 1]")
    return epsilon + kappa - epsilon * kappa


@dataclass(frozen=True)
class MediaErrorParams:
    """Per-device media error description.

    Attributes
    ----------
    ucer : float
        Unrecoverable errors per unit read (bytes by default).
    capacity : float
        Units read when the whole device is scanned.
    kappa : float
        Probability that the medium is statically damaged.
    """

    ucer: float = 0.0
    capacity: float = 0.0
    kappa: float = 0.0

    @property
    def epsilon(self) -> float:
        return hard_error_prob(self.ucer, self.capacity)

    @property
    def eta(self) -> float:
        return combined_hard_error(self.epsilon, self.kappa)

    @classmethod
    def from_bits(cls, ucer_per_bit: float, capacity_bytes: float, kappa: float = 0.0):
        """Build from a per-bit error rate and a byte capacity."""
        return cls(ucer_per_bit, capacity_bytes * 8.0, kappa)


def delta_i(i: int, k: int, eta: float) -> float:
    """Probability that a read of ``i`` surviving units sees < i-k hard errors.

    This is ``1 - I_eta(i-k, k+1)`` with ``I`` the regularized incomplete beta
    function, the survival factor of an (i, k) read under per-unit error
    probability ``eta``.
    """
    if i <= k or k < 0:
        raise ModelError(f"need i > k >= 0, got i={i}, k={k}")
    if not 0.0 <= eta <= 1.0:
        raise ModelError("eta must lie in [0, 1]")
    if eta == 0.0:
        return 1.0
    if eta == 1.0:
        return 0.0
    # betaincc is the complementary regularized beta, accurate near 1
    return float(special.betaincc(i - k, k + 1, eta))


def delta_table(n: int, k: int, eta: float) -> list:
    """[Delta_0 .. Delta_n] with entries at i <= k set to 0."""
    return [delta_i(i, k, eta) if i > k else 0.0 for i in range(n + 1)]


@dataclass(frozen=True)
class SectorParams:
    """Latent sector error model inputs.

    Attributes
    ----------
    scrub_period : float
        Hours between scrubs.
    load : float
        Requests per hour touching one sector.
    write_error : float
        Probability a write leaves a bad sector.
    write_fraction : float
        Fraction of requests that are writes.
    sectors : int
        Sectors per device.
    """

    scrub_period: float
    load: float
    write_error: float
    write_fraction: float
    sectors: int = 1

    def __post_init__(self):
        if not self.scrub_period > 0:
            raise ModelError("scrub_period must be positive")
        if self.load < 0:
            raise ModelError("load must be nonnegative")
        for name in ("write_error", "write_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1]")
        if self.sectors < 1:
            raise ModelError("sectors must be at least 1")


def sector_error_probs(p: SectorParams, t: float | None = None) -> dict:
    """Sector error probabilities averaged over a scrub period and at time ``t``.

    Returns a dict with ``P_S`` (scrub-period average), ``P_S_t`` (at ``t``,
    or None) and ``P_LSE`` (at least one bad sector on the device).
    """
    per_write = p.write_error * p.write_fraction
    x = p.load * p.scrub_period
    if x == 0.0:
        frac = 0.0
    elif x < 1e-4:
        # series of 1 - (1 - e^{-x})/x, avoids cancellation
        frac = x / 2 - x * x / 6 + x**3 / 24
    else:
        frac = 1.0 - (-math.expm1(-x)) / x
    ps = frac * per_write
    ps_t = None
    if t is not None:
        if t < 0:
            raise ValueError("time must be nonnegative")
        ps_t = -math.expm1(-p.load * math.fmod(t, p.scrub_period)) * per_write
    plse = uncorrectable_read_prob(ps, p.sectors) if ps > 0 else 0.0
    return {"P_S": ps, "P_S_t": ps_t, "P_LSE": plse}


def afr(mttf_hours: float) -> dict:
    """Annualized failure rate from an MTTF in hours.

    Returns ``{"exact": 1 - exp(-8760/mttf), "linear": 8760/mttf}``.
    """
    if not mttf_hours > 0:
        raise ModelError("mttf must be positive")
    x = HOURS_PER_YEAR / mttf_hours
    return {"exact": -math.expm1(-x), "linear": x}


def failure_rate_from_afr(afr_value: float, linear: bool = False) -> float:
    """Per-hour failure rate for an annualized failure rate.

    ``linear=True`` inverts ``AFR ~ 8760/MTTF``; otherwise the exponential
    relation is inverted exactly.
    """
    if not 0.0 <= afr_value < 1.0:
        raise ModelError("AFR must lie in [0, 1)")
    if linear:
        return afr_value / HOURS_PER_YEAR
    return -math.log1p(-afr_value) / HOURS_PER_YEAR
