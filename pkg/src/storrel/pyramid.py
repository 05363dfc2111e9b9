"""Pyramid codes: read overhead, overhead-driven repair rates and MTTDL.

Repair speed is tied to the average read overhead through a logarithmic
mapping: a code that reads fewer blocks per repaired block repairs faster
than the MDS code it is derived from.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import Callable, Sequence

from . import closedform, ctmc
from .exceptions import DimensionError, ModelError
from .profile import rates_from_survival_ratios

DATA_FILE = Path(__file__).with_name("data") / "table41.json"


@dataclass(frozen=True)
class CodeCharacteristics:
    """Recoverability fractions ``q_j`` and average read overheads ``chi_j``.

    Index j is the number of failed blocks, from 0 to the code redundancy.
    ``read_overhead=None`` marks an MDS code, whose overheads are computed.
    """

    name: str
    recoverability: tuple
    read_overhead: tuple | None = None

    def __post_init__(self):
        q = tuple(float(v) for v in self.recoverability)
        if not q or abs(q[0] - 1.0) > 1e-12:
            raise ModelError("recoverability must start at 1")
        if any(not 0.0 <= v <= 1.0 for v in q):
            raise ModelError("recoverability values must lie in [0, 1]")
        if any(b > a + 1e-12 for a, b in zip(q, q[1:])):
            raise ModelError("recoverability must be nonincreasing")
        object.__setattr__(self, "recoverability", q)
        if self.read_overhead is not None:
            chi = tuple(float(v) for v in self.read_overhead)
            if len(chi) != len(q):
                raise DimensionError("one read overhead per recoverability value")
            if abs(chi[0] - 1.0) > 1e-12 or any(v < 1.0 for v in chi):
                raise ModelError("read overheads must be >= 1, starting at 1")
            object.__setattr__(self, "read_overhead", chi)

    @property
    def is_mds(self) -> bool:
        return self.read_overhead is None

    def overheads(self, n: int, k: int) -> list:
        if self.is_mds:
            return [avg_read_overhead_mds(n, k, j) for j in range(len(self.recoverability))]
        return list(self.read_overhead)

    @classmethod
    def from_dict(cls, doc: dict, mds: bool = False) -> "CodeCharacteristics":
        """Build from ``{"name", "recoverability_percent", "read_overhead"}``."""
        q = [v / 100.0 for v in doc["recoverability_percent"]]
        chi = None if mds else doc.get("read_overhead")
        return cls(doc.get("name", "code"), tuple(q), None if chi is None else tuple(chi))


def load_table41(path=None) -> dict:
    """Bundled code characteristics keyed by ``mds``, ``bpc``, ``gpc``, ``gpc_local``.

    The MDS entry carries computed overheads; its printed (rounded) row is
    kept under ``doc["codes"]["mds"]`` for comparison.
    """
    doc = json.loads(Path(path or DATA_FILE).read_text())
    return {key: CodeCharacteristics.from_dict(entry, mds=(key == "mds"))
            for key, entry in doc["codes"].items()}


def load_table41_document(path=None) -> dict:
    return json.loads(Path(path or DATA_FILE).read_text())


def avg_read_overhead_mds(n: int, k: int, j: int) -> float:
    """Average blocks read per data block of an (n, k) MDS code with ``j`` failures.

    A lost data block costs ``k`` reads; with ``i`` of the ``j`` failures
    hitting data blocks the overhead is ``(i k + k - i)/k``, averaged over
    the hypergeometric split of failures.
    """
    if not n > k >= 1:
        raise ModelError("need n > k >= 1")
    if not 0 <= j <= n:
        raise ModelError(f"need 0 <= j <= n, got {j}")
    total = comb(n, j)
    acc = 0
    for i in range(j + 1):
        acc += (i * k + k - i) * comb(n - k, j - i) * comb(k, i)
    return acc / (k * total)


def log_mapping(x: float) -> float:
    """Default overhead-to-cost mapping ``ln(x)``."""
    if not x > 1.0:
        raise ModelError(f"overhead argument {x} must exceed 1 for the log mapping")
    return math.log(x)


def repair_rates_from_overhead(mu: float, delta: float, code: CodeCharacteristics,
                               mds_phi: Sequence[float],
                               mapping: Callable[[float], float] = log_mapping) -> list:
    """Repair rate out of each degraded state, ``mu_0 .. mu_{c-1}``.

    The MDS reference rate is ``delta mu mapping((j+1) Phi_{j+1})`` and the
    code's rate divides it by ``mapping((j+1) chi_{j+1})``.
    """
    if delta < 1:
        raise ModelError("delta must be at least 1")
    chi = list(mds_phi) if code.is_mds else list(code.read_overhead)
    c = len(code.recoverability) - 1
    if len(mds_phi) < c + 1 or len(chi) < c + 1:
        raise DimensionError("overhead vectors shorter than the code table")
    return [delta * mu * mapping((j + 1) * mds_phi[j + 1]) / mapping((j + 1) * chi[j + 1])
            for j in range(c)]


def pyramid_rates(code: CodeCharacteristics, n: int, k: int, lam: float, mu: float,
                  delta: float, eta: float, mapping=log_mapping) -> closedform.GeneralRates:
    """Generalized-chain rates for a code table (recoverability beyond c is 0)."""
    q = list(code.recoverability)
    c = n - k
    if len(q) != c + 1:
        raise DimensionError(f"code table must cover 0..{c} failures")
    q.append(0.0)
    ratios = [q[j + 1] / q[j] if q[j] > 0 else None for j in range(c + 1)]
    rates = rates_from_survival_ratios(ratios, lam, eta, n, k)
    phi = [avg_read_overhead_mds(n, k, j) for j in range(c + 1)]
    mus = repair_rates_from_overhead(mu, delta, code, phi, mapping)
    return closedform.GeneralRates(tuple(rates["lambdas"]), tuple(rates["gammas"]), tuple(mus))


def pyramid_mttdl(code: CodeCharacteristics, n: int, k: int, lam: float, mu: float,
                  delta: float, eta: float, mode: str = "exact",
                  horizon: float = ctmc.HOURS_PER_YEAR, mapping=log_mapping) -> dict:
    """MTTDL (hours) and one-year nines of a code table.

    Returns
    -------
    dict
        ``mttdl``, ``nines`` and the ``rates`` used.
    """
    rates = pyramid_rates(code, n, k, lam, mu, delta, eta, mapping)
    mttdl = closedform.mttdl_general(rates, mode=mode)
    return {"mttdl": mttdl, "nines": ctmc.durability_nines(mttdl, horizon), "rates": rates}


def table42(mu: float = 1.0 / 168, eta: float = 1e-3, delta: float = 20.0,
            mds_delta: float = 1.0, lambdas=(1 / 200000, 1 / 500000, 1 / 1200000),
            path=None) -> dict:
    """MTTDL and nines of every bundled code at each failure rate.

    The MDS reference uses ``mds_delta`` (1, the normalization point of the
    bandwidth constant); pyramid codes use ``delta``.
    """
    doc = load_table41_document(path)
    codes = load_table41(path)
    n, k = doc["n"], doc["k"]
    out = {}
    for key, code in codes.items():
        d = mds_delta if code.is_mds else delta
        out[key] = [pyramid_mttdl(code, n, k, lam, mu, d, eta) for lam in lambdas]
    return out
