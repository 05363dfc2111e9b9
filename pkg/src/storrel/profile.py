"""Fault-tolerance profiles.

A profile records, for every failure count k, how many of the C(n, k)
failure sets the system survives (``s``), the surviving fraction (``q``) and
the chance of surviving one more failure given k (``p``).  Profiles come from
MDS array farms, 2D product arrays, mirrored arrays or an arbitrary binary
generator matrix, and convert into rates for the generalized chain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Sequence

from .exceptions import (DimensionError, NegativeRateError, OutOfRangeError,
                         ParseError, RankDeficientError)


@dataclass(frozen=True)
class FaultProfile:
    """Tolerable-failure counts of an ``n_total``-device system.

    ``s[k]`` is None where the count is unknown (partial profiles).
    """

    n_total: int
    s: tuple

    def __post_init__(self):
        s = tuple(None if v is None else int(v) for v in self.s)
        if len(s) > self.n_total + 1:
            raise DimensionError("profile longer than n_total + 1")
        for k, v in enumerate(s):
            if v is not None and not 0 <= v <= comb(self.n_total, k):
                raise DimensionError(f"s_{k}={v} outside [0, C(n,k)]")
        object.__setattr__(self, "s", s)

    def q_exact(self, k: int):
        if k > self.n_total:
            return Fraction(0)
        v = self.s[k] if k < len(self.s) else 0
        return None if v is None else Fraction(v, comb(self.n_total, k))

    @property
    def q(self) -> list:
        return [None if self.q_exact(k) is None else float(self.q_exact(k))
                for k in range(len(self.s))]

    @property
    def p(self) -> list:
        """p_k = q_{k+1}/q_k, None where q_k is zero or unknown."""
        out = []
        for k in range(len(self.s)):
            qk, qn = self.q_exact(k), self.q_exact(k + 1)
            out.append(None if not qk or qn is None else float(qn / qk))
        return out

    @property
    def max_tolerable(self) -> int:
        """Largest k with s_k > 0."""
        return max(k for k, v in enumerate(self.s) if v)

    def to_dict(self) -> dict:
        return {"n_total": self.n_total,
                "s": [None if v is None else str(v) for v in self.s],
                "q": self.q, "p": self.p}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_recoverability(cls, n_total: int, q: Sequence[float]) -> "FaultProfile":
        """Profile from recoverability fractions, rounding s_k to integers."""
        return cls(n_total, tuple(round(v * comb(n_total, k)) for k, v in enumerate(q)))


# -- integer polynomials -----------------------------------------------------

def poly_mul(a: Sequence[int], b: Sequence[int]) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def poly_pow(base: Sequence[int], e: int) -> list:
    """Exact big-integer power by repeated squaring."""
    result = [1]
    sq = list(base)
    while e:
        if e & 1:
            result = poly_mul(result, sq)
        e >>= 1
        if e:
            sq = poly_mul(sq, sq)
    return result


def _pad(s, length):
    s = list(s[:length])
    return s + [0] * (length - len(s))


# -- MDS array farms -----------------------------------------------------------

def profile_mds_arrays(pi: int, n: int, c: int) -> FaultProfile:
    """``pi`` independent (n, n-c) MDS arrays.

    s_k is the coefficient of x^k in ``(sum_{i<=c} C(n,i) x^i)**pi``.
    """
    if pi < 1 or not 0 <= c < n:
        raise DimensionError("need pi >= 1 and 0 <= c < n")
    coeffs = poly_pow([comb(n, i) for i in range(c + 1)], pi)
    return FaultProfile(pi * n, tuple(_pad(coeffs, pi * n + 1)))


def mds_arrays_multinomial(pi: int, n: int, c: int) -> list:
    """Same counts by summing over how many arrays lose i devices, i = 0..c."""
    total = pi * n
    s = [0] * (total + 1)

    def rec(level, left, k, weight):
        if level == c:
            kk = k + c * left
            s[kk] += weight * comb(n, c) ** left
            return
        for r in range(left + 1):
            rec(level + 1, left - r, k + level * r,
                weight * comb(left, r) * comb(n, level) ** r)

    rec(0, pi, 0, 1)
    return s


# -- 2D product arrays ---------------------------------------------------------

def profile_2d_limit(n1, m1, n2, m2) -> int:
    c1, c2 = n1 - m1, n2 - m2
    return (c1 + 1) * (c2 + 1) + min(c1, c2)


def profile_2d(n1: int, m1: int, n2: int, m2: int) -> FaultProfile:
    """Partial profile of an n2 x n1 array with row and column MDS codes.

    Valid for k up to ``(c1+1)(c2+1) + min(c1, c2)`` under iterative row and
    column decoding; larger k are marked unknown (None).
    """
    c1, c2 = n1 - m1, n2 - m2
    if c1 < 0 or c2 < 0 or m1 < 1 or m2 < 1:
        raise DimensionError("need 1 <= m1 <= n1 and 1 <= m2 <= n2")
    total = n1 * n2
    block = (c1 + 1) * (c2 + 1)
    limit = min(total, block + min(c1, c2))
    s = []
    for k in range(total + 1):
        if k > limit:
            s.append(None)
        elif k < block:
            s.append(comb(total, k))
        else:
            s.append(comb(total, k) - comb(n1, c1 + 1) * comb(n2, c2 + 1)
                     * comb(total - block, k - block))
    return FaultProfile(total, tuple(s))


def s_2d(n1, m1, n2, m2, k) -> int:
    """Single conjecture value, raising for k outside its range."""
    if k > profile_2d_limit(n1, m1, n2, m2):
        raise OutOfRangeError(f"k={k} beyond the validity range of the 2D count")
    return profile_2d(n1, m1, n2, m2).s[k]


def decode_2d_masks(n1: int, n2: int, c1: int, c2: int, masks):
    """Vectorized iterative row/column erasure decoding.

    Cells are numbered ``row * n1 + col``.  Returns a boolean array, True
    where the erasure pattern is fully recovered.
    """
    import numpy as np

    masks = np.asarray(masks, dtype=np.uint64)
    cur = masks.copy()
    rows = [np.uint64(((1 << n1) - 1) << (r * n1)) for r in range(n2)]
    cols = [np.uint64(sum(1 << (r * n1 + col) for r in range(n2))) for col in range(n1)]

    def popcount(x):
        if hasattr(np, "bitwise_count"):
            return np.bitwise_count(x).astype(np.int64)
        x = x.copy()
        cnt = np.zeros(x.shape, dtype=np.int64)
        while np.any(x):
            cnt += (x & np.uint64(1)).astype(np.int64)
            x >>= np.uint64(1)
        return cnt

    while True:
        before = cur.copy()
        for group, cap in ((rows, c1), (cols, c2)):
            for g in group:
                part = cur & g
                fixable = popcount(part) <= cap
                cur = np.where(fixable, cur & ~g, cur)
        if np.array_equal(before, cur):
            return cur == 0


# -- mirrored arrays -------------------------------------------------------------

def profile_mirrored(n1: int, c1: int, n2: int, printed_form: bool = False) -> FaultProfile:
    """(n1, n1-c1) array whose every device is replicated ``n2`` times.

    A column is lost only when all ``n2`` copies fail; the pattern survives
    when at most ``c1`` columns are lost.  With j lost columns, the other
    n1-j columns each keep at least one copy, hence the
    ``((1+x)^n2 - x^n2)^(n1-j)`` factor.

    ``printed_form=True`` raises that factor to the power n1 and applies the
    ``k <= n1 + (n2-1) j`` indicator instead; that variant overcounts (it
    can exceed C(n, k)) and is kept only for comparison.
    """
    if n2 < 2 or not 0 <= c1 < n1:
        raise DimensionError("need n2 >= 2 and 0 <= c1 < n1")
    total = n1 * n2
    base = [comb(n2, i) for i in range(n2)]  # (1+x)^n2 - x^n2
    s = [0] * (total + 1)
    for k in range(total + 1):
        acc = 0
        for j in range(min(k // n2, c1) + 1):
            if printed_form:
                if k > n1 + (n2 - 1) * j:
                    continue
                poly = poly_pow(base, n1)
            else:
                poly = poly_pow(base, n1 - j)
            e = k - n2 * j
            acc += comb(n1, j) * (poly[e] if e < len(poly) else 0)
        s[k] = acc
    if printed_form:
        return _UncheckedProfile(total, tuple(s))
    return FaultProfile(total, tuple(s))


def mirrored_pair_form(n1: int, c1: int) -> list:
    """n2 = 2 specialization written with ``(1 + 2x)^(n1-j)``."""
    s = [0] * (2 * n1 + 1)
    for k in range(2 * n1 + 1):
        for j in range(min(k // 2, c1) + 1):
            poly = poly_pow([1, 2], n1 - j)
            e = k - 2 * j
            s[k] += comb(n1, j) * (poly[e] if e < len(poly) else 0)
    return s


class _UncheckedProfile(FaultProfile):
    """Profile that skips the s_k <= C(n, k) check (comparison use only)."""

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(int(v) for v in self.s))


# -- generator matrices ------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorMatrix:
    """Binary k x n generator matrix; rows stored as 0/1 tuples."""

    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(b) for b in r) for r in self.rows)
        if not rows or not rows[0]:
            raise DimensionError("empty generator matrix")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise DimensionError("ragged generator matrix")
        if any(b not in (0, 1) for r in rows for b in r):
            raise DimensionError("generator entries must be 0 or 1")
        object.__setattr__(self, "rows", rows)
        if gf2_rank(self.column_masks()) != len(rows):
            raise RankDeficientError("generator matrix is rank deficient over GF(2)")

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.rows[0])

    def column_masks(self) -> list:
        return [sum(self.rows[r][c] << r for r in range(len(self.rows)))
                for c in range(len(self.rows[0]))]

    @classmethod
    def parse(cls, text: str) -> "GeneratorMatrix":
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            bits = line.replace(" ", "").replace(",", "")
            if set(bits) - {"0", "1"}:
                raise ParseError(f"expected 0/1 characters, got {line!r}", lineno)
            rows.append(tuple(int(b) for b in bits))
        if not rows:
            raise ParseError("no matrix rows found")
        try:
            return cls(tuple(rows))
        except DimensionError as exc:
            raise ParseError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "GeneratorMatrix":
        return cls.parse(Path(path).read_text())


def gf2_rank(vectors) -> int:
    """Rank of integer bit-vectors over GF(2) via an xor basis."""
    basis: list = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
            basis.sort(reverse=True)
    return len(basis)


@dataclass(frozen=True)
class ErasureAnalysis:
    profile: FaultProfile
    minimal_erasures: tuple
    mev: tuple
    irrecoverable: tuple


def profile_from_generator(g: GeneratorMatrix, max_weight: int | None = None) -> ErasureAnalysis:
    """Enumerate erasure patterns of a binary code up to ``max_weight``.

    A pattern is recoverable when the surviving columns still span GF(2)^k.
    Patterns containing a known minimal erasure are skipped without a rank
    computation; any other irrecoverable pattern is itself minimal.

    Returns
    -------
    ErasureAnalysis
        Profile (unknown beyond ``max_weight`` unless that exceeds n-k),
        minimal erasures as sorted index tuples, the minimal-erasure weight
        histogram for weights 1..n-k, and irrecoverable counts per weight.
    """
    n, k = g.n, g.k
    max_weight = n - k if max_weight is None else min(max_weight, n)
    cols = g.column_masks()
    full = (1 << n) - 1
    minimal: list = []
    irrecoverable = [0] * (n + 1)
    for w in range(1, max_weight + 1):
        for e in combinations(range(n), w):
            emask = sum(1 << i for i in e)
            if any(me & emask == me for me in minimal):
                irrecoverable[w] += 1
                continue
            keep = full & ~emask
            if gf2_rank(cols[i] for i in range(n) if keep >> i & 1) < k:
                irrecoverable[w] += 1
                minimal.append(emask)
    s = []
    for w in range(n + 1):
        if w <= max_weight:
            s.append(comb(n, w) - irrecoverable[w])
        elif w > n - k:
            s.append(0)  # fewer than k columns can never span
            irrecoverable[w] = comb(n, w)
        else:
            s.append(None)
    mel = tuple(sorted(tuple(i for i in range(n) if me >> i & 1) for me in minimal))
    mev = [0] * (n - k)
    for me in mel:
        if len(me) <= n - k:
            mev[len(me) - 1] += 1
    return ErasureAnalysis(FaultProfile(n, tuple(s)), mel, tuple(mev), tuple(irrecoverable))


def bundled_generator(name: str = "example2") -> GeneratorMatrix:
    path = Path(__file__).with_name("data") / f"{name}_generator.txt"
    return GeneratorMatrix.load(path)


# -- profile to chain rates ----------------------------------------------------------

def transition_rates(profile: FaultProfile, lam: float, eta: float, n: int, m: int) -> dict:
    """Failure rates of the generalized chain from a fault profile.

    With j = n - i surviving devices, the failure rate j*lam splits into a
    direct jump to data loss

        gamma_i = j lam ((1 - p_i) + p_i (1 - p_{i+1}) (j - 1) eta)

    and the ordinary step lambda_i = j lam - gamma_i, for i = 0..c-1 with
    c = n - m.  The last state has gamma_c = 0 and lambda_c = m lam.

    Returns
    -------
    dict
        ``{"lambdas": [...], "gammas": [...]}``, each of length c + 1.
    """
    if profile.n_total != n:
        raise DimensionError("profile size and (n, m) disagree")
    return rates_from_survival_ratios(profile.p, lam, eta, n, m)


def rates_from_survival_ratios(p: Sequence, lam: float, eta: float, n: int, m: int) -> dict:
    """:func:`transition_rates` from the ratios ``p_k = q_{k+1}/q_k`` directly.

    ``p`` must be known for k = 0..c-1; a missing ``p_c`` counts as 0.
    """
    c = n - m
    if c < 0:
        raise DimensionError("need m <= n")
    if not 0.0 <= eta <= 1.0:
        raise NegativeRateError("eta must lie in [0, 1]")
    p = list(p)
    if len(p) < c or any(p[i] is None for i in range(c)):
        raise DimensionError(f"profile must be known and nonzero for k = 0..{c}")
    lams, gams = [], []
    for i in range(c):
        j = n - i
        p_next = p[i + 1] if i + 1 < len(p) and p[i + 1] is not None else 0.0
        g = j * lam * ((1.0 - p[i]) + p[i] * (1.0 - p_next) * (j - 1) * eta)
        lam_i = j * lam - g
        if lam_i < 0:
            raise NegativeRateError(
                f"lambda_{i} = {lam_i:.3g} < 0; profile and eta are inconsistent")
        gams.append(g)
        lams.append(lam_i)
    gams.append(0.0)
    lams.append(m * lam)
    return {"lambdas": lams, "gammas": gams}
