"""Absorbing continuous-time Markov chains.

Rates are per hour throughout.  The solvers use a subtraction-free variant of
Gaussian elimination (each pivot is rebuilt from off-diagonal rates plus the
accumulated absorption rate) because reliability chains with repair/failure
ratios of 1e3..1e5 lose most of their significant digits under plain LU.
Plain LU is still available through ``method="lu"``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .exceptions import DimensionError, ModelError, SingularSystemError

HOURS_PER_YEAR = 8760.0


@dataclass(frozen=True)
class RateModel:
    """Absorbing CTMC description.

    Parameters
    ----------
    states : tuple of str
        State labels, in index order.
    transitions : tuple of (int, int, float)
        ``(from, to, rate)`` triples; parallel edges are summed.
    initial : int
        Index of the starting state.
    absorbing : frozenset of int
        Indices of absorbing states.
    levels : tuple of int, optional
        Number of concurrently failed devices in each state.  Used by
        failure biasing to tell failure transitions from repairs.
    """

    states: tuple
    transitions: tuple
    initial: int
    absorbing: frozenset
    levels: tuple | None = None
    _rates: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.states)
        if n == 0:
            raise DimensionError("model has no states")
        if not 0 <= self.initial < n:
            raise ModelError(f"initial state {self.initial} out of range")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "absorbing", frozenset(self.absorbing))
        rates: dict = {}
        for src, dst, rate in self.transitions:
            src, dst, rate = int(src), int(dst), float(rate)
            if not (0 <= src < n and 0 <= dst < n):
                raise ModelError(f"transition {src}->{dst} out of range")
            if not rate >= 0 or math.isinf(rate):
                raise ModelError(f"rate {src}->{dst} must be finite and >= 0")
            if src == dst or rate == 0.0:
                continue
            if src in self.absorbing:
                raise ModelError(f"absorbing state {src} has an outgoing rate")
            rates[(src, dst)] = rates.get((src, dst), 0.0) + rate
        for a in self.absorbing:
            if not 0 <= a < n:
                raise ModelError(f"absorbing state {a} out of range")
        if self.levels is not None:
            if len(self.levels) != n:
                raise DimensionError("levels must have one entry per state")
            object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        object.__setattr__(self, "_rates", rates)
        object.__setattr__(
            self, "transitions", tuple((s, d, r) for (s, d), r in sorted(rates.items()))
        )

    @classmethod
    def build(cls, states, transitions: Iterable, initial=0, absorbing=(), levels=None):
        """Build a model, accepting state labels or indices in transitions."""
        states = tuple(states)
        index = {label: i for i, label in enumerate(states)}

        def resolve(x):
            if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
                return int(x)
            if x in index:
                return index[x]
            raise ModelError(f"unknown state {x!r}")

        trans = tuple((resolve(s), resolve(d), r) for s, d, r in transitions)
        return cls(states, trans, resolve(initial),
                   frozenset(resolve(a) for a in absorbing), levels)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def rates(self) -> dict:
        """Mapping ``(from, to) -> rate``."""
        return dict(self._rates)

    @property
    def transient(self) -> list:
        return [i for i in range(self.n_states) if i not in self.absorbing]

    def exit_rates(self) -> np.ndarray:
        out = np.zeros(self.n_states)
        for (s, _), r in self._rates.items():
            out[s] += r
        return out

    def generator(self) -> np.ndarray:
        """Dense generator matrix with rows summing to zero."""
        q = np.zeros((self.n_states, self.n_states))
        for (s, d), r in self._rates.items():
            q[s, d] += r
        q[np.diag_indices_from(q)] = -q.sum(axis=1)
        return q

    def check_absorption_reachable(self):
        """Raise SingularSystemError if some transient state never absorbs."""
        reach = set(self.absorbing)
        rev: dict = {}
        for (s, d) in self._rates:
            rev.setdefault(d, []).append(s)
        stack = list(reach)
        while stack:
            x = stack.pop()
            for s in rev.get(x, ()):
                if s not in reach:
                    reach.add(s)
                    stack.append(s)
        stuck = [self.states[i] for i in self.transient if i not in reach]
        if stuck:
            raise SingularSystemError(
                f"absorption unreachable from states {stuck[:5]}")

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        doc = {
            "states": list(self.states),
            "rates": [[s, d, r] for s, d, r in self.transitions],
            "initial": self.initial,
            "absorbing": sorted(self.absorbing),
        }
        if self.levels is not None:
            doc["levels"] = list(self.levels)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RateModel":
        try:
            return cls.build(doc["states"], [tuple(t) for t in doc["rates"]],
                             doc.get("initial", 0), doc.get("absorbing", ()),
                             doc.get("levels"))
        except KeyError as exc:
            raise ModelError(f"model document lacks field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RateModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SolveResult:
    """MTTDL together with the expected time spent in each transient state."""

    mttdl: float
    per_state_expected_time: dict
    method: str


# ---------------------------------------------------------------------------
# linear algebra

def _occupancy_gth(off: np.ndarray, excess: np.ndarray, start: int) -> np.ndarray:
    """Solve x^T M = e_start^T for an M-matrix given in excess form.

    ``M = diag(off.sum(1) + excess) - off`` with ``off >= 0`` (zero diagonal)
    and ``excess >= 0``.  Every operation adds or multiplies nonnegative
    numbers, so relative accuracy does not depend on the conditioning of M.
    """
    n = off.shape[0]
    r = off.astype(float).copy()
    np.fill_diagonal(r, 0.0)
    a = excess.astype(float).copy()
    pivots = np.empty(n)
    for k in range(n):
        d = r[k, k + 1:].sum() + a[k]
        if not d > 0.0:
            raise SingularSystemError("absorption unreachable (zero pivot)")
        pivots[k] = d
        if k + 1 < n:
            mult = r[k + 1:, k] / d
            r[k + 1:, k + 1:] += np.outer(mult, r[k, k + 1:])
            a[k + 1:] += mult * a[k]
            sub = r[k + 1:, k + 1:]
            np.fill_diagonal(sub, 0.0)
    # forward solve with U^T, then backward with L^T (both nonnegative)
    y = np.zeros(n)
    for j in range(n):
        acc = 1.0 if j == start else 0.0
        if j:
            acc += float(np.dot(y[:j], r[:j, j]))
        y[j] = acc / pivots[j]
    x = y.copy()
    for k in range(n - 2, -1, -1):
        x[k] += float(np.dot(r[k + 1:, k], x[k + 1:])) / pivots[k]
    return x


def _transient_blocks(model: RateModel):
    transient = model.transient
    if not transient:
        raise DimensionError("model has no transient states")
    pos = {s: i for i, s in enumerate(transient)}
    n = len(transient)
    off = np.zeros((n, n))
    absorb = np.zeros(n)
    for (s, d), rate in model._rates.items():
        if d in pos:
            off[pos[s], pos[d]] += rate
        else:
            absorb[pos[s]] += rate
    if model.initial not in pos:
        raise ModelError("initial state is absorbing")
    return transient, pos, off, absorb


def mttdl_linear_solve(model: RateModel, method: str = "gth") -> SolveResult:
    """Mean time to absorption from the rate equations.

    Solves the transient block of the Kolmogorov system at s = 0 for the
    expected time spent in each transient state.

    Parameters
    ----------
    model : RateModel
    method : {"gth", "lu"}
        ``"gth"`` (default) is subtraction free; ``"lu"`` uses dense LU with
        partial pivoting.

    Returns
    -------
    SolveResult
    """
    model.check_absorption_reachable()
    transient, pos, off, absorb = _transient_blocks(model)
    start = pos[model.initial]
    if method == "gth":
        x = _occupancy_gth(off, absorb, start)
    elif method == "lu":
        a = np.diag(off.sum(axis=1) + absorb) - off
        e = np.zeros(len(transient))
        e[start] = 1.0
        try:
            x = np.linalg.solve(a.T, e)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from None
    else:
        raise ValueError(f"unknown method {method!r}")
    per_state = {model.states[s]: float(x[pos[s]]) for s in transient}
    return SolveResult(float(x.sum()), per_state, "linear-solve")


def to_probability_matrix(model: RateModel) -> np.ndarray:
    """Row-stochastic jump matrix of the embedded chain.

    Transient rows hold ``q_ij / |q_ii|``; absorbing rows are identity rows.
    """
    out = model.exit_rates()
    p = np.zeros((model.n_states, model.n_states))
    for i in range(model.n_states):
        if i in model.absorbing:
            p[i, i] = 1.0
        elif out[i] <= 0.0:
            raise ModelError(f"transient state {model.states[i]!r} has no exit rate")
    for (s, d), r in model._rates.items():
        p[s, d] += r / out[s]
    return p


def fundamental_matrix_mttdl(model: RateModel, method: str = "gth") -> SolveResult:
    """MTTDL via the fundamental matrix of the embedded jump chain.

    ``M = (I - L)^{-1}`` over transient states gives expected visit counts;
    dividing by the exit rates turns visits into hours.
    """
    model.check_absorption_reachable()
    p = to_probability_matrix(model)
    transient = model.transient
    if not transient:
        raise DimensionError("model has no transient states")
    idx = np.array(transient)
    pos = {s: i for i, s in enumerate(transient)}
    start = pos[model.initial] if model.initial in pos else None
    if start is None:
        raise ModelError("initial state is absorbing")
    lmat = p[np.ix_(idx, idx)]
    absorb_prob = np.array([sum(p[s, a] for a in model.absorbing) for s in transient])
    out = model.exit_rates()[idx]
    if method == "gth":
        visits = _occupancy_gth(lmat, absorb_prob, start)
    elif method == "lu":
        try:
            fund = np.linalg.inv(np.eye(len(idx)) - lmat)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from None
        visits = fund[start]
    else:
        raise ValueError(f"unknown method {method!r}")
    times = visits / out
    per_state = {model.states[s]: float(times[pos[s]]) for s in transient}
    return SolveResult(float(times.sum()), per_state, "fundamental-matrix")


# ---------------------------------------------------------------------------
# transient behaviour

def unreliability_at(model: RateModel, t: float, tail: float = 1e-12) -> float:
    """Probability of having been absorbed by time ``t``.

    Uniformization: the absorbed mass is accumulated as a sum of nonnegative
    Poisson-weighted terms, so small values keep their relative accuracy.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0 or not model.absorbing:
        return 0.0
    out = model.exit_rates()
    rate = float(out.max())
    if rate == 0.0:
        return 0.0
    lt = rate * t
    n = model.n_states
    jump = np.zeros((n, n))
    for (s, d), r in model._rates.items():
        jump[s, d] += r / rate
    stay = 1.0 - out / rate
    absorbing = np.array(sorted(model.absorbing))
    kmax = int(stats.poisson.isf(tail, lt)) + 2
    if kmax > 5_000_000:
        raise ValueError("horizon too long for uniformization; shorten t")
    weights = stats.poisson.pmf(np.arange(kmax + 1), lt)
    v = np.zeros(n)
    v[model.initial] = 1.0
    total = 0.0
    for k in range(kmax + 1):
        total += weights[k] * v[absorbing].sum()
        v = v * stay + v @ jump
    # mass beyond the truncation point is bounded by the Poisson tail
    return float(min(1.0, total))


def reliability_at(model: RateModel, t: float) -> float:
    """Probability of not yet having reached an absorbing state at ``t``."""
    return 1.0 - unreliability_at(model, t)


def durability_nines(mttdl: float, horizon: float = HOURS_PER_YEAR,
                     max_nines: int = 18) -> int:
    """Number of nines of ``exp(-horizon / mttdl)``.

    Returns ``floor(log10(1 / (1 - R)))``, saturating at ``max_nines`` when
    the loss probability underflows.
    """
    if mttdl <= 0 or horizon <= 0:
        raise ValueError("mttdl and horizon must be positive")
    loss = -math.expm1(-horizon / mttdl)
    return nines_from_loss(loss, max_nines)


def nines_from_loss(loss: float, max_nines: int = 18) -> int:
    """Nines count for a loss probability ``1 - R``."""
    if loss <= 0.0:
        return max_nines
    if loss >= 1.0:
        return 0
    return int(min(max_nines, max(0, math.floor(-math.log10(loss)))))


# ---------------------------------------------------------------------------
# common model builders

def canonical_model(m: int, c: int, lam: float, mu: float,
                    repair: str = "progressive") -> RateModel:
    """(m+c, m) MDS array: state i holds i failed devices, F is data loss.

    ``repair="progressive"`` repairs all i failed devices concurrently and
    returns to full health at rate i*mu; ``"homogeneous"`` repairs one device
    at a time (i -> i-1 at rate mu).
    """
    if m < 1 or c < 0:
        raise ModelError("need m >= 1 and c >= 0")
    n = m + c
    labels = [f"{n - i}" for i in range(c + 1)] + ["F"]
    f = c + 1
    trans = []
    for i in range(c + 1):
        trans.append((i, i + 1 if i < c else f, (n - i) * lam))
        if i > 0 and mu > 0:
            if repair == "progressive":
                trans.append((i, 0, i * mu))
            elif repair == "homogeneous":
                trans.append((i, i - 1, mu))
            else:
                raise ValueError(f"unknown repair policy {repair!r}")
    return RateModel.build(labels, trans, 0, [f], levels=list(range(c + 1)) + [c + 1])


def chain_model(exit_up: Sequence[float], to_fail: Sequence[float],
                back: Sequence[float]) -> RateModel:
    """Birth chain 0..c with extra jumps to F and repairs back to state 0.

    ``exit_up[i]`` moves i -> i+1 (i -> F for the last state), ``to_fail[i]``
    moves i -> F and ``back[i-1]`` moves i -> 0.
    """
    c = len(exit_up) - 1
    if len(to_fail) != c + 1 or len(back) != c:
        raise DimensionError("chain vectors have inconsistent lengths")
    f = c + 1
    trans = []
    for i in range(c + 1):
        trans.append((i, i + 1 if i < c else f, exit_up[i]))
        if to_fail[i]:
            trans.append((i, f, to_fail[i]))
        if i > 0:
            trans.append((i, 0, back[i - 1]))
    labels = [str(i) for i in range(c + 1)] + ["F"]
    return RateModel.build(labels, trans, 0, [f], levels=list(range(c + 1)) + [c + 1])
