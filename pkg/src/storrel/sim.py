"""Monte Carlo engine for absorbing chains and cold-storage models.

Each replicate draws from its own random stream keyed by ``(seed, index)``,
so results do not depend on how replicates are split across worker threads.
Three modes are available:

``markov``
    Event-driven simulation of a :class:`~storrel.ctmc.RateModel`, with
    optional failure biasing (importance sampling).
``cold-full``
    Cold-storage model with explicit robot lives (Weibull exchange budgets,
    exponential exchanges, exponential robot repairs).
``cold-approx``
    Cold-storage model with exponential-tail detection and repair rates
    evaluated at each state entry.

The compiled kernels are used when importable; setting the environment
variable ``STORREL_PURE_PYTHON=1`` forces the pure-Python twin.
"""
from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import _pykernels
from .coldstore import ColdModel
from .ctmc import RateModel
from .exceptions import ModelError, NoEventsError, SingularSystemError

try:
    if os.environ.get("STORREL_PURE_PYTHON", "") == "1":
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["cython"] = _compiled
DEFAULT_BACKEND = "cython" if _compiled is not None else "python"

MODES = ("markov", "cold-full", "cold-approx")
KIND_NAMES = ("data-loss", "unavailability", "censored")
THREADS_ENV = "STORREL_THREADS"


def get_backend(name: str | None = None):
    """Kernel module for ``name`` (default: compiled when available)."""
    name = name or DEFAULT_BACKEND
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return BACKENDS[name]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BiasConfig:
    """Multiply failure rates by ``factor`` once ``threshold`` devices are down."""

    threshold: int = 1
    factor: float = 1.0

    def __post_init__(self):
        if self.factor < 1.0:
            raise ModelError("bias factor must be >= 1")
        if self.threshold < 0:
            raise ModelError("bias threshold must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    """Replicate count, master seed, optional horizon (hours) and mode."""

    replicates: int = 10000
    seed: int = 0
    horizon: float | None = None
    mode: str = "markov"
    bias: BiasConfig | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ModelError("replicates must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ModelError("seed must fit in 64 unsigned bits")
        if self.horizon is not None and not self.horizon > 0:
            raise ModelError("horizon must be positive")
        if self.mode not in MODES:
            raise ModelError(f"mode must be one of {MODES}")

    def to_dict(self) -> dict:
        return {"replicates": self.replicates, "seed": self.seed,
                "horizon": self.horizon, "mode": self.mode,
                "bias": None if self.bias is None else
                {"threshold": self.bias.threshold, "factor": self.bias.factor}}


@dataclass
class SimOutcome:
    """Per-replicate results, in replicate order.

    ``kinds`` holds 0 (data loss), 1 (unavailability) or 2 (censored at the
    horizon); markov runs only produce 0 and 2.
    """

    times: np.ndarray
    kinds: np.ndarray
    weights: np.ndarray
    config: SimConfig
    final_states: np.ndarray | None = None
    backend: str = DEFAULT_BACKEND
    meta: dict = field(default_factory=dict)

    @property
    def censored(self) -> np.ndarray:
        return self.kinds == 2

    @property
    def n(self) -> int:
        return int(self.times.size)

    def effective_sample_size(self) -> float:
        w = self.weights
        return float(w.sum() ** 2 / np.sum(w * w))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["replicate", "time_hours", "kind", "weight"])
            for i, (t, k, w) in enumerate(zip(self.times, self.kinds, self.weights)):
                out.writerow([i, repr(float(t)), KIND_NAMES[int(k)], repr(float(w))])

    def summary(self) -> dict:
        """JSON-ready summary: mean times with confidence intervals."""
        doc = {"n": self.n, "censored": int(self.censored.sum()),
               "config": self.config.to_dict(), "backend": self.backend}
        for label, kind in (("mttdl", "either"), ("mttdu", "unavailability"),
                            ("mean_data_loss", "data-loss")):
            try:
                est = estimate_mean_time(self, kind)
                doc[label] = est.value
                doc[f"{label}_ci"] = list(est.ci)
            except NoEventsError:
                doc[label] = None
                doc[f"{label}_ci"] = None
        doc.update(self.meta)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.summary())


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    ci: tuple
    n: int
    ess: float


# -- model encodings -----------------------------------------------------------------

def _csr(model: RateModel):
    n = model.n_states
    rows: list = [[] for _ in range(n)]
    for (s, d), r in sorted(model.rates.items()):
        rows[s].append((d, r))
    levels = model.levels
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    dest, rate, is_fail = [], [], []
    for s in range(n):
        for d, r in rows[s]:
            dest.append(d)
            rate.append(r)
            is_fail.append(1 if levels is not None and levels[d] > levels[s] else 0)
        row_ptr[s + 1] = len(dest)
    exit_rate = np.zeros(n)
    for s in range(n):
        acc = 0.0
        for _, r in rows[s]:
            acc += r
        exit_rate[s] = acc
    absorbing = np.zeros(n, dtype=np.uint8)
    absorbing[list(model.absorbing)] = 1
    level = np.asarray(levels if levels is not None else [0] * n, dtype=np.int64)
    return (exit_rate, row_ptr, np.asarray(dest, dtype=np.int64), np.asarray(rate, dtype=float),
            np.asarray(is_fail, dtype=np.uint8), absorbing, level)


def _binom_table(n: int) -> np.ndarray:
    nb = n + 1
    table = np.zeros(nb * nb)
    for a in range(nb):
        for b in range(a + 1):
            table[a * nb + b] = float(comb(a, b))
    return table


def _chunks(total: int, workers: int, chunk_size: int | None):
    size = chunk_size or max(1, math.ceil(total / (4 * workers)))
    return [(start, min(size, total - start)) for start in range(0, total, size)]


# -- running ---------------------------------------------------------------------------

def run_replicates(model, config: SimConfig, workers: int | None = None,
                   backend: str | None = None, chunk_size: int | None = None) -> SimOutcome:
    """Simulate ``config.replicates`` independent replicates.

    Parameters
    ----------
    model : RateModel or ColdModel
        ``RateModel`` for markov mode, ``ColdModel`` for the cold modes.
    config : SimConfig
    workers : int, optional
        Threads; defaults to ``$STORREL_THREADS`` or 1.  The result does not
        depend on this value.
    backend : {"cython", "python"}, optional

    Returns
    -------
    SimOutcome
    """
    kern = get_backend(backend)
    workers = workers or default_workers()
    horizon = math.inf if config.horizon is None else float(config.horizon)
    seed = int(config.seed)
    if config.mode == "markov":
        if not isinstance(model, RateModel):
            raise ModelError("markov mode needs a RateModel")
        if config.horizon is None:
            model.check_absorption_reachable()
        arrays = _csr(model)
        if np.any(arrays[0][arrays[5] == 0] <= 0):
            raise SingularSystemError("a transient state has no exit")
        bias = config.bias or BiasConfig()
        if bias.factor != 1.0 and model.levels is None:
            raise ModelError("failure biasing needs a model with levels")

        def job(start, count):
            return kern.markov_chunk(*arrays, int(model.initial), horizon,
                                     int(bias.threshold), float(bias.factor),
                                     seed, start, count)
    else:
        if not isinstance(model, ColdModel):
            raise ModelError(f"{config.mode} mode needs a ColdModel")
        if config.bias is not None and config.bias.factor != 1.0:
            raise ModelError("failure biasing is only available in markov mode")
        deltas = np.asarray(model.deltas(), dtype=float)
        common = (model.n, model.k, model.lam, model.mu, model.theta, model.phi,
                  float(model.exchange_rate), deltas, model.weibull_shape,
                  model.weibull_scale, horizon)
        if config.mode == "cold-full":
            def job(start, count):
                return kern.cold_full_chunk(*common, seed, start, count)
        else:
            binom = _binom_table(model.n)
            write_j = model.write_sum == "j"

            def job(start, count):
                return kern.cold_approx_chunk(*common, write_j, binom, seed, start, count)

    pieces = _chunks(config.replicates, workers, chunk_size)
    if workers == 1:
        results = [job(s, c) for s, c in pieces]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda sc: job(*sc), pieces))
    name = backend or DEFAULT_BACKEND
    if config.mode == "markov":
        times = np.concatenate([r[0] for r in results])
        weights = np.concatenate([r[1] for r in results])
        final = np.concatenate([r[2] for r in results]).astype(np.int64)
        censored = np.concatenate([r[3] for r in results]).astype(bool)
        kinds = np.where(censored, 2, 0).astype(np.int64)
        return SimOutcome(times, kinds, weights, config, final, name)
    times = np.concatenate([r[0] for r in results])
    kinds = np.concatenate([r[1] for r in results]).astype(np.int64)
    return SimOutcome(times, kinds, np.ones_like(times), config, None, name)


def failure_biasing(model: RateModel, config: SimConfig, workers: int | None = None,
                    backend: str | None = None) -> SimOutcome:
    """Run with failure biasing and warn when the weights degenerate.

    Warns (RuntimeWarning) when the effective sample size falls below 5% of
    the replicate count.
    """
    if config.bias is None:
        raise ModelError("config.bias must be set for failure biasing")
    out = run_replicates(model, config, workers, backend)
    ess = out.effective_sample_size()
    out.meta["effective_sample_size"] = ess
    if ess < 0.05 * out.n:
        warnings.warn(f"effective sample size {ess:.1f} is below 5% of {out.n}",
                      RuntimeWarning, stacklevel=2)
    return out


# -- estimators ------------------------------------------------------------------------

def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> Estimate:
    n = values.size
    x = values * weights
    mean = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    ess = float(weights.sum() ** 2 / np.sum(weights * weights))
    return Estimate(mean, se, (mean - 1.959963984540054 * se, mean + 1.959963984540054 * se),
                    n, ess)


def estimate_unreliability(outcome: SimOutcome, t: float) -> Estimate:
    """Probability of absorption by time ``t`` (importance weights applied)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    hit = ((outcome.kinds != 2) & (outcome.times <= t)).astype(float)
    return _weighted_mean(hit, outcome.weights)


def estimate_mean_time(outcome: SimOutcome, kind: str = "either") -> Estimate:
    """Mean absorption time over replicates of one kind.

    ``kind`` is ``"data-loss"``, ``"unavailability"`` or ``"either"``.
    Censored replicates are left out and counted in ``outcome.censored``.
    """
    if kind == "either":
        sel = outcome.kinds != 2
    elif kind in ("data-loss", "unavailability"):
        sel = outcome.kinds == KIND_NAMES.index(kind)
    else:
        raise ValueError("kind must be 'data-loss', 'unavailability' or 'either'")
    if int(sel.sum()) < 2:
        raise NoEventsError(f"fewer than 2 replicates ended in {kind}")
    return _weighted_mean(outcome.times[sel], outcome.weights[sel])
