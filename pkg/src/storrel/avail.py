"""Single-device availability with timeouts.

A device alternates between up (mean ``t_up``) and temporarily unavailable
(mean ``t_down``) periods and dies at rate ``lam``.  A system declares the
device dead once an unavailability lasts longer than ``alpha * t_down``; the
timeout equation picks ``alpha`` (or ``t_up``) so that the expected time to a
declared death matches the true lifetime ``1/lam``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .exceptions import DegenerateDataError, ModelError, NoRootError, ParseError


@dataclass(frozen=True)
class AvailabilityParams:
    """Device availability description (hours).

    Attributes
    ----------
    lam : float
        Death rate.
    t_up, t_down : float
        Mean up and down period lengths.
    alpha : float
        Timeout multiplier; the timeout is ``alpha * t_down``.
    """

    lam: float
    t_up: float
    t_down: float
    alpha: float = 0.0

    def __post_init__(self):
        if not self.lam > 0 or not self.t_up > 0 or self.t_down < 0:
            raise ModelError("need lam > 0, t_up > 0, t_down >= 0")
        if self.alpha < 0:
            raise ModelError("alpha must be nonnegative")

    @property
    def p_a(self) -> float:
        return self.t_up / (self.t_up + self.t_down)

    @property
    def p13(self) -> float:
        """Probability that an up period ends in death rather than an outage."""
        return self.lam * (self.t_up + self.t_down)

    def replace(self, **kw) -> "AvailabilityParams":
        d = dict(lam=self.lam, t_up=self.t_up, t_down=self.t_down, alpha=self.alpha)
        d.update(kw)
        return AvailabilityParams(**d)


def node_rates(p: AvailabilityParams) -> dict:
    """Rates of the up/down/dead chain.

    Returns ``lambda_12`` (up -> down), ``lambda_13`` (up -> dead),
    ``lambda_21`` (down -> up) and ``p13``.
    """
    pa = p.p_a
    l12 = (pa - p.lam * p.t_up) / (p.t_up * pa)
    if l12 < -1e-15:
        raise ModelError("lam * (t_up + t_down) exceeds 1; outage rate would be negative")
    l13 = p.lam / pa
    l21 = math.inf if p.t_down == 0 else 1.0 / p.t_down
    return {"lambda_12": max(l12, 0.0), "lambda_13": l13, "lambda_21": l21,
            "p13": p.p13}


def expected_timeout_life(alpha: float, p: AvailabilityParams) -> float:
    """Expected time until the device is declared dead with timeout multiplier ``alpha``.

    Sums the up periods and the outages shorter than the timeout that
    precede either a true death or the first outage that outlasts the timeout.
    """
    if alpha < 0:
        raise ModelError("alpha must be nonnegative")
    p13 = p.p13
    if alpha == 0:
        return p.t_up
    tail = math.exp(-alpha)
    short = -math.expm1(-alpha)  # 1 - e^{-alpha}
    # mean length of an outage given it ends before the timeout
    mean_short = p.t_down * (1.0 - alpha * tail / short)
    num = (1.0 - p13) * short * (p.t_up + mean_short)
    return num / (p13 + (1.0 - p13) * tail) + p.t_up


def timeout_residual(p: AvailabilityParams) -> float:
    return expected_timeout_life(p.alpha, p) + p.alpha * p.t_down - 1.0 / p.lam


def solve_timeout_equation(p: AvailabilityParams, unknown: str = "t_up",
                           bracket: tuple | None = None, rtol: float = 1e-10) -> float:
    """Root of ``E[Y_alpha] + alpha t_down - 1/lam`` in ``alpha`` or ``t_up``.

    Parameters
    ----------
    p : AvailabilityParams
        The other parameters; the field named by ``unknown`` is ignored.
    unknown : {"t_up", "alpha"}
    bracket : (float, float), optional
        Defaults to (1e-3, 1e9) hours for ``t_up``, capped where
        ``lam (t_up + t_down)`` reaches 1, and (1e-6, 1e3) for ``alpha``.

    Returns
    -------
    float
    """
    if unknown == "t_up":
        lo, hi = bracket or (1e-3, 1e9)
        hi = min(hi, 1.0 / p.lam - p.t_down)

        def f(x):
            return timeout_residual(p.replace(t_up=x))
    elif unknown == "alpha":
        lo, hi = bracket or (1e-6, 1e3)

        def f(x):
            return timeout_residual(p.replace(alpha=x))
    else:
        raise ValueError("unknown must be 't_up' or 'alpha'")
    if not lo < hi:
        raise NoRootError("empty search bracket")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NoRootError(f"no sign change for {unknown} on [{lo:g}, {hi:g}]")
    return float(optimize.bisect(f, lo, hi, rtol=rtol, xtol=1e-300, maxiter=400))


# -- downtime data -------------------------------------------------------------

def read_downtime_csv(path) -> list:
    """Durations in seconds, one per line, '#' starts a comment line."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            v = float(line.split(",")[0])
        except ValueError:
            raise ParseError(f"not a number: {line!r}", lineno) from None
        if not v > 0:
            raise ParseError(f"duration must be positive, got {v}", lineno)
        values.append(v)
    if not values:
        raise ParseError("no durations found")
    return values


def binomial_mean_downtime(p: float, n_trials: int, c_u: float) -> float:
    """Downtime in hours at the mean binomial log-duration, ``10**(n p / C_u)`` seconds."""
    if not (0.0 <= p <= 1.0 and n_trials >= 1 and c_u > 0):
        raise ModelError("need 0 <= p <= 1, n_trials >= 1 and C_u > 0")
    return float(10.0 ** (n_trials * p / c_u) / 3600.0)


# SSE values within this relative margin of the best are treated as ties.
# Neighbouring C_u plateaus of a step CDF differ by amounts of the order of
# the sampling noise, so a strict argmin flips between them from sample to
# sample; the mean-log tie-break below is what actually selects C_u.
TIE_BAND = 0.1


def _step_sse(points, ecdf, values, weights, n, cu):
    """SSE between the empirical CDF and Binomial(n, p) at floor(cu * log-duration).

    ``p`` is the binomial MLE of the mapped counts ``values`` (with ``weights``).
    """
    k_all = np.clip(np.floor(cu * values + 1e-9), 0, n)
    p = float(np.clip(np.dot(weights, k_all) / (n * weights.sum()), 1e-9, 1 - 1e-9))
    k = np.clip(np.floor(cu * points + 1e-9), -1, n)
    model = np.where(k < 0, 0.0, special.bdtr(np.maximum(k, 0), n, p))
    return float(np.sum((ecdf - model) ** 2)), p


def fit_downtime_binomial(samples, n_grid=range(5, 31), grid_points: int = 160,
                          max_points: int = 400) -> dict:
    """Fit a binomial CDF to the log-durations of unavailability events.

    Each duration ``d`` (seconds) maps to ``floor(C_u * log10(d))``, modelled
    as Binomial(n, p).  For every ``n`` in ``n_grid`` the scale ``C_u`` is
    searched on a log grid (then refined) with ``p`` at its binomial MLE;
    the pair with the smallest squared distance to the empirical CDF wins.
    The step CDF is flat in ``C_u`` between atoms, so among candidates within
    ``TIE_BAND`` of the best SSE the one whose ``n p / C_u`` is closest to the
    mean log-duration is kept.

    Parameters
    ----------
    samples : array_like
        Durations in seconds.
    grid_points : int
        Coarse ``C_u`` grid size per ``n``; a refinement of the same size
        follows around the coarse minimum.
    max_points : int
        The empirical CDF is compared at no more than this many quantiles.

    Returns
    -------
    dict
        ``p``, ``n_trials``, ``C_u``, ``sse`` and ``mean_downtime_hours``
        (``10**(n p / C_u) / 3600``).
    """
    d = np.asarray(samples, dtype=float)
    if d.size < 30:
        raise DegenerateDataError("need at least 30 samples")
    if np.any(d <= 0):
        raise DegenerateDataError("durations must be positive")
    logs = np.log10(d)
    if np.ptp(logs) == 0.0:
        raise DegenerateDataError("all durations are equal")
    mean, var = logs.mean(), logs.var()
    if mean <= 0:
        raise DegenerateDataError("durations must mostly exceed one second")
    values, counts = np.unique(logs, return_counts=True)
    ecdf = np.cumsum(counts) / d.size
    points = values
    if values.size > max_points:
        pick = np.unique(np.searchsorted(ecdf, np.linspace(0, 1, max_points + 1)[1:-1]))
        points, ecdf = values[pick], ecdf[pick]
    if values.size > 4 * max_points:
        # histogram the MLE input; bin width is far below one mapped unit
        edges = np.linspace(values[0], values[-1], 16 * max_points + 1)
        hist, _ = np.histogram(logs, edges)
        keep = hist > 0
        values = (0.5 * (edges[1:] + edges[:-1]))[keep]
        counts = hist[keep]
    weights = counts.astype(float)
    cands = []
    for n in n_grid:
        p0 = 1.0 / (1.0 + n * var / mean**2)
        c0 = n * p0 / mean
        grid = c0 * np.geomspace(0.25, 4.0, grid_points)
        scores = [_step_sse(points, ecdf, values, weights, n, cu)[0] for cu in grid]
        j = int(np.argmin(scores))
        fine = np.linspace(grid[max(j - 1, 0)], grid[min(j + 1, grid_points - 1)], grid_points)
        for cu, err in zip(grid, scores):
            cands.append((err, n, cu))
        for cu in fine:
            cands.append((_step_sse(points, ecdf, values, weights, n, cu)[0], n, cu))
    best_err = min(c[0] for c in cands)
    tied = [c for c in cands if c[0] <= best_err * (1 + TIE_BAND) + 1e-15]
    scored = [(abs(n * _step_sse(points, ecdf, values, weights, n, cu)[1] / cu - mean), err, n, cu)
              for err, n, cu in tied]
    _, err, n, cu = min(scored)
    p = _step_sse(points, ecdf, values, weights, n, cu)[1]
    return {"p": float(p), "n_trials": int(n), "C_u": float(cu), "sse": float(err),
            "mean_downtime_hours": binomial_mean_downtime(p, n, cu)}
