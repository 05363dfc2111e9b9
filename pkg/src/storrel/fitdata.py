"""Robot exchange-count data: ingestion, Weibull regression fit and sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special, stats

from .exceptions import DegenerateDataError, ModelError, ParseError


@dataclass(frozen=True)
class WeibullParams:
    """Weibull distribution with CDF ``1 - exp(-(t/scale)**shape)``."""

    shape: float
    scale: float

    def __post_init__(self):
        for name in ("shape", "scale"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ModelError(f"{name} must be positive and finite")


def ingest_exchange_log(path) -> list:
    """Exchange counts, one positive integer per line; '#' starts a comment."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        field = line.split(",")[0].strip()
        try:
            value = int(field)
        except ValueError:
            try:
                fv = float(field)
            except ValueError:
                raise ParseError(f"not a number: {field!r}", lineno) from None
            if not fv.is_integer():
                raise ParseError(f"exchange count must be an integer, got {field}", lineno)
            value = int(fv)
        if value <= 0:
            raise ParseError(f"exchange count must be positive, got {value}", lineno)
        out.append(value)
    if not out:
        raise ParseError("log contains no samples")
    return out


def plotting_positions(n: int, positions: str = "median") -> np.ndarray:
    """Empirical CDF values for the sorted sample.

    ``"median"`` gives Benard's median ranks ``(i - 0.3)/(n + 0.4)``,
    ``"mean"`` gives ``i/(n + 1)``.
    """
    i = np.arange(1, n + 1, dtype=float)
    if positions == "median":
        return (i - 0.3) / (n + 0.4)
    if positions == "mean":
        return i / (n + 1.0)
    raise ValueError("positions must be 'median' or 'mean'")


def weibull_regression(samples, positions: str = "median") -> dict:
    """Least-squares line through ``(ln t, ln(-ln(1 - W)))``.

    Tied samples contribute one point, at the plotting position of the last
    member of the tie.
    The slope is the shape and the scale follows from the intercept as
    ``exp(-intercept / shape)``.

    Returns
    -------
    dict
        ``shape``, ``scale``, ``slope``, ``intercept``, ``r2`` and ``n_samples``.
    """
    t = np.sort(np.asarray(samples, dtype=float))
    if t.size < 10:
        raise DegenerateDataError("need at least 10 samples")
    if np.any(t <= 0):
        raise DegenerateDataError("samples must be positive")
    if t[0] == t[-1]:
        raise DegenerateDataError("need at least two distinct values")
    w = plotting_positions(t.size, positions)
    # Exchange counts are rounded up, so a run of equal values k carries the
    # mass of (k-1, k]; its highest rank is the CDF estimate at k.  Keeping
    # every tied rank instead stacks points on one abscissa and biases the
    # slope upward for small shapes.
    values, first_in_reversed = np.unique(t[::-1], return_index=True)
    last_rank = t.size - 1 - first_in_reversed
    x = np.log(values)
    y = np.log(-np.log1p(-w[last_rank]))
    fit = stats.linregress(x, y)
    shape = float(fit.slope)
    if not shape > 0:
        raise DegenerateDataError("regression slope is not positive")
    return {"shape": shape, "scale": float(math.exp(-fit.intercept / shape)),
            "slope": shape, "intercept": float(fit.intercept),
            "r2": float(fit.rvalue**2), "n_samples": int(t.size)}


def fit_weibull(samples, positions: str = "median") -> WeibullParams:
    """Weibull shape and scale from linearized regression."""
    r = weibull_regression(samples, positions)
    return WeibullParams(r["shape"], r["scale"])


def weibull_mean(p: WeibullParams) -> float:
    """``scale * Gamma(1 + 1/shape)``."""
    return p.scale * math.exp(special.gammaln(1.0 + 1.0 / p.shape))


def weibull_quantile(p: WeibullParams, u):
    """Inverse CDF ``scale * (-ln(1 - u))**(1/shape)``."""
    u = np.asarray(u, dtype=float)
    out = p.scale * (-np.log1p(-u)) ** (1.0 / p.shape)
    return float(out) if out.ndim == 0 else out


def sample_weibull(p: WeibullParams, rng: np.random.Generator, size=None):
    """Exchange counts by inverse CDF, rounded up to integers >= 1.

    ``rng`` is a :class:`numpy.random.Generator`; the same seed gives the
    same sequence.
    """
    u = rng.random(size)
    raw = np.ceil(weibull_quantile(p, u))
    out = np.maximum(raw, 1.0).astype(np.int64)
    return int(out) if size is None else out


def fit_report(samples, positions: str = "median") -> dict:
    """JSON-ready fit summary including the implied mean exchange count."""
    r = weibull_regression(samples, positions)
    mean = weibull_mean(WeibullParams(r["shape"], r["scale"]))
    return {"shape": r["shape"], "scale": r["scale"], "r2": r["r2"],
            "n_samples": r["n_samples"], "mean_exchanges": mean,
            "positions": positions}
