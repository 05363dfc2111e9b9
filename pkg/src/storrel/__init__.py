"""Durability and availability models for erasure-coded and cold storage.

Submodules
----------
ctmc
    Absorbing continuous-time Markov chains: MTTDL, reliability, nines.
closedform
    Explicit MTTDL and R(t) formulas and the generalized-chain evaluation.
errors
    Hard errors, sector errors and AFR conversions.
profile
    Fault-tolerance profiles of multi-array, 2D, mirrored and binary codes.
pyramid
    Pyramid-code repair rates and MTTDL.
avail
    Device availability with timeouts and downtime fitting.
coldstore
    Carrier-based cold-storage model, rate functions and bounds.
fitdata
    Weibull fits of robot exchange counts.
sim
    Monte Carlo engine with compiled and pure-Python kernels.
cli
    Command-line front end.
"""
from . import avail, closedform, coldstore, ctmc, errors, fitdata, profile, pyramid, sim
from .ctmc import RateModel, durability_nines, mttdl_linear_solve
from .exceptions import StorrelError

__version__ = "0.1.0"

__all__ = ["avail", "closedform", "coldstore", "ctmc", "errors", "fitdata", "profile",
           "pyramid", "sim", "RateModel", "durability_nines", "mttdl_linear_solve",
           "StorrelError", "__version__"]
