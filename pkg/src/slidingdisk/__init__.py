"""Simulation and ergodicity checks for a sliding disk with degenerate friction noise.

Modules: ``noise`` (Lévy driving noise, tube probabilities), ``disk`` (model,
Gibbs law, reduced coordinates), ``integrate`` (Euler-Maruyama and BAOAB
ensembles, controlled ODE), ``stats`` (MSD, fits, Birkhoff averages,
marginal tests), ``conditions`` (control synthesis, lambda-Jacobian) and
``cli``.
"""
from ._accel import backend_name
from .disk import DiskParams, Potential, State, YState, from_y, to_y
from .errors import (
    ConfigError,
    NumericalFailure,
    SlidingDiskError,
    SynthesisFailure,
    ValidationError,
)
from .integrate import SchemeSpec, simulate, simulate_controlled
from .seeds import SeedStream, derive_seed

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DiskParams",
    "NumericalFailure",
    "Potential",
    "SchemeSpec",
    "SeedStream",
    "SlidingDiskError",
    "State",
    "SynthesisFailure",
    "ValidationError",
    "YState",
    "backend_name",
    "derive_seed",
    "from_y",
    "simulate",
    "simulate_controlled",
    "to_y",
]
