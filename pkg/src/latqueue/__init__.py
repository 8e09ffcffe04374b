"""Interacting queues on lattices and graphs with fair, interference-limited
service rates: simulators, exact small-chain solves and moment-bound checks."""

__version__ = "0.1.0"

from .kernels import BACKEND
from .model import (
    ArrivalSpec,
    InterferenceKernel,
    LyapunovSpec,
    ModelError,
    RateFamily,
    Routing,
    ScenarioConfig,
    Topology,
    bernoulli,
    build_topology,
    from_pmf,
    make_utility,
    poisson,
    quadratic_inverse,
    ring,
)
from .rates import periodic_feasibility, rates_for, sir_rates, verify_fairness
from .rng import Streams, replication_seeds
from .sim_continuous import run_ct, uniformized_step
from .sim_discrete import run, simulate, step
