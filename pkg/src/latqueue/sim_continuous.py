"""Continuous-time simulation by uniformization.

The dominating clock has rate ``Lam = sum_i lambda_i + n * psi_max``.  Each
tick picks an arrival at i with probability ``lambda_i / Lam``; otherwise a
node j is chosen uniformly among n slots of width ``psi_max`` and departs with
probability ``psi_j(x) / psi_max``, else the tick is a self-loop.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ModelError, ScenarioConfig, check_queue_state
from .rng import Streams, replication_seeds
from .sim_discrete import _Tables
from .trajectory import RunStats

CHUNK = 65_536


@dataclass
class EventRecord:
    time: float
    kind: str  # "arrival", "departure" or "self-loop"
    node: int | None = None
    destination: int | None = None  # None means the job left the network


def uniformization_rate(scenario: ScenarioConfig) -> float:
    lam = float(np.sum(scenario.arrivals.rates))
    Lam = lam + scenario.n * scenario.rates.psi_max
    if not Lam > 0:
        raise ModelError("uniformization constant must be positive")
    return Lam


class _Clock:
    def __init__(self, scenario: ScenarioConfig):
        lam = scenario.arrivals.rates.astype(float)
        self.lam_cum = np.cumsum(lam)
        self.lam_tot = float(self.lam_cum[-1])
        self.psimax = scenario.rates.psi_max
        self.Lam = uniformization_rate(scenario)


def _draw(streams: Streams, rows: int, multihop: bool):
    hold = streams.arrivals.standard_exponential(rows)
    ev = streams.scheduling.random(rows)
    ru = streams.routing.random(rows) if multihop else np.zeros(rows)
    return hold, ev, ru


def _check(scenario):
    if scenario.time_model != "continuous":
        raise ModelError("continuous-time scenario required")


def uniformized_step(x, scenario: ScenarioConfig, streams: Streams, t: float = 0.0,
                     backend=None):
    """One tick of the uniformized chain; returns ``(x', EventRecord)``."""
    _check(scenario)
    kern = kernels.get_backend(backend) if isinstance(backend, str) or backend is None else backend
    x = check_queue_state(x, scenario.topology).copy()
    before = x.copy()
    tb, ck = _Tables(scenario), _Clock(scenario)
    n = scenario.n
    hold, ev, ru = _draw(streams, 1, scenario.routing.multihop)
    clock = np.array([t])
    counters = np.zeros(4, dtype=np.int64)
    extremes = np.zeros(1)
    e2 = np.zeros((0, n))
    kern.continuous_chunk(
        x, tb.nbr, tb.w, tb.cnt, hold, ev, ru, ck.lam_cum, ck.lam_tot, ck.psimax, ck.Lam,
        tb.family, tb.noise, tb.q, tb.rnbr, tb.rcnt, tb.rdeg, np.inf, 0.0, 1.0, 0,
        e2, e2.copy(), np.zeros((0, n), dtype=np.int64), np.zeros((0, n, 1)), e2.copy(),
        np.zeros(n), 0.0, np.zeros((0, n), dtype=np.int64), clock, counters, extremes)
    diff = x - before
    when = float(clock[0])
    if counters[0]:
        return x, EventRecord(when, "self-loop")
    up = np.nonzero(diff > 0)[0]
    down = np.nonzero(diff < 0)[0]
    if down.size:
        dest = int(up[0]) if up.size else None
        return x, EventRecord(when, "departure", int(down[0]), dest)
    if up.size:
        return x, EventRecord(when, "arrival", int(up[0]))
    # departure routed back onto itself cannot happen on a lattice torus
    raise RuntimeError("uniformized step produced no recognisable event")


def plan_ct(scenario: ScenarioConfig) -> tuple[float, float]:
    """``(burn_time, batch_duration)``."""
    T = float(scenario.horizon)
    burn = T * scenario.burn_in
    batch = (T - burn) / scenario.batches
    if not batch > 0:
        raise ValueError("no time left after burn-in for the requested batches")
    return burn, batch


def run_ct(scenario: ScenarioConfig, streams: Streams | None = None, backend=None,
           replication: int = 0) -> RunStats:
    """Simulate one replication up to time ``horizon``; time-weighted statistics."""
    _check(scenario)
    kern = kernels.get_backend(backend) if isinstance(backend, str) or backend is None else backend
    if streams is None:
        seed = replication_seeds(scenario.seed, scenario.replications)[replication]
        streams = Streams.from_seed(seed)
    burn, batch = plan_ct(scenario)
    T = float(scenario.horizon)
    n, B, H = scenario.n, scenario.batches, scenario.hist_cap
    tb, ck = _Tables(scenario), _Clock(scenario)
    x = np.zeros(n, dtype=np.int64) if scenario.initial is None else scenario.initial.copy()
    acc_x = np.zeros((B, n))
    acc_x2 = np.zeros((B, n))
    acc_dep = np.zeros((B, n), dtype=np.int64)
    hist = np.zeros((B, n, H))
    overflow = np.zeros((B, n))
    last_t = np.zeros(n)
    stride = float(scenario.trace_stride)
    rows = int(np.ceil(T / stride)) if stride > 0 else 0
    trace = np.zeros((rows, n), dtype=np.int64)
    clock = np.zeros(1)
    counters = np.zeros(4, dtype=np.int64)
    extremes = np.zeros(1)
    steps = 0
    while not counters[3]:
        hold, ev, ru = _draw(streams, CHUNK, scenario.routing.multihop)
        steps += kern.continuous_chunk(
            x, tb.nbr, tb.w, tb.cnt, hold, ev, ru, ck.lam_cum, ck.lam_tot, ck.psimax,
            ck.Lam, tb.family, tb.noise, tb.q, tb.rnbr, tb.rcnt, tb.rdeg, T, burn, batch, B,
            acc_x, acc_x2, acc_dep, hist, overflow, last_t, stride, trace, clock,
            counters, extremes)
    return RunStats("continuous", streams.seed, batch, burn, T, acc_x, acc_x2, acc_dep,
                    hist, overflow, x, trace if stride > 0 else None, stride,
                    self_loops=int(counters[0]), events=int(counters[2]), steps=steps,
                    max_rate_ratio=float(extremes[0]), extra={"Lambda": ck.Lam})


def _run_one(args):
    scenario, seed, backend = args
    return run_ct(scenario, Streams.from_seed(seed), backend)


def run_ct_replications(scenario: ScenarioConfig, jobs: int = 1, backend=None) -> list[RunStats]:
    seeds = replication_seeds(scenario.seed, scenario.replications)
    args = [(scenario, s, backend) for s in seeds]
    if jobs <= 1 or len(args) == 1:
        return [_run_one(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, args))
