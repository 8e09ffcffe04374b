"""Slot-based simulation: X(k+1) = X(k) - eta(k) + routed-in(k) + xi(k).

Within a slot services are decided first from X(k), then arrivals and routed
jobs are added.  Random numbers are drawn in blocks from three named streams
(arrivals, scheduling, routing) and handed to the selected kernel backend, so
the compiled and pure-Python paths consume identical inputs.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ModelError, ScenarioConfig, Topology, check_queue_state
from .rates import rates_for, sir_rates
from .rng import Streams, open_uniforms, replication_seeds
from .trajectory import RunStats

CHUNK = 16_384


@dataclass
class SlotOutcome:
    eta: np.ndarray
    xi: np.ndarray
    routed_in: np.ndarray
    tau: np.ndarray | None = None


def _check_uniforms(u):
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or np.any(u >= 1):
        raise ValueError("scheduling uniforms must lie in the open interval (0, 1)")
    return u


def priorities(x, u) -> np.ndarray:
    """Access priorities ``tau_i = -log(u_i) / x_i`` (``+inf`` for empty queues)."""
    x = np.asarray(x, dtype=float)
    u = _check_uniforms(u)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, -np.log(u) / np.where(x > 0, x, 1.0), np.inf)


def schedule_d1(x, topo: Topology, u) -> np.ndarray:
    """Exponential-race scheduler.

    Node i serves iff ``x_i > 0`` and ``a_{j-i} tau_i < tau_j`` for every other
    neighbour j (exact ties go to the lower index).  ``u`` may be a single row
    of uniforms or a stack of shape (slots, n) evaluated for the same ``x``.
    """
    x = check_queue_state(x, topo)
    tau = priorities(x, u)
    single = tau.ndim == 1
    tau = np.atleast_2d(tau)
    eta = np.broadcast_to(x > 0, tau.shape).copy()
    idx = np.arange(topo.n)
    for k in range(1, topo.nbr_idx.shape[1]):
        j = topo.nbr_idx[:, k]
        w = topo.nbr_w[:, k]
        real = w > 0
        if not np.any(real):
            continue
        lhs = w * tau
        tj = tau[:, j]
        win = (lhs < tj) | ((lhs == tj) & (idx < j))
        eta &= win | ~real
    return eta[0].astype(np.int64) if single else eta.astype(np.int64)


def schedule_d2(x, topo: Topology, u, psi=None) -> np.ndarray:
    """Independent thinning: node i serves iff ``x_i > 0`` and ``u_i < psi_i(x)``."""
    x = check_queue_state(x, topo)
    u = _check_uniforms(u)
    if psi is None:
        psi = sir_rates(x, topo)
    return ((x > 0) & (u < psi)).astype(np.int64)


def route_multihop(eta, topo: Topology, q: float, rng: np.random.Generator,
                   degree: str = "lattice") -> np.ndarray:
    """Route each served job: exit w.p. q, else move to a uniformly chosen
    lattice neighbour.  Returns routed-in counts per node."""
    if topo.kind != "torus" or topo.kernel is None or not topo.kernel.is_nearest_neighbour():
        raise ModelError("multi-hop routing needs a torus with the 0/1 lattice-neighbour kernel")
    if not 0 < q <= 1:
        raise ModelError("q must lie in (0, 1]")
    nb = topo.lattice_nbrs
    deg = nb.shape[1] if degree == "lattice" else 2 ** topo.dimension
    u = open_uniforms(rng, topo.n)
    return _route(np.asarray(eta), u, q, nb, deg)


def _route(eta, u, q, nb, deg):
    inflow = np.zeros(len(eta), dtype=np.int64)
    for i in np.nonzero(eta)[0]:
        if u[i] >= q:
            m = int((u[i] - q) / (1.0 - q) * deg)
            if m < nb.shape[1]:
                inflow[nb[i, m]] += 1
    return inflow


# ---------------------------------------------------------------------------
# Kernel plumbing
# ---------------------------------------------------------------------------


def sample_arrivals(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF arrival counts; ``cdf`` has one row per node."""
    return np.sum(u[..., None] >= cdf[None, :, :-1], axis=-1).astype(np.int64)


class _Tables:
    def __init__(self, scenario: ScenarioConfig):
        topo = scenario.topology
        self.nbr = np.ascontiguousarray(topo.nbr_idx, dtype=np.int64)
        self.w = np.ascontiguousarray(topo.nbr_w, dtype=float)
        self.cnt = np.ascontiguousarray(topo.nbr_cnt, dtype=np.int64)
        rnbr, deg = scenario.route_table()
        self.rnbr = np.ascontiguousarray(rnbr, dtype=np.int64)
        self.rcnt = self.rnbr.shape[1]
        self.rdeg = int(deg)
        self.q = float(scenario.routing.q) if scenario.routing.multihop else 1.0
        self.family = scenario.rates.code
        self.noise = float(scenario.rates.noise)


def _draw(streams: Streams, scenario: ScenarioConfig, rows: int, cdf):
    n = scenario.n
    xi = sample_arrivals(cdf, streams.arrivals.random((rows, n)))
    su = open_uniforms(streams.scheduling, (rows, n))
    if scenario.routing.multihop:
        ru = open_uniforms(streams.routing, (rows, n))
    else:
        ru = np.zeros((rows, n))
    return np.ascontiguousarray(xi), su, ru


def step(x, scenario: ScenarioConfig, streams: Streams, backend=None):
    """One slot from state ``x``; returns ``(x', SlotOutcome)``."""
    kern = kernels.get_backend(backend) if isinstance(backend, str) or backend is None else backend
    x = check_queue_state(x, scenario.topology).copy()
    t = _Tables(scenario)
    n = scenario.n
    xi, su, ru = _draw(streams, scenario, 1, scenario.arrivals.cdf())
    eta = np.zeros(n, dtype=np.int64)
    inflow = np.zeros(n, dtype=np.int64)
    tau = np.zeros(n)
    empty2 = np.zeros((0, n), dtype=np.int64)
    kern.discrete_chunk(
        x, t.nbr, t.w, t.cnt, xi, su, ru, 1 if scenario.scheduler == "D1" else 2,
        t.family, t.noise, t.q, t.rnbr, t.rcnt, t.rdeg, 0, 0, 1, 0,
        empty2, empty2.copy(), empty2.copy(), np.zeros((0, n, 1), dtype=np.int64),
        empty2.copy(), 0, empty2.copy(), eta, inflow, tau)
    out = SlotOutcome(eta, xi[0].copy(), inflow, tau if scenario.scheduler == "D1" else None)
    return x, out


def plan(scenario: ScenarioConfig) -> tuple[int, int, int]:
    """``(burn, batch_len, simulated_slots)`` for a discrete scenario."""
    horizon = int(scenario.horizon)
    burn = int(horizon * scenario.burn_in)
    batch_len = (horizon - burn) // scenario.batches
    if batch_len < 1:
        raise ValueError("no slots left after burn-in for the requested batches")
    return burn, batch_len, burn + batch_len * scenario.batches


def run(scenario: ScenarioConfig, streams: Streams | None = None, backend=None,
        replication: int = 0) -> RunStats:
    """Simulate one replication and collect batch statistics after burn-in."""
    if scenario.time_model != "discrete":
        raise ModelError("run() simulates discrete-time scenarios; use sim_continuous.run_ct")
    kern = kernels.get_backend(backend) if isinstance(backend, str) or backend is None else backend
    if streams is None:
        seed = replication_seeds(scenario.seed, scenario.replications)[replication]
        streams = Streams.from_seed(seed)
    burn, batch_len, total = plan(scenario)
    n, B, H = scenario.n, scenario.batches, scenario.hist_cap
    t = _Tables(scenario)
    cdf = scenario.arrivals.cdf()
    x = np.zeros(n, dtype=np.int64) if scenario.initial is None else scenario.initial.copy()
    acc_x = np.zeros((B, n), dtype=np.int64)
    acc_x2 = np.zeros((B, n), dtype=np.int64)
    acc_eta = np.zeros((B, n), dtype=np.int64)
    hist = np.zeros((B, n, H), dtype=np.int64)
    overflow = np.zeros((B, n), dtype=np.int64)
    stride = int(scenario.trace_stride)
    rows = -(-total // stride) if stride > 0 else 0
    trace = np.zeros((rows, n), dtype=np.int64)
    eta = np.zeros(n, dtype=np.int64)
    inflow = np.zeros(n, dtype=np.int64)
    tau = np.zeros(n)
    sched = 1 if scenario.scheduler == "D1" else 2
    conflicts = 0
    done = 0
    while done < total:
        c = min(CHUNK, total - done)
        xi, su, ru = _draw(streams, scenario, c, cdf)
        conflicts += kern.discrete_chunk(
            x, t.nbr, t.w, t.cnt, xi, su, ru, sched, t.family, t.noise, t.q,
            t.rnbr, t.rcnt, t.rdeg, done, burn, batch_len, B,
            acc_x, acc_x2, acc_eta, hist, overflow, stride, trace, eta, inflow, tau)
        done += c
    return RunStats("discrete", streams.seed, batch_len, burn, total, acc_x, acc_x2,
                    acc_eta, hist, overflow, x, trace if stride > 0 else None, stride,
                    conflicts=int(conflicts), steps=total)


def _run_one(args):
    scenario, seed, backend = args
    return run(scenario, Streams.from_seed(seed), backend)


def run_replications(scenario: ScenarioConfig, jobs: int = 1, backend=None,
                     runner=None) -> list[RunStats]:
    """All replications of a scenario; results do not depend on ``jobs``."""
    runner = runner or _run_one
    seeds = replication_seeds(scenario.seed, scenario.replications)
    args = [(scenario, s, backend) for s in seeds]
    if jobs <= 1 or len(args) == 1:
        return [runner(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(runner, args))


def simulate(scenario: ScenarioConfig, jobs: int = 1, backend=None) -> list[RunStats]:
    """Dispatch on the scenario's time model."""
    if scenario.time_model == "continuous":
        from .sim_continuous import run_ct_replications
        return run_ct_replications(scenario, jobs, backend)
    return run_replications(scenario, jobs, backend)


def conditional_rates(x, scenario: ScenarioConfig) -> np.ndarray:
    """psi(x) for the scenario's rate family."""
    return rates_for(scenario.rates, x, scenario.topology)
