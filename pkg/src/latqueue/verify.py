"""Property suites run by ``latqueue verify``.

Each suite returns a :class:`SuiteResult`; ``ok`` is False only for a hard
failure (a violated invariant), never for a heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis.drift import all_states, drift_bruteforce, drift_exact, scan_negative_drift
from .model import (
    InterferenceKernel,
    LyapunovSpec,
    ModelError,
    ScenarioConfig,
    check_condition_g,
    check_condition_h,
)
from .rates import (
    periodic_feasibility,
    rates_for,
    sir_rates,
    verify_fairness,
    verify_shannon_fairness,
)
from .rng import Streams
from .sim_discrete import run, schedule_d1, schedule_d2


@dataclass
class SuiteResult:
    name: str
    ok: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"suite": self.name, "ok": self.ok, **self.details}


def _random_states(rng, count, n, hi=20, min_nonzero=1):
    out = []
    while len(out) < count:
        x = rng.integers(0, hi + 1, size=n)
        if np.count_nonzero(x) >= min_nonzero:
            out.append(x)
    return np.array(out)


def fairness_suite(scenario: ScenarioConfig, rng, states: int = 100, trials: int = 1000,
                   shannon: bool = False) -> SuiteResult:
    fn = verify_shannon_fairness if shannon else verify_fairness
    worst, gap, bad = -np.inf, 0.0, 0
    for x in _random_states(rng, states, scenario.n):
        rep = fn(x, scenario.topology, trials, rng)
        worst = max(worst, rep.max_violation)
        gap = max(gap, rep.equality_gap)
        bad += rep.violations
    name = "shannon_fairness" if shannon else "fairness"
    return SuiteResult(name, bad == 0 and gap <= 1e-9,
                       {"states": states, "trials": trials, "violations": bad,
                        "max_relative_violation": float(worst), "equality_gap": float(gap)})


def drift_suite(scenario: ScenarioConfig, spec: LyapunovSpec, brute_max_x: int = 4,
                scan_max_x: int = 60) -> SuiteResult:
    lam = scenario.arrivals
    if lam.kind != "bernoulli":
        raise ModelError("drift suite needs bernoulli arrivals")
    topo = scenario.topology
    spec.check(lam.rates)
    X = all_states(topo.n, brute_max_x)
    psi = sir_rates(X, topo)
    fast = drift_exact(X, lam, psi, spec)
    slow = np.array([drift_bruteforce(x, lam, p, spec) for x, p in zip(X, psi)])
    err = float(np.max(np.abs(fast - slow)))
    scan = scan_negative_drift(topo, lam, spec, scan_max_x)
    return SuiteResult("drift", err <= 1e-12 and scan.x0 is not None,
                       {"bruteforce_states": int(len(X)), "max_abs_error": err,
                        "scan_max_x": scan_max_x, "scan_states": scan.states, "x0": scan.x0,
                        "worst_drift_beyond_x0": scan.worst_beyond})


def coupling_suite(scenario: ScenarioConfig, rng, pairs: int = 1000, slots: int = 1000,
                   schedulers=("D1", "D2"), hi: int = 10) -> SuiteResult:
    """Two runs from ordered initial states sharing every random stream must
    stay ordered componentwise."""
    if scenario.routing.multihop:
        raise ModelError("monotone coupling holds for single-hop systems only")
    n = scenario.n
    violations = {}
    for sched in schedulers:
        if sched == "D1" and scenario.rates.tag != "sir":
            continue
        bad = 0
        for _ in range(pairs):
            hi_state = rng.integers(0, hi + 1, size=n)
            lo_state = rng.integers(0, hi_state + 1)
            seed = int(rng.integers(0, 2**63))
            traces = []
            for x0 in (lo_state, hi_state):
                sc = scenario.replace(scheduler=sched, initial=x0, horizon=slots, burn_in=0.0,
                                      batches=1, trace_stride=1, hist_cap=2)
                r = run(sc, Streams.from_seed(seed))
                traces.append(np.vstack([r.trace, r.final]))
            bad += int(np.any(traces[0] > traces[1]))
        violations[sched] = bad
    return SuiteResult("coupling", all(v == 0 for v in violations.values()),
                       {"pairs": pairs, "slots": slots, "violations": violations})


def marginals_suite(scenario: ScenarioConfig, rng, slots: int = 100_000, states: int = 5,
                    sigmas: float = 4.0) -> SuiteResult:
    """D1 service frequencies at fixed states against psi and against D2."""
    topo = scenario.topology
    worst_psi, worst_pair = 0.0, 0.0
    for x in _random_states(rng, states, topo.n, hi=8, min_nonzero=topo.n):
        psi = sir_rates(x, topo)
        u1 = np.maximum(rng.random((slots, topo.n)), 2.0**-60)
        u2 = np.maximum(rng.random((slots, topo.n)), 2.0**-60)
        f1 = schedule_d1(x, topo, u1).mean(axis=0)
        f2 = schedule_d2(x, topo, u2, psi).mean(axis=0)
        sd = np.sqrt(np.maximum(psi * (1 - psi), 1e-300) / slots)
        worst_psi = max(worst_psi, float(np.max(np.abs(f1 - psi) / sd)))
        worst_pair = max(worst_pair, float(np.max(np.abs(f1 - f2) / (np.sqrt(2) * sd))))
    return SuiteResult("d1_marginals", worst_psi <= sigmas and worst_pair <= sigmas,
                       {"slots": slots, "states": states, "max_sigma_vs_psi": worst_psi,
                        "max_sigma_d1_vs_d2": worst_pair, "limit_sigma": sigmas})


def exclusion_suite(scenario: ScenarioConfig, slots: int = 1_000_000) -> SuiteResult:
    """Neighbours with unit weight must never be served in the same D1 slot."""
    kern = scenario.topology.kernel
    if kern is not None and not kern.is_zero_one():
        return SuiteResult("exclusion", True, {"skipped": "kernel is not 0/1"})
    sc = scenario.replace(scheduler="D1", horizon=slots, burn_in=0.0, batches=1, hist_cap=2,
                          trace_stride=0)
    r = run(sc)
    return SuiteResult("exclusion", r.conflicts == 0, {"slots": slots, "conflicts": r.conflicts})


def feasibility_suite(kernel: InterferenceKernel, cases) -> SuiteResult:
    """``cases``: list of ``{"lambda": [...], "cell": [...], "expect": bool}``."""
    rows, ok = [], True
    for case in cases:
        cert = periodic_feasibility(case["lambda"], kernel, case.get("cell"))
        row = {"lambda": list(np.ravel(case["lambda"])), "feasible": cert.feasible,
               "rho": cert.rho, "witness": cert.witness.tolist(), "nu": cert.nu.tolist(),
               "margin": cert.margin}
        if "expect" in case:
            row["expected"] = bool(case["expect"])
            ok &= cert.feasible == bool(case["expect"])
        rows.append(row)
    return SuiteResult("feasibility", bool(ok), {"cases": rows})


def conditions_suite(spec: LyapunovSpec) -> SuiteResult:
    g = check_condition_g(spec.utility)
    h = check_condition_h(spec.utility)
    return SuiteResult("conditions", g.ok and h.ok,
                       {"condition_g": g.detail, "condition_h": h.detail})


def psi_bounds_suite(scenario: ScenarioConfig, rng, states: int = 1000) -> SuiteResult:
    X = _random_states(rng, states, scenario.n, hi=50, min_nonzero=0)
    psi = rates_for(scenario.rates, X, scenario.topology)
    top = scenario.rates.psi_max
    bad = int(np.sum((psi < 0) | (psi > top + 1e-12) | ((X == 0) & (psi != 0))))
    return SuiteResult("rates", bad == 0, {"states": states, "violations": bad})


SUITES = ("fairness", "shannon_fairness", "drift", "coupling", "d1_marginals", "exclusion",
          "feasibility", "conditions", "rates")
