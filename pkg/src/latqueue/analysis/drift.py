"""One-step drift of the Lyapunov function F(y) = sum_i h'(nu_i) G(y_i).

Arrivals are Bernoulli, so the conditional drift given the state is exact
and separable across nodes:

    E[F(X') - F(x)] = sum_i h'(nu_i) (lam_i (1 - psi_i) g(x_i + 1)
                                      - (1 - lam_i) psi_i g(x_i))

whatever the joint law of the services, as long as their marginals are psi.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..model import ArrivalSpec, LyapunovSpec, ModelError, Topology
from ..rates import sir_rates


def _bernoulli_means(lam) -> np.ndarray:
    if isinstance(lam, ArrivalSpec):
        if lam.kind == "poisson" or lam.pmf.shape[1] > 2:
            raise ModelError("exact drift needs Bernoulli (0/1) arrivals")
        return lam.rates
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(lam > 1):
        raise ModelError("Bernoulli means must lie in [0, 1]")
    return lam


def drift_exact(x, lam, psi, spec: LyapunovSpec):
    """Exact conditional drift; ``x`` and ``psi`` may be stacks (..., n)."""
    lam = _bernoulli_means(lam)
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=float)
    g = spec.utility.g
    terms = lam * (1 - psi) * g(x + 1) - (1 - lam) * psi * g(x)
    return np.sum(spec.weights() * terms, axis=-1)


def drift_bound(x, spec: LyapunovSpec):
    """``sum_i h'(nu_i) (-eps g(x_i) + Delta(x_i))``."""
    x = np.asarray(x, dtype=float)
    u = spec.utility
    return np.sum(spec.weights() * (-spec.epsilon * u.g(x) + u.delta(x)), axis=-1)


@dataclass
class DriftChain:
    exact: np.ndarray
    intermediate: np.ndarray  # sum h'(nu)(lam g(x+1) - psi g(x))
    bound: np.ndarray
    correction: np.ndarray  # sum h'(nu)(nu - psi) g(x)

    def holds(self, tol: float = 1e-9) -> bool:
        scale = 1.0 + np.abs(self.intermediate)
        a = np.all(self.exact <= self.intermediate + tol * scale)
        b = np.all(self.intermediate <= self.bound + self.correction + tol * scale)
        return bool(a and b)


def drift_chain(x, lam, psi, spec: LyapunovSpec) -> DriftChain:
    lam = _bernoulli_means(lam)
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=float)
    w = spec.weights()
    g = spec.utility.g
    inter = np.sum(w * (lam * g(x + 1) - psi * g(x)), axis=-1)
    corr = np.sum(w * (spec.nu - psi) * g(x), axis=-1)
    return DriftChain(drift_exact(x, lam, psi, spec), inter, drift_bound(x, spec), corr)


def drift_bruteforce(x, lam, psi, spec: LyapunovSpec) -> float:
    """Drift by enumerating all 2^n x 2^n arrival/service outcomes with
    independent (D2) services; F evaluated from partial sums of g."""
    lam = _bernoulli_means(lam)
    x = np.asarray(x, dtype=np.int64)
    psi = np.asarray(psi, dtype=float)
    n = x.size
    w = spec.weights()
    G = spec.utility.G

    def F(y):
        return float(np.sum(w * G(y)))

    base = F(x)
    total = 0.0
    for xi in itertools.product((0, 1), repeat=n):
        pa = np.prod([l if a else 1 - l for a, l in zip(xi, lam)])
        if pa == 0:
            continue
        for eta in itertools.product((0, 1), repeat=n):
            ps = np.prod([p if e else 1 - p for e, p in zip(eta, psi)])
            if ps == 0:
                continue
            y = x + np.array(xi) - np.array(eta)
            total += pa * ps * (F(y) - base)
    return total


def all_states(n: int, max_x: int) -> np.ndarray:
    """Every state in {0..max_x}^n as rows."""
    grids = np.meshgrid(*([np.arange(max_x + 1)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass
class DriftScan:
    x0: int | None  # drift < 0 whenever max_i x_i >= x0 (within the scan)
    max_x: int
    states: int
    worst_beyond: float  # largest drift among states with max x >= x0


def scan_negative_drift(topo: Topology, lam, spec: LyapunovSpec, max_x: int,
                        rates=sir_rates) -> DriftScan:
    """Exhaustive scan of states with max coordinate up to ``max_x``; reports
    the smallest X0 such that every scanned state with max_i x_i >= X0 has
    strictly negative drift."""
    X = all_states(topo.n, max_x)
    psi = rates(X, topo)
    d = drift_exact(X, lam, psi, spec)
    m = X.max(axis=1)
    bad = m[d >= 0]
    x0 = int(bad.max()) + 1 if bad.size else 0
    if x0 > max_x:
        return DriftScan(None, max_x, len(X), float("nan"))
    beyond = d[m >= x0]
    return DriftScan(x0, max_x, len(X), float(beyond.max()) if beyond.size else float("-inf"))
