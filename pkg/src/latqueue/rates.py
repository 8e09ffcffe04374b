"""Service-rate families and checks of their utility-maximising property."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InterferenceKernel, ModelError, RateFamily, Topology, check_queue_state


class ConvergenceError(RuntimeError):
    """Power iteration failed to reach the requested tolerance."""


def interference(x, topo: Topology) -> np.ndarray:
    """``sum_j a_{j-i} x_j`` for every node (works on (..., n) stacks)."""
    x = np.asarray(x, dtype=float)
    return np.einsum("...ik,ik->...i", x[..., topo.nbr_idx], topo.nbr_w)


def _ratio(num, den):
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    return np.where(num == 0, 0.0, r)


def sir_rates(x, topo: Topology) -> np.ndarray:
    """``psi_i = x_i / sum_j a_{j-i} x_j`` with 0/0 = 0."""
    x = np.asarray(x, dtype=float)
    return _ratio(x, interference(x, topo))


def shannon_rates(x, topo: Topology) -> np.ndarray:
    return np.log1p(sir_rates(x, topo))


def sinr_rates(x, topo: Topology, noise: float) -> np.ndarray:
    if noise < 0:
        raise ModelError("noise must be non-negative")
    x = np.asarray(x, dtype=float)
    return np.log1p(_ratio(x, interference(x, topo) + noise))


def rates_for(family: RateFamily, x, topo: Topology) -> np.ndarray:
    if family.tag == "sir":
        return sir_rates(x, topo)
    if family.tag == "shannon":
        return shannon_rates(x, topo)
    return sinr_rates(x, topo, family.noise)


# ---------------------------------------------------------------------------
# Fairness checks
# ---------------------------------------------------------------------------


@dataclass
class FairnessReport:
    trials: int
    max_violation: float  # max relative (LHS - RHS) over random witnesses
    equality_gap: float  # relative gap at p proportional to x
    violations: int  # trials with relative violation above tol

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.equality_gap <= 1e-9


def log_uniform_witnesses(rng: np.random.Generator, trials: int, n: int,
                          lo: float = 0.01, hi: float = 100.0) -> np.ndarray:
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=(trials, n)))


def weighted_cost(x, p, topo: Topology) -> np.ndarray:
    """``sum_i x_i^2 (sum_j a_{j-i} p_j) / p_i`` over nodes with ``x_i > 0``.

    ``p`` may be a stack of witnesses of shape (..., n).
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    mask = x > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = interference(p, topo) / p
        return np.sum(np.where(mask, x**2 * ratio, 0.0), axis=-1)


def optimal_cost(x, topo: Topology) -> float:
    """``sum_i x_i^2 / psi_i(x)``, evaluated as ``sum_i x_i sum_j a_{j-i} x_j``."""
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * interference(x, topo)))


def verify_fairness(x, topo: Topology, trials: int, rng: np.random.Generator,
                    tol: float = 1e-9) -> FairnessReport:
    """Monte Carlo check that SIR rates minimise ``sum x_i^2 / mu_i`` over the
    witness-generated rate set (2-fairness)."""
    x = check_queue_state(x, topo)
    if not np.any(x > 0):
        raise ModelError("fairness check needs at least one non-empty queue")
    lhs = optimal_cost(x, topo)
    P = log_uniform_witnesses(rng, trials, topo.n)
    rhs = weighted_cost(x, P, topo)
    rel = (lhs - rhs) / np.abs(rhs)
    at_x = weighted_cost(x, x.astype(float) * 1.7, topo)
    gap = abs(lhs - at_x) / abs(lhs)
    return FairnessReport(trials, float(rel.max(initial=-np.inf)), gap, int(np.sum(rel > tol)))


def shannon_utility(x, mu) -> np.ndarray:
    """``sum_i x_i^2 h~(mu_i)`` over nodes with ``x_i > 0``, h~(y) = -1/(e^y - 1)."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ht = -1.0 / np.expm1(mu)
        return np.sum(np.where(x > 0, x**2 * ht, 0.0), axis=-1)


def verify_shannon_fairness(x, topo: Topology, trials: int, rng: np.random.Generator,
                            tol: float = 1e-9) -> FairnessReport:
    """Monte Carlo check that ``log(1+SIR)`` rates maximise ``sum x_i^2 h~(mu_i)``
    over rates ``log(1 + p_i / sum_j a_{j-i} p_j)``.

    Since ``h~(log(1+s)) = -1/s`` the check reduces to :func:`verify_fairness`;
    both forms are evaluated and the worse violation is reported.
    """
    x = check_queue_state(x, topo)
    if not np.any(x > 0):
        raise ModelError("fairness check needs at least one non-empty queue")
    best = float(shannon_utility(x, shannon_rates(x, topo)))
    P = log_uniform_witnesses(rng, trials, topo.n)
    cand = shannon_utility(x, shannon_rates(P, topo))
    rel = (cand - best) / np.abs(best)
    at_x = float(shannon_utility(x, shannon_rates(x * 2.3, topo)))
    gap = abs(at_x - best) / abs(best)
    # the same witnesses through the SIR reduction
    reduced = (optimal_cost(x, topo) - weighted_cost(x, P, topo)) / np.abs(weighted_cost(x, P, topo))
    worst = np.maximum(rel, reduced)
    return FairnessReport(trials, float(worst.max(initial=-np.inf)), gap, int(np.sum(worst > tol)))


def symmetric_threshold(kernel: InterferenceKernel) -> float:
    """Largest symmetric arrival rate inside the witness set: ``1 / sum_j a_j``."""
    return 1.0 / kernel.total


# ---------------------------------------------------------------------------
# Periodic feasibility
# ---------------------------------------------------------------------------


@dataclass
class FeasibilityCertificate:
    feasible: bool
    rho: float
    witness: np.ndarray
    nu: np.ndarray  # psi(witness) on the cell
    margin: float  # min_i (nu_i - lambda_i)
    iterations: int


def spectral_radius(M: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000):
    """Perron root and vector of a non-negative irreducible matrix.

    Iterates on ``M + I`` (same Perron vector, aperiodic) and stops when the
    Collatz-Wielandt bounds ``min (Mp)_i/p_i <= rho <= max (Mp)_i/p_i`` are
    within ``tol``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    p = np.ones(n)
    S = M + np.eye(n)
    for it in range(1, max_iter + 1):
        q = S @ p
        p = q / q.max()
        Mp = M @ p
        if np.any(p <= 0):
            raise ConvergenceError("Perron vector lost positivity (reducible matrix?)")
        r = Mp / p
        lo, hi = r.min(), r.max()
        if hi - lo <= tol * max(hi, 1.0):
            return 0.5 * (lo + hi), p, it
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def periodic_feasibility(lam, kernel: InterferenceKernel, cell=None,
                         tol: float = 1e-10, max_iter: int = 100_000) -> FeasibilityCertificate:
    """Decide whether periodic arrival rates lie strictly inside the witness set.

    ``lam`` is the rate table over the period cell (array shaped like the cell,
    or flat with ``cell`` giving the dims).  The kernel is folded onto the cell
    with wrap-around; the rates are feasible iff the Perron root of
    ``diag(lam) A`` is below 1, and then the Perron vector ``p`` satisfies
    ``psi_i(p) = lam_i / rho > lam_i``.
    """
    lam = np.asarray(lam, dtype=float)
    if cell is None:
        cell = lam.shape if lam.ndim == kernel.dimension else (lam.size,)
    lam = lam.reshape(-1)
    if np.any(lam < 0):
        raise ModelError("arrival rates must be non-negative")
    A = kernel.fold(cell)
    if A.shape[0] != lam.size:
        raise ModelError("rate table does not match the cell size")
    # zero rates make diag(lam) A reducible; lifting them to a tiny positive
    # level can only raise the Perron root, so the verdict stays conservative
    lifted = np.maximum(lam, 1e-9) if np.any(lam == 0) else lam
    rho, p, it = spectral_radius(np.diag(lifted) @ A, tol, max_iter)
    p = p / p.max()
    nu = p / (A @ p)
    margin = float(np.min(nu - lam))
    feasible = bool(rho < 1.0 - tol and margin > 0)
    return FeasibilityCertificate(feasible, float(rho), p, nu, margin, it)
