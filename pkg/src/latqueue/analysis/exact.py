"""Stationary distributions of small truncated chains by linear solve.

States are queue-length vectors in {0..K}^n stored in row-major order.
Arrivals into a queue already at the cap K are discarded.  Discrete time
requires the independent-thinning scheduler, which makes the one-slot
transition a product over nodes given the current state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..model import ModelError, ScenarioConfig
from ..rates import rates_for
from .drift import all_states

MAX_STATES = 1_000_000
DENSE_LIMIT = 2_000
RESIDUAL_TOL = 1e-10
TAIL_TOL = 1e-8


class SolveError(RuntimeError):
    pass


@dataclass
class ExactSolution:
    pi: np.ndarray  # flat, row-major over {0..cap}^n
    n: int
    cap: int
    residual: float
    tail_mass: float  # mass on states with some queue at the cap
    psi_mean: np.ndarray  # E psi_i(X)
    marginals: np.ndarray = field(repr=False)  # (n, cap+1)
    method: str = "sparse"
    time_model: str = "discrete"

    @property
    def states(self) -> int:
        return self.pi.size

    def expect(self, f) -> np.ndarray:
        """Per-node ``E f(X_i)``."""
        vals = np.asarray(f(np.arange(self.cap + 1, dtype=float)), dtype=float)
        return self.marginals @ vals

    @property
    def mean(self) -> np.ndarray:
        return self.expect(lambda y: y)

    @property
    def second(self) -> np.ndarray:
        return self.expect(lambda y: y * y)

    def joint(self) -> np.ndarray:
        return self.pi.reshape((self.cap + 1,) * self.n)


def _pmf_rows(arr):
    if arr.pmf is None:
        raise ModelError("discrete exact solve needs slot pmfs")
    return arr.pmf


def _discrete_matrix(scenario: ScenarioConfig, X, psi, K):
    n = scenario.n
    pmf = _pmf_rows(scenario.arrivals)
    M = pmf.shape[1] - 1
    pad = np.zeros((n, M + 3))
    pad[:, 1 : M + 2] = pmf  # pad[:, k + 1] = P(xi = k)
    deltas = np.arange(-1, M + 1)
    # P(xi - eta = d) = psi P(xi = d + 1) + (1 - psi) P(xi = d)
    probs = [psi[:, i, None] * pad[i, deltas + 2] + (1 - psi[:, i, None]) * pad[i, deltas + 1]
             for i in range(n)]
    S = X.shape[0]
    dims = (K + 1,) * n
    rows, cols, vals = [], [], []
    src = np.arange(S)
    for combo in itertools.product(range(deltas.size), repeat=n):
        p = np.ones(S)
        for i, c in enumerate(combo):
            p = p * probs[i][:, c]
        keep = p > 0
        if not np.any(keep):
            continue
        dest = np.minimum(X[keep] + deltas[list(combo)], K)
        rows.append(src[keep])
        cols.append(np.ravel_multi_index(dest.T, dims))
        vals.append(p[keep])
    P = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(S, S))
    return P


def _generator(scenario: ScenarioConfig, X, psi, K):
    n = scenario.n
    S = X.shape[0]
    dims = (K + 1,) * n
    lam = scenario.arrivals.rates
    src = np.arange(S)
    rows, cols, vals = [], [], []

    def add(mask, dest, rate):
        rows.append(src[mask])
        cols.append(np.ravel_multi_index(dest[mask].T, dims))
        vals.append(rate[mask])

    eye = np.eye(n, dtype=np.int64)
    routing = scenario.routing
    nb, deg = scenario.route_table()
    q = routing.q if routing.multihop else 1.0
    for i in range(n):
        up = X[:, i] < K
        add(up & (lam[i] > 0), X + eye[i], np.full(S, lam[i]))
        busy = psi[:, i] > 0
        down = X - eye[i]
        # a hop to a full queue loses the job, same as leaving
        exit_rate = psi[:, i] * q
        if routing.multihop:
            for m in range(nb.shape[1]):
                j = nb[i, m]
                r = psi[:, i] * (1 - q) / deg
                moved = down + eye[j]
                full = moved[:, j] > K
                add(busy & ~full, moved, r)
                exit_rate = exit_rate + np.where(full, r, 0.0)
            exit_rate = exit_rate + psi[:, i] * (1 - q) * (deg - nb.shape[1]) / deg
        add(busy, down, exit_rate)
    R = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(S, S))
    R.setdiag(0)
    R.eliminate_zeros()
    out = np.asarray(R.sum(axis=1)).ravel()
    return R - sparse.diags(out)


def _solve_balance(A_T, S):
    """Solve ``A^T pi = 0``, ``sum pi = 1`` for a generator-like ``A``.

    The equation of the empty state is replaced by ``pi_0 = 1`` and the
    result renormalised; a dense row of ones would fill in the sparse LU.
    """
    keep = np.ones(S)
    keep[0] = 0.0
    A = sparse.diags(keep) @ A_T.tocsr() + sparse.csr_matrix(([1.0], ([0], [0])), shape=(S, S))
    b = np.zeros(S)
    b[0] = 1.0
    if S > DENSE_LIMIT:
        method = "sparse"
        pi = spsolve(A.tocsc(), b)
    else:
        method = "dense"
        try:
            pi = np.linalg.solve(A.toarray(), b)
        except np.linalg.LinAlgError as exc:
            raise SolveError("singular balance system") from exc
    if not np.all(np.isfinite(pi)) or not pi.sum() > 0:
        raise SolveError("singular balance system")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum(), method


def _solve_once(scenario: ScenarioConfig, K: int) -> ExactSolution:
    n = scenario.n
    S = (K + 1) ** n
    if S > MAX_STATES:
        raise ModelError(f"state space (K+1)^n = {S} exceeds {MAX_STATES}")
    X = all_states(n, K)
    psi = rates_for(scenario.rates, X, scenario.topology)
    if scenario.time_model == "discrete":
        if scenario.scheduler != "D2" and n > 1:
            raise ModelError("exact discrete solves need the D2 scheduler")
        if scenario.routing.multihop:
            raise ModelError("exact discrete solves cover single-hop routing only")
        P = _discrete_matrix(scenario, X, psi, K)
        pi, method = _solve_balance((P - sparse.identity(S)).T.tocsr(), S)
        resid = float(np.max(np.abs(P.T @ pi - pi)))
    else:
        Q = _generator(scenario, X, psi, K)
        Lam = float(max(np.max(-Q.diagonal()), 1e-300))
        pi, method = _solve_balance(Q.T.tocsr(), S)
        resid = float(np.max(np.abs(Q.T @ pi))) / Lam  # = |pi P - pi| for P = I + Q/Lam
    marg = np.stack([np.bincount(X[:, i], weights=pi, minlength=K + 1) for i in range(n)])
    tail = float(pi[np.any(X == K, axis=1)].sum())
    return ExactSolution(pi, n, K, resid, tail, pi @ psi, marg, method, scenario.time_model)


def exact_stationary(scenario: ScenarioConfig, cap: int, auto_cap: bool = False,
                     tail_tol: float = TAIL_TOL, max_states: int = MAX_STATES) -> ExactSolution:
    """Stationary law of the chain truncated at ``cap``.

    With ``auto_cap`` the cap is doubled until the mass on boundary states
    drops below ``tail_tol`` or the next state space would be too large.
    """
    if cap < 1:
        raise ModelError("cap must be at least 1")
    sol = _solve_once(scenario, cap)
    while auto_cap and sol.tail_mass >= tail_tol:
        nxt = 2 * sol.cap
        if (nxt + 1) ** scenario.n > max_states:
            break
        sol = _solve_once(scenario, nxt)
    if sol.residual >= RESIDUAL_TOL:
        raise SolveError(f"balance residual {sol.residual:.3g} above {RESIDUAL_TOL}")
    return sol


def chain_matrix(scenario: ScenarioConfig, cap: int):
    """Sparse one-slot transition matrix (discrete) or generator (continuous)
    of the truncated chain, with the state list in row-major order."""
    X = all_states(scenario.n, cap)
    psi = rates_for(scenario.rates, X, scenario.topology)
    if scenario.time_model == "discrete":
        return _discrete_matrix(scenario, X, psi, cap), X
    return _generator(scenario, X, psi, cap), X
