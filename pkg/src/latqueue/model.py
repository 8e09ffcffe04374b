"""Domain types: interference kernels, topologies, arrivals, utilities, scenarios.

All objects here are immutable after construction.  Node indices are flat
integers; for torus topologies the bijection between flat indices and lattice
coordinates is row-major (last axis fastest) and exposed through
:meth:`Topology.coords_of` / :meth:`Topology.index_of`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

PMF_TOL = 1e-12
CONDITION_HORIZON = 10_000
CONDITION_TOL = 1e-9
CONDITION_LIMIT = 0.05  # largest log g(y+1)/g(y) accepted at the horizon


class ModelError(ValueError):
    """Raised when a domain object is constructed with invalid data."""


# ---------------------------------------------------------------------------
# Interference kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterferenceKernel:
    """Symmetric interference coefficients ``a_j`` on the d-dimensional lattice.

    ``support`` maps integer offsets (tuples of length ``dimension``) to
    non-negative weights.  The zero offset must carry weight 1 and the map
    must be symmetric under ``j -> -j``.
    """

    support: Mapping[tuple[int, ...], float]
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ModelError("kernel dimension must be a positive integer")
        clean = {}
        for off, w in self.support.items():
            off = tuple(int(o) for o in off)
            if len(off) != self.dimension:
                raise ModelError(f"offset {off} does not have dimension {self.dimension}")
            if not (w >= 0) or not math.isfinite(w):
                raise ModelError(f"kernel weight at {off} must be finite and non-negative")
            if w > 0:
                clean[off] = float(w)
        zero = (0,) * self.dimension
        if clean.get(zero) != 1.0:
            raise ModelError("kernel must have a_0 = 1")
        for off, w in clean.items():
            neg = tuple(-o for o in off)
            if clean.get(neg) != w:
                raise ModelError(f"kernel is not symmetric: a{off} != a{neg}")
        object.__setattr__(self, "support", dict(sorted(clean.items())))

    @classmethod
    def nearest_neighbour(cls, d: int = 1) -> "InterferenceKernel":
        """0/1 kernel on the lattice: self plus the 2d unit-offset neighbours."""
        sup = {(0,) * d: 1.0}
        for k in range(d):
            for s in (-1, 1):
                off = [0] * d
                off[k] = s
                sup[tuple(off)] = 1.0
        return cls(sup, d)

    @classmethod
    def isolated(cls, d: int = 1) -> "InterferenceKernel":
        return cls({(0,) * d: 1.0}, d)

    @classmethod
    def from_1d(cls, weights: Sequence[float]) -> "InterferenceKernel":
        """Build a 1-d kernel from ``(a_{-L}, ..., a_0, ..., a_L)``."""
        if len(weights) % 2 != 1:
            raise ModelError("1-d kernel weights must have odd length")
        L = len(weights) // 2
        return cls({(j - L,): float(w) for j, w in enumerate(weights)}, 1)

    @property
    def reach(self) -> int:
        """L = max |j| (sup-norm of the offset) over the support."""
        return max(max(abs(o) for o in off) for off in self.support)

    @property
    def total(self) -> float:
        return float(sum(self.support.values()))

    def is_zero_one(self) -> bool:
        return all(w == 1.0 for w in self.support.values())

    def is_nearest_neighbour(self) -> bool:
        return self.support == InterferenceKernel.nearest_neighbour(self.dimension).support

    def fold(self, dims: Sequence[int]) -> np.ndarray:
        """Kernel folded onto a periodic cell: ``A[i, j] = sum a_o`` over offsets
        ``o`` with ``coords(i) + o == coords(j)`` modulo ``dims``."""
        dims = tuple(int(c) for c in dims)
        if len(dims) != self.dimension:
            raise ModelError("cell dimension does not match kernel dimension")
        n = int(np.prod(dims))
        A = np.zeros((n, n))
        cells = list(itertools.product(*(range(c) for c in dims)))
        for i, ci in enumerate(cells):
            for off, w in self.support.items():
                cj = tuple((c + o) % m for c, o, m in zip(ci, off, dims))
                A[i, np.ravel_multi_index(cj, dims)] += w
        return A


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Topology:
    """Finite node set with weighted interference neighbourhoods.

    ``nbr_idx`` / ``nbr_w`` are padded ``(n, K)`` arrays: column 0 is the node
    itself with weight 1; padding entries point at the node itself with
    weight 0.  ``lattice_nbrs`` lists, for torus topologies, the 2d lattice
    neighbours used for multi-hop routing.
    """

    kind: str
    n: int
    nbr_idx: np.ndarray
    nbr_w: np.ndarray
    nbr_cnt: np.ndarray
    kernel: InterferenceKernel | None = None
    sides: tuple[int, ...] = ()
    origin: tuple[int, ...] = ()
    lattice_nbrs: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return len(self.sides)

    def neighbourhood(self, i: int) -> list[tuple[int, float]]:
        c = int(self.nbr_cnt[i])
        return [(int(j), float(w)) for j, w in zip(self.nbr_idx[i, :c], self.nbr_w[i, :c])]

    def weight_matrix(self) -> np.ndarray:
        """Dense ``W[i, j] = a_{j-i}`` (zero outside neighbourhoods)."""
        W = np.zeros((self.n, self.n))
        for i in range(self.n):
            for j, w in self.neighbourhood(i):
                W[i, j] += w
        return W

    def coords_of(self, index: int) -> tuple[int, ...]:
        if self.kind != "torus":
            raise ModelError("coordinates are only defined for torus topologies")
        raw = np.unravel_index(int(index), self.sides)
        return tuple(int(r) + o for r, o in zip(raw, self.origin))

    def index_of(self, coords: Sequence[int]) -> int:
        if self.kind != "torus":
            raise ModelError("coordinates are only defined for torus topologies")
        raw = tuple((int(c) - o) % s for c, o, s in zip(coords, self.origin, self.sides))
        return int(np.ravel_multi_index(raw, self.sides))

    def describe(self) -> dict:
        out = {"kind": self.kind, "nodes": self.n}
        if self.kind == "torus":
            out["sides"] = list(self.sides)
            out["origin"] = list(self.origin)
            out["node_count_rule"] = "prod(sides)"
        return out


def _pack(neigh: list[list[tuple[int, float]]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(neigh)
    K = max(len(row) for row in neigh)
    idx = np.repeat(np.arange(n, dtype=np.int64)[:, None], K, axis=1)
    w = np.zeros((n, K))
    cnt = np.zeros(n, dtype=np.int64)
    for i, row in enumerate(neigh):
        cnt[i] = len(row)
        for k, (j, wt) in enumerate(row):
            idx[i, k] = j
            w[i, k] = wt
    return idx, w, cnt


def build_topology(
    kind: str,
    dims: Sequence[int] | int | None = None,
    kernel: InterferenceKernel | None = None,
    *,
    convention: str = "sides",
    adjacency: np.ndarray | Mapping | None = None,
) -> Topology:
    """Materialise neighbourhood tables.

    kind
        ``"torus"``, ``"line"`` (open segment, no wrap) or ``"graph"``.
    dims
        For ``convention="sides"`` the number of nodes along each axis, with
        coordinates ``0..n_k-1``.  For ``convention="half"`` the half-widths
        ``N_k``: the axis holds ``2 N_k`` nodes with coordinates
        ``-N_k..N_k-1``.  Either way each axis must be long enough that the
        offsets ``+j`` and ``-j`` never alias, i.e. ``sides_k > 2L``
        (equivalently ``N_k > L``).
    adjacency
        For ``kind="graph"``: symmetric non-negative weight matrix (or a
        mapping ``(i, j) -> w``) of off-diagonal interference weights.
    """
    if kind == "graph":
        return _graph_topology(adjacency)
    if kernel is None:
        raise ModelError(f"{kind} topology needs an interference kernel")
    if dims is None:
        raise ModelError(f"{kind} topology needs dims")
    if isinstance(dims, (int, np.integer)):
        dims = (int(dims),)
    dims = tuple(int(v) for v in dims)
    if len(dims) != kernel.dimension:
        raise ModelError(f"dimension mismatch: kernel is {kernel.dimension}-d, dims {dims}")
    if any(v < 1 for v in dims):
        raise ModelError("dims must be positive")
    if convention == "sides":
        sides, origin = dims, (0,) * len(dims)
    elif convention == "half":
        sides, origin = tuple(2 * v for v in dims), tuple(-v for v in dims)
    else:
        raise ModelError(f"unknown convention {convention!r}")
    L = kernel.reach
    if kind == "torus":
        for s in sides:
            if s <= 2 * L:
                half = s / 2
                raise ModelError(
                    f"torus axis with {s} nodes (N_k = {half:g}) must satisfy N_k > L = {L}"
                )
    elif kind != "line":
        raise ModelError(f"unknown topology kind {kind!r}")

    n = int(np.prod(sides))
    zero = (0,) * len(sides)
    others = [(off, w) for off, w in kernel.support.items() if off != zero]
    neigh = []
    for i in range(n):
        raw = np.unravel_index(i, sides)
        row = [(i, 1.0)]
        for off, w in others:
            c = [r + o for r, o in zip(raw, off)]
            if kind == "torus":
                c = [v % s for v, s in zip(c, sides)]
            elif any(v < 0 or v >= s for v, s in zip(c, sides)):
                continue
            row.append((int(np.ravel_multi_index(tuple(c), sides)), w))
        neigh.append(row)
    idx, w, cnt = _pack(neigh)

    lat = None
    if kind == "torus":
        d = len(sides)
        lat = np.empty((n, 2 * d), dtype=np.int64)
        for i in range(n):
            raw = np.unravel_index(i, sides)
            k = 0
            for ax in range(d):
                for s in (-1, 1):
                    c = list(raw)
                    c[ax] = (c[ax] + s) % sides[ax]
                    lat[i, k] = np.ravel_multi_index(tuple(c), sides)
                    k += 1
    return Topology(kind, n, idx, w, cnt, kernel, sides, origin, lat)


def _graph_topology(adjacency) -> Topology:
    if adjacency is None:
        raise ModelError("graph topology needs an adjacency")
    if isinstance(adjacency, Mapping):
        n = 1 + max(max(int(i), int(j)) for i, j in adjacency)
        W = np.zeros((n, n))
        for (i, j), w in adjacency.items():
            W[int(i), int(j)] = w
    else:
        W = np.array(adjacency, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ModelError("adjacency must be a square matrix")
    if np.any(W < 0) or not np.all(np.isfinite(W)):
        raise ModelError("adjacency weights must be finite and non-negative")
    if not np.array_equal(W, W.T):
        raise ModelError("adjacency must be symmetric")
    n = W.shape[0]
    neigh = []
    for i in range(n):
        row = [(i, 1.0)]
        row += [(j, float(W[i, j])) for j in range(n) if j != i and W[i, j] > 0]
        neigh.append(row)
    idx, w, cnt = _pack(neigh)
    return Topology("graph", n, idx, w, cnt)


def ring(n: int, weights: Sequence[float] = (1.0, 1.0, 1.0)) -> Topology:
    """1-d torus with ``n`` nodes and kernel ``(a_{-L}..a_L)``."""
    return build_topology("torus", (n,), InterferenceKernel.from_1d(weights))


# ---------------------------------------------------------------------------
# Arrivals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ArrivalSpec:
    """Per-node arrival distributions.

    Discrete-time kinds (``bernoulli``, ``pmf``) store one pmf per node as a
    row of ``pmf`` (support ``0..M``).  ``poisson`` stores only the per-node
    rates and is meant for the continuous-time model.
    """

    kind: str
    pmf: np.ndarray | None
    rates: np.ndarray
    truncation: int | None = None
    moments: np.ndarray = field(default=None)  # (3, n): E xi, E xi^2, E xi^3

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "rates", rates)
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise ModelError("arrival rates must be finite and non-negative")
        if self.kind in ("bernoulli", "pmf"):
            pmf = np.asarray(self.pmf, dtype=float)
            if pmf.ndim != 2 or pmf.shape[0] != rates.size:
                raise ModelError("pmf must have one row per node")
            if np.any(pmf < 0):
                raise ModelError("pmf entries must be non-negative")
            if np.any(np.abs(pmf.sum(axis=1) - 1.0) > PMF_TOL):
                raise ModelError("each pmf must sum to 1 within 1e-12")
            object.__setattr__(self, "pmf", pmf)
            support = np.arange(pmf.shape[1], dtype=float)
            mom = np.stack([pmf @ support**k for k in (1, 2, 3)])
            if np.any(np.abs(mom[0] - rates) > PMF_TOL):
                raise ModelError("stored rates disagree with pmf means")
        elif self.kind == "poisson":
            lam = rates
            mom = np.stack([lam, lam + lam**2, lam**3 + 3 * lam**2 + lam])
        else:
            raise ModelError(f"unknown arrival kind {self.kind!r}")
        if self.kind == "bernoulli" and np.any(rates > 1):
            raise ModelError("bernoulli rates must lie in [0, 1]")
        if self.moments is not None:
            given = np.asarray(self.moments, dtype=float)
            if given.shape != mom.shape or np.any(np.abs(given - mom) > PMF_TOL):
                raise ModelError("stored moments disagree with the pmf")
        object.__setattr__(self, "moments", mom)

    @property
    def n(self) -> int:
        return self.rates.size

    @property
    def discrete(self) -> bool:
        return self.kind != "poisson"

    def cdf(self) -> np.ndarray:
        if self.pmf is None:
            raise ModelError("poisson arrivals have no slot pmf")
        c = np.cumsum(self.pmf, axis=1)
        c[:, -1] = 1.0
        return c

    def truncated(self, M: int) -> "ArrivalSpec":
        """Arrivals clipped at ``M``: ``min(xi, M)``."""
        if self.pmf is None:
            raise ModelError("cannot truncate poisson arrivals")
        M = int(M)
        if M < 1:
            raise ModelError("truncation level must be a positive integer")
        if self.pmf.shape[1] <= M + 1:
            return ArrivalSpec(self.kind, self.pmf, self.rates, M)
        p = self.pmf[:, : M + 1].copy()
        p[:, M] += self.pmf[:, M + 1 :].sum(axis=1)
        rates = p @ np.arange(M + 1)
        return ArrivalSpec("pmf", p, rates, M)

    def scaled_rows(self, n: int) -> "ArrivalSpec":
        """Broadcast a single-node spec to ``n`` identical nodes."""
        if self.n != 1:
            raise ModelError("only single-row specs can be broadcast")
        pmf = None if self.pmf is None else np.repeat(self.pmf, n, axis=0)
        return ArrivalSpec(self.kind, pmf, np.repeat(self.rates, n), self.truncation)


def bernoulli(rates, n: int | None = None) -> ArrivalSpec:
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if n is not None and rates.size == 1:
        rates = np.repeat(rates, n)
    if np.any(rates < 0) or np.any(rates > 1):
        raise ModelError("bernoulli rates must lie in [0, 1]")
    pmf = np.stack([1.0 - rates, rates], axis=1)
    return ArrivalSpec("bernoulli", pmf, rates)


def from_pmf(pmf, n: int = 1) -> ArrivalSpec:
    """``pmf`` is a mapping ``value -> probability`` or a sequence over 0..M,
    shared by ``n`` nodes; or a 2-d array with one row per node."""
    if isinstance(pmf, Mapping):
        M = max(int(k) for k in pmf)
        row = np.zeros(M + 1)
        for k, v in pmf.items():
            if int(k) < 0:
                raise ModelError("pmf support must be non-negative")
            row[int(k)] = v
        arr = np.repeat(row[None, :], n, axis=0)
    else:
        arr = np.asarray(pmf, dtype=float)
        if arr.ndim == 1:
            arr = np.repeat(arr[None, :], n, axis=0)
    rates = arr @ np.arange(arr.shape[1])
    return ArrivalSpec("pmf", arr, rates)


def poisson(rates, n: int | None = None) -> ArrivalSpec:
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if n is not None and rates.size == 1:
        rates = np.repeat(rates, n)
    return ArrivalSpec("poisson", None, rates)


def moments_of(arrivals: ArrivalSpec, order: int) -> np.ndarray:
    """Exact per-node moment ``E xi^order`` for ``order`` in {1, 2, 3}."""
    if order not in (1, 2, 3):
        raise ModelError("moment order must be 1, 2 or 3")
    return arrivals.moments[order - 1].copy()


# ---------------------------------------------------------------------------
# Utilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UtilityPair:
    """Weight function ``g`` on the non-negative integers and concave ``h``.

    ``log_g`` is supplied for families whose ``g`` overflows doubles on the
    sampled horizon; ratios ``g(y+1)/g(y)`` are evaluated through it.
    """

    tag: str
    params: dict
    g: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    h_prime: Callable[[np.ndarray], np.ndarray]
    log_g: Callable[[np.ndarray], np.ndarray] | None = None

    def delta(self, y):
        y = np.asarray(y)
        return self.g(y + 1) - self.g(y)

    def G(self, z):
        """Partial sums ``G(z) = sum_{y=0}^{z} g(y)`` (vectorised)."""
        z = np.asarray(z, dtype=np.int64)
        top = int(z.max(initial=0)) + 1
        cum = np.cumsum(self.g(np.arange(top + 1)))
        return cum[z]

    def log_ratio(self, y):
        """``log(g(y+1)/g(y))``."""
        y = np.asarray(y, dtype=float)
        if self.log_g is not None:
            return self.log_g(y + 1) - self.log_g(y)
        return np.log(self.g(y + 1)) - np.log(self.g(y))


def power(alpha: float) -> UtilityPair:
    """alpha-fair pair: ``g = y^alpha``, ``h = y^(1-alpha)/(1-alpha)`` (log at 1)."""
    a = float(alpha)
    if a <= 0:
        raise ModelError("alpha must be positive")
    g = lambda y: np.asarray(y, dtype=float) ** a
    log_g = lambda y: a * np.log(np.asarray(y, dtype=float))
    if a == 1.0:
        h = lambda y: np.log(y)
    else:
        h = lambda y: np.asarray(y, dtype=float) ** (1 - a) / (1 - a)
    hp = lambda y: np.asarray(y, dtype=float) ** (-a)
    return UtilityPair("power", {"alpha": a}, g, h, hp, log_g)


def quadratic_inverse() -> UtilityPair:
    """The 2-fair pair ``g = y^2``, ``h = -1/y``."""
    u = power(2.0)
    h = lambda y: -1.0 / np.asarray(y, dtype=float)
    hp = lambda y: np.asarray(y, dtype=float) ** -2
    return UtilityPair("quadratic-inverse", {}, u.g, h, hp, u.log_g)


def _log_h():
    return (lambda y: np.log(y)), (lambda y: 1.0 / np.asarray(y, dtype=float))


def exp_log_power(beta: float) -> UtilityPair:
    """``g(y) = exp(log(y)^beta)`` for y >= 1, ``g(0) = 0``; paired with log."""
    b = float(beta)
    if b <= 0:
        raise ModelError("beta must be positive")

    def log_g(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(y >= 1, np.log(np.maximum(y, 1.0)) ** b, -np.inf)

    def g(y):
        with np.errstate(over="ignore"):
            return np.exp(log_g(y))

    h, hp = _log_h()
    return UtilityPair("exp-log-power", {"beta": b}, g, h, hp, log_g)


def stretched_exp(gamma: float) -> UtilityPair:
    """``g(y) = exp(y^gamma)`` with ``0 < gamma < 1``; paired with log."""
    c = float(gamma)
    if not 0 < c < 1:
        raise ModelError("gamma must lie in (0, 1)")
    log_g = lambda y: np.asarray(y, dtype=float) ** c

    def g(y):
        with np.errstate(over="ignore"):
            return np.exp(log_g(y))

    h, hp = _log_h()
    return UtilityPair("stretched-exp", {"gamma": c}, g, h, hp, log_g)


def shannon_companion() -> UtilityPair:
    """``g = y^2`` with ``h(y) = -1/(e^y - 1)``, the pair matched to log(1+SIR) rates."""
    u = power(2.0)
    h = lambda y: -1.0 / np.expm1(np.asarray(y, dtype=float))
    def hp(y):
        y = np.asarray(y, dtype=float)
        return np.exp(y) / np.expm1(y) ** 2
    return UtilityPair("shannon-companion", {}, u.g, h, hp, u.log_g)


UTILITY_FAMILIES = {
    "power": power,
    "quadratic-inverse": quadratic_inverse,
    "exp-log-power": exp_log_power,
    "stretched-exp": stretched_exp,
    "shannon-companion": shannon_companion,
}


def make_utility(tag: str, **params) -> UtilityPair:
    try:
        factory = UTILITY_FAMILIES[tag]
    except KeyError:
        raise ModelError(f"unknown utility family {tag!r}") from None
    return factory(**params)


@dataclass
class ConditionReport:
    ok: bool
    y0: int | None
    detail: str


def check_condition_g(u: UtilityPair, horizon: int = CONDITION_HORIZON,
                      tol: float = CONDITION_TOL) -> ConditionReport:
    """Sampled check that g is increasing and g(y+1)/g(y) decreases toward 1.

    Returns the smallest ``y0`` beyond which ``log(g(y+1)/g(y))`` is positive,
    finite and non-increasing up to ``horizon``.
    """
    y = np.arange(1, horizon + 1, dtype=float)
    r = u.log_ratio(y)
    if not np.all(np.isfinite(r)):
        return ConditionReport(False, None, "g(y+1)/g(y) not finite on the grid")
    if np.any(r <= 0):
        return ConditionReport(False, None, "g not strictly increasing")
    g0, g1 = u.g(np.array([0.0, 1.0]))
    if not g1 > g0:
        return ConditionReport(False, None, "g(1) <= g(0)")
    rising = np.nonzero(np.diff(r) > tol * np.maximum(r[:-1], 1e-300))[0]
    y0 = 1 if rising.size == 0 else int(y[rising[-1] + 1])
    if y0 >= horizon:
        return ConditionReport(False, None, "ratio never settles below the horizon")
    # still shrinking toward 1 at the end of the grid, not levelling off above it
    if not (r[-1] < CONDITION_LIMIT and r[-1] < (1 - 1e-3) * r[horizon // 2]):
        return ConditionReport(False, y0, "g(y+1)/g(y) does not approach 1 on the grid")
    return ConditionReport(True, y0, f"ratio non-increasing for y >= {y0}; "
                                     f"final log-ratio {r[-1]:.3e}")


def check_condition_h(u: UtilityPair, lo: float = 1e-3, hi: float = 3.0,
                      points: int = 2001) -> ConditionReport:
    """Finite-difference check that h is strictly increasing and concave."""
    y = np.linspace(lo, hi, points)
    v = u.h(y)
    d1 = np.diff(v)
    d2 = np.diff(v, 2)
    scale = np.maximum(np.abs(v[1:-1]), 1.0)
    if np.any(d1 <= 0):
        return ConditionReport(False, None, "h not strictly increasing")
    if np.any(d2 > CONDITION_TOL * scale):
        return ConditionReport(False, None, "h not concave")
    return ConditionReport(True, None, f"checked on [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# Lyapunov parameters and scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LyapunovSpec:
    """Reference rates ``nu``, margin ``epsilon`` and the utility pair."""

    nu: np.ndarray
    epsilon: float
    utility: UtilityPair

    def __post_init__(self):
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        object.__setattr__(self, "nu", nu)
        if np.any(nu <= 0):
            raise ModelError("reference rates must be positive")
        if not self.epsilon > 0:
            raise ModelError("epsilon must be positive")

    def weights(self) -> np.ndarray:
        """``h'(nu_i)``."""
        return np.asarray(self.utility.h_prime(self.nu), dtype=float)

    def check(self, rates, tol: float = 1e-12) -> None:
        """Require ``lambda_i < nu_i`` and ``lambda_i <= nu_i - epsilon``."""
        lam = np.broadcast_to(np.asarray(rates, dtype=float), self.nu.shape)
        if np.any(lam >= self.nu):
            raise ModelError("arrival rates must be strictly below the reference rates")
        if np.any(lam > self.nu - self.epsilon + tol):
            raise ModelError("margin violated: need lambda_i <= nu_i - epsilon")


@dataclass(frozen=True)
class Routing:
    """Single-hop (``q is None``) or symmetric multi-hop with exit probability q."""

    q: float | None = None
    degree: str = "lattice"  # or "2^d"

    @property
    def multihop(self) -> bool:
        return self.q is not None

    def __post_init__(self):
        if self.q is not None and not 0 < self.q <= 1:
            raise ModelError("exit probability q must lie in (0, 1]")
        if self.degree not in ("lattice", "2^d"):
            raise ModelError("routing degree must be 'lattice' or '2^d'")


@dataclass(frozen=True)
class RateFamily:
    tag: str = "sir"
    noise: float = 0.0

    def __post_init__(self):
        if self.tag not in ("sir", "shannon", "sinr"):
            raise ModelError(f"unknown rate family {self.tag!r}")
        if self.noise < 0:
            raise ModelError("noise must be non-negative")
        if self.tag != "sinr" and self.noise != 0:
            raise ModelError("noise is only meaningful for sinr rates")

    @property
    def code(self) -> int:
        return {"sir": 0, "shannon": 1, "sinr": 2}[self.tag]

    @property
    def psi_max(self) -> float:
        return 1.0 if self.tag == "sir" else math.log(2.0)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    topology: Topology
    arrivals: ArrivalSpec
    rates: RateFamily = RateFamily()
    scheduler: str = "D2"
    routing: Routing = Routing()
    time_model: str = "discrete"
    horizon: float = 10_000
    burn_in: float = 0.1
    replications: int = 1
    seed: int = 0
    batches: int = 20
    trace_stride: float = 0
    hist_cap: int = 256
    initial: np.ndarray | None = None

    def __post_init__(self):
        topo, arr = self.topology, self.arrivals
        if arr.n != topo.n:
            raise ModelError(f"arrivals cover {arr.n} nodes, topology has {topo.n}")
        if self.time_model not in ("discrete", "continuous"):
            raise ModelError("time model must be 'discrete' or 'continuous'")
        if self.time_model == "discrete":
            if self.scheduler not in ("D1", "D2"):
                raise ModelError("discrete time needs scheduler D1 or D2")
            if not arr.discrete:
                raise ModelError("discrete time needs bernoulli or pmf arrivals")
            if self.scheduler == "D1" and self.rates.tag != "sir":
                raise ModelError("D1 realises SIR rates only")
        else:
            if self.scheduler != "uniformized":
                raise ModelError("continuous time uses the uniformized scheduler")
            if arr.kind != "poisson":
                raise ModelError("continuous time needs poisson arrivals")
        if self.routing.multihop:
            if topo.kind != "torus" or topo.kernel is None or not topo.kernel.is_nearest_neighbour():
                raise ModelError("multi-hop routing needs a torus with the 0/1 lattice-neighbour kernel")
            if not np.allclose(arr.rates, arr.rates[0], rtol=0, atol=1e-15):
                raise ModelError("multi-hop routing needs symmetric arrival rates")
            if arr.pmf is not None and not np.all(arr.pmf == arr.pmf[0]):
                raise ModelError("multi-hop routing needs identically distributed arrivals")
        if not self.horizon > 0:
            raise ModelError("horizon must be positive")
        if not 0 <= self.burn_in < 1:
            raise ModelError("burn-in fraction must lie in [0, 1)")
        if self.replications < 1:
            raise ModelError("replication count must be at least 1")
        if self.batches < 1:
            raise ModelError("batch count must be at least 1")
        if self.hist_cap < 2:
            raise ModelError("histogram cap must be at least 2")
        if self.initial is not None:
            x0 = np.asarray(self.initial, dtype=np.int64)
            if x0.shape != (topo.n,) or np.any(x0 < 0):
                raise ModelError("initial state must be a non-negative vector per node")
            object.__setattr__(self, "initial", x0)

    @property
    def n(self) -> int:
        return self.topology.n

    @property
    def throughput(self) -> np.ndarray:
        """Per-node total throughput: exogenous rate divided by q for multi-hop."""
        lam = self.arrivals.rates
        return lam / self.routing.q if self.routing.multihop else lam

    def route_table(self) -> tuple[np.ndarray, int]:
        """Routing neighbour table and the per-neighbour denominator."""
        topo = self.topology
        if not self.routing.multihop:
            return np.zeros((topo.n, 1), dtype=np.int64), 1
        nb = topo.lattice_nbrs
        deg = nb.shape[1] if self.routing.degree == "lattice" else 2 ** topo.dimension
        return nb, deg

    def replace(self, **changes) -> "ScenarioConfig":
        from dataclasses import replace
        return replace(self, **changes)


def check_queue_state(x, topo: Topology | None = None) -> np.ndarray:
    """Validate a queue-length vector and return it as int64."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ModelError("queue state must be a vector")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ModelError("queue lengths must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ModelError("queue lengths must be non-negative")
    if topo is not None and arr.size != topo.n:
        raise ModelError(f"state has {arr.size} entries, topology has {topo.n} nodes")
    return arr
