"""Closed-form moment bounds and their comparison with estimates.

Each input moment may be exact (a vector over nodes, no interval) or a
batch matrix of shape (batches, n); in the latter case the weighted sums are
formed batch by batch and given a batch-means interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import ArrivalSpec, LyapunovSpec, ModelError
from .estimate import batch_ci

HOLDS, VIOLATED, INCONCLUSIVE = "holds", "violated", "inconclusive"


@dataclass
class Side:
    value: float
    ci: float = 0.0
    ok: bool = True


@dataclass
class BoundReport:
    name: str
    theoretical: dict
    lhs: Side
    rhs: Side
    verdict: str
    secondary: "BoundReport | None" = None
    notes: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    @property
    def ci(self) -> float:
        return max(self.lhs.ci, self.rhs.ci)

    def as_dict(self) -> dict:
        d = {"name": self.name, "theoretical": self.theoretical,
             "lhs": self.lhs.value, "lhs_ci": self.lhs.ci,
             "rhs": self.rhs.value, "rhs_ci": self.rhs.ci, "verdict": self.verdict,
             "notes": list(self.notes)}
        if self.secondary is not None:
            d["secondary"] = self.secondary.as_dict()
        return d


def verdict(lhs: Side, rhs: Side, tol: float = 1e-12) -> str:
    """``violated`` only when the intervals separate the wrong way."""
    slack = tol * max(1.0, abs(rhs.value))
    if lhs.value - lhs.ci > rhs.value + rhs.ci + slack:
        return VIOLATED
    if not (lhs.ok and rhs.ok):
        return INCONCLUSIVE
    if lhs.value <= rhs.value + slack:
        return HOLDS
    return INCONCLUSIVE


def _side(values, weights, const: float = 0.0) -> Side:
    """``sum_i w_i v_i + const`` from exact vectors or per-batch matrices."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.ndim <= 1:
        return Side(float(np.sum(w * v) + const))
    est = batch_ci(v @ np.broadcast_to(w, (v.shape[1],)) + const)
    return Side(est.value, est.half_width, est.ok)


def _report(name, theo, lhs, rhs, notes=()):
    return BoundReport(name, theo, lhs, rhs, verdict(lhs, rhs), notes=list(notes))


def bound_thm22(Eg, Edelta, spec: LyapunovSpec) -> BoundReport:
    """``sum_i h'(nu_i) E g(X_i) <= (1/eps) sum_i h'(nu_i) E Delta(X_i)``."""
    w = spec.weights()
    lhs = _side(Eg, w)
    rhs = _side(Edelta, w / spec.epsilon)
    return _report("thm22", {"epsilon": spec.epsilon}, lhs, rhs)


def bernoulli_constants(lam) -> tuple[np.ndarray, np.ndarray]:
    """Per-node ``(A_i, B_i) = (6 lam (1 - lam), 6 lam^3)``."""
    lam = np.asarray(lam, dtype=float)
    return 6 * lam * (1 - lam), 6 * lam**3


def thm23_constants(moments, nu):
    """Constants from arrival moments (rows E xi, E xi^2, E xi^3).

    Returns ``A, B, A_i, B_i`` where ``A, B`` carry the 1/nu_i^2 weights and
    ``A_i, B_i`` are the unweighted per-node terms.
    """
    m = np.asarray(moments, dtype=float)
    if m.shape[0] < 3 or not np.all(np.isfinite(m[2])):
        raise ModelError("third arrival moment is required")
    lam, m2, m3 = m[0], m[1], m[2]
    nu = np.broadcast_to(np.asarray(nu, dtype=float), lam.shape)
    Ai = 3 * (m2 + lam * (1 - 2 * lam))
    Bi = m3 - lam + 3 * lam**2 - 3 * (1 - 2 * lam) * (lam**2 - lam / 2 + m2 / 2)
    return float(np.sum(Ai / nu**2)), float(np.sum(Bi / nu**2)), Ai, Bi


def bound_thm23(arrivals, nu, epsilon: float, EX, EX2) -> BoundReport:
    """``eps sum E X_i^2/nu_i^2 <= A sum E X_i/nu_i^2 + B``, plus the per-node
    form ``3 eps sum E X_i^2/nu_i^2 <= sum A_i E X_i/nu_i^2 + sum B_i/nu_i^2``
    as ``secondary``."""
    moments = arrivals.moments if isinstance(arrivals, ArrivalSpec) else arrivals
    A, B, Ai, Bi = thm23_constants(moments, nu)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), Ai.shape)
    inv = 1.0 / nu**2
    theo = {"A": A, "B": B, "A_i": Ai.tolist(), "B_i": Bi.tolist()}
    main = _report("thm23", theo, _side(EX2, epsilon * inv), _side(EX, A * inv, B),
                   notes=["A multiplies sum E X_i/nu_i^2 as stated; per-node form in secondary"])
    sec = _report("thm23_per_node", theo, _side(EX2, 3 * epsilon * inv),
                  _side(EX, Ai * inv, float(np.sum(Bi * inv))))
    main.secondary = sec
    return main


def _degree(d: int, routing_degree) -> int:
    if routing_degree in (None, "2^d"):
        return 2 ** d
    if routing_degree == "lattice":
        return 2 * d
    return int(routing_degree)


def thm41_value(Exi2: float, lam: float, q: float, d: int, routing_degree="2^d") -> float:
    D = _degree(d, routing_degree)
    thr = 1.0 / (D + 1)
    if not lam < thr:
        raise ModelError(f"throughput {lam} must be below 1/(D+1) = {thr}")
    return (Exi2 + D * (1 - q) * lam + lam - 2 * lam**2 * q**2) / (2 * q * (thr - lam))


def thm55_value(lam: float, q: float, d: int, routing_degree="2^d") -> float:
    D = _degree(d, routing_degree)
    thr = 1.0 / (D + 1)
    if not lam < thr:
        raise ModelError(f"throughput {lam} must be below 1/(D+1) = {thr}")
    return lam / (q * (thr - lam))


def _against(name, value, theo, EX):
    rhs = Side(value)
    if EX is None:
        return BoundReport(name, theo, Side(float("nan"), 0.0, False), rhs, INCONCLUSIVE,
                           notes=["no estimate supplied"])
    v = np.asarray(EX, dtype=float)
    if v.ndim == 2:
        lhs = _side(v, np.full(v.shape[1], 1.0 / v.shape[1]))
    else:
        lhs = Side(float(v.mean()))
    return _report(name, theo, lhs, rhs)


def bound_thm41(Exi2: float, lam: float, q: float, d: int, routing_degree="2^d",
                EX=None) -> BoundReport:
    """Multi-hop slot model: node-average ``E X <= bound``; ``lam`` is the
    total throughput (exogenous mean ``lam q``)."""
    value = thm41_value(Exi2, lam, q, d, routing_degree)
    theo = {"bound": value, "lambda": lam, "q": q, "d": d,
            "degree": _degree(d, routing_degree)}
    return _against("thm41", value, theo, EX)


def bound_thm55(lam: float, q: float, d: int, EX=None, routing_degree="2^d") -> BoundReport:
    """Multi-hop continuous model: node-average ``E X <= lam / (q (1/(D+1) - lam))``."""
    value = thm55_value(lam, q, d, routing_degree)
    theo = {"bound": value, "lambda": lam, "q": q, "d": d,
            "degree": _degree(d, routing_degree)}
    return _against("thm55", value, theo, EX)


def inapplicable(name: str, reason: str) -> BoundReport:
    return BoundReport(name, {}, Side(float("nan"), 0.0, False), Side(float("nan"), 0.0, False),
                       "inapplicable", notes=[reason])
