"""Heuristic stability verdicts and the across-size moment trend test.

Neither is a proof: the two-window test only labels what a finite run looks
like, and the trend test asks whether a fitted slope is detectably positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..model import ScenarioConfig, bernoulli, poisson
from ..sim_discrete import simulate

STABLE_CHANGE = 0.10
# A queue growing linearly from empty has window means in ratio 7/5, so the
# growth threshold has to sit below 1.4 to be reachable at all.
GROWTH_RATIO = 1.25

STABILIZING, GROWING, INCONCLUSIVE = "stabilizing", "growing", "inconclusive"


@dataclass
class SweepPoint:
    lam: float
    verdict: str
    first: list  # per replication, mean queue over [T/2, 3T/4]
    second: list  # per replication, mean queue over [3T/4, T]

    @property
    def ratios(self) -> list:
        return [b / a if a > 0 else (1.0 if b == 0 else float("inf"))
                for a, b in zip(self.first, self.second)]

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "verdict": self.verdict, "first": self.first,
                "second": self.second, "ratios": self.ratios}


def window_verdict(first, second, change: float = STABLE_CHANGE,
                   growth: float = GROWTH_RATIO) -> str:
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    rel = np.where(first > 0, np.abs(second - first) / np.where(first > 0, first, 1.0),
                   np.where(second > 0, np.inf, 0.0))
    if np.all(rel < change):
        return STABILIZING
    if np.all(second >= growth * first) and np.all(second > 0):
        return GROWING
    return INCONCLUSIVE


def _at(template: ScenarioConfig, lam: float) -> ScenarioConfig:
    n = template.n
    arr = bernoulli(lam, n) if template.time_model == "discrete" else poisson(lam, n)
    return template.replace(arrivals=arr, burn_in=0.5, batches=2, hist_cap=2)


def stability_sweep(template: ScenarioConfig, lambdas, change: float = STABLE_CHANGE,
                    growth: float = GROWTH_RATIO, jobs: int = 1, backend=None) -> list[SweepPoint]:
    """Two-window verdict for each symmetric arrival rate in ``lambdas``."""
    out = []
    for lam in lambdas:
        runs = simulate(_at(template, float(lam)), jobs=jobs, backend=backend)
        w = np.array([r.batch_means("x").mean(axis=1) for r in runs])  # (reps, 2)
        out.append(SweepPoint(float(lam), window_verdict(w[:, 0], w[:, 1], change, growth),
                              w[:, 0].tolist(), w[:, 1].tolist()))
    return out


@dataclass
class TrendReport:
    sizes: list
    values: list
    half_widths: list
    slope: float
    slope_se: float
    upper: float  # one-sided 95% upper confidence limit of the slope

    @property
    def increasing(self) -> bool:
        """True only if the slope is detectably positive."""
        return self.slope - stats.norm.ppf(0.975) * self.slope_se > 0

    def as_dict(self) -> dict:
        return {"sizes": self.sizes, "values": self.values, "ci": self.half_widths,
                "slope": self.slope, "slope_se": self.slope_se,
                "increasing": self.increasing}


def moment_trend(sizes, values, half_widths, level: float = 0.95) -> TrendReport:
    """Weighted least-squares slope of estimates against system size.

    Each point's standard error is recovered from its 95% half-width.
    """
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    se = np.asarray(half_widths, dtype=float) / stats.norm.ppf(0.975)
    w = 1.0 / np.maximum(se, 1e-12) ** 2
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    slope_se = float(np.sqrt(1.0 / sxx))
    upper = slope + stats.norm.ppf(level) * slope_se
    return TrendReport(x.astype(int).tolist(), y.tolist(), np.asarray(half_widths).tolist(),
                       slope, slope_se, float(upper))
