"""Batch-means estimators with Student-t confidence intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..trajectory import RunStats

MIN_BATCHES = 20
LEVEL = 0.95


@dataclass
class MomentEstimate:
    value: float
    half_width: float
    batches: int
    burn: float = 0.0
    ok: bool = True  # False: too few batches, the interval is not trustworthy

    @property
    def lo(self) -> float:
        return self.value - self.half_width

    @property
    def hi(self) -> float:
        return self.value + self.half_width

    def covers(self, target: float) -> bool:
        return self.lo <= target <= self.hi

    def as_dict(self) -> dict:
        return {"value": self.value, "ci": self.half_width, "batches": self.batches,
                "burn": self.burn, "ok": self.ok}


def batch_ci(batch_means, burn: float = 0.0, level: float = LEVEL) -> MomentEstimate:
    """Mean of batch means with a t-interval; flagged when fewer than 20 batches."""
    b = np.asarray(batch_means, dtype=float).ravel()
    B = b.size
    if B == 0:
        return MomentEstimate(float("nan"), float("inf"), 0, burn, False)
    mean = float(b.mean())
    if B < 2:
        return MomentEstimate(mean, float("inf"), B, burn, False)
    sd = float(b.std(ddof=1))
    hw = float(stats.t.ppf(0.5 + level / 2, B - 1) * sd / np.sqrt(B))
    return MomentEstimate(mean, hw, B, burn, B >= MIN_BATCHES)


def series_ci(series, batches: int = MIN_BATCHES, level: float = LEVEL) -> MomentEstimate:
    """Batch-means interval for a raw 1-d series split into equal batches."""
    x = np.asarray(series, dtype=float)
    size = x.size // batches
    if size < 1:
        return MomentEstimate(float("nan"), float("inf"), 0, 0.0, False)
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return batch_ci(means, level=level)


def _batches(runs, functional) -> np.ndarray:
    if isinstance(functional, str):
        return np.concatenate([r.batch_means(functional) for r in runs], axis=0)
    return np.concatenate([r.functional_batches(functional) for r in runs], axis=0)


def estimate_moments(runs, functionals=("x", "x2", "eta"), per_node: bool = False):
    """Estimates for each functional from one or more replications.

    ``functionals`` holds names (``"x"``, ``"x2"``, ``"eta"``) or a mapping
    ``name -> f`` with ``f`` applied to queue lengths through the occupancy
    histogram.  Batches of all replications are pooled.  With ``per_node``
    each entry is a list over nodes; otherwise the node average is estimated.
    """
    if isinstance(runs, RunStats):
        runs = [runs]
    if not isinstance(functionals, dict):
        functionals = {f: f for f in functionals}
    burn = runs[0].burn
    out = {}
    for name, f in functionals.items():
        b = _batches(runs, f)
        if per_node:
            out[name] = [batch_ci(b[:, i], burn) for i in range(b.shape[1])]
        else:
            out[name] = batch_ci(b.mean(axis=1), burn)
    return out


def batch_matrix(runs, functional) -> np.ndarray:
    """Per-batch, per-node means of one functional, pooled over replications."""
    if isinstance(runs, RunStats):
        runs = [runs]
    return _batches(runs, functional)
