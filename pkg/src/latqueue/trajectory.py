"""Per-replication trajectory statistics shared by both simulators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RunStats:
    """Batch-level accumulators collected after burn-in.

    For discrete time ``batch_len`` is a slot count and the sums are integer
    counts over slots; for continuous time it is a duration and the sums are
    time integrals.  ``departures`` counts services (eta) per batch and node.
    """

    time_model: str
    seed: int
    batch_len: float
    burn: float
    horizon: float
    sum_x: np.ndarray
    sum_x2: np.ndarray
    departures: np.ndarray
    hist: np.ndarray
    overflow: np.ndarray
    final: np.ndarray
    trace: np.ndarray | None = None
    trace_stride: float = 0
    conflicts: int = 0
    self_loops: int = 0
    events: int = 0
    steps: int = 0
    max_rate_ratio: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def batches(self) -> int:
        return self.sum_x.shape[0]

    @property
    def n(self) -> int:
        return self.sum_x.shape[1]

    def batch_means(self, name: str) -> np.ndarray:
        """Per-batch, per-node time averages of ``x``, ``x2`` or ``eta``."""
        arr = {"x": self.sum_x, "x2": self.sum_x2, "eta": self.departures}[name]
        return np.asarray(arr, dtype=float) / self.batch_len

    def functional_batches(self, f) -> np.ndarray:
        """Per-batch, per-node time averages of ``f(X_i)`` from the occupancy
        histogram.  Raises if any mass fell beyond the histogram cap."""
        if np.any(self.overflow > 0):
            raise OverflowError("queue lengths exceeded the histogram cap; "
                                "raise hist_cap to evaluate general functionals")
        vals = np.asarray(f(np.arange(self.hist.shape[2], dtype=float)), dtype=float)
        return (self.hist @ vals) / self.batch_len

    def summary(self) -> dict:
        """Deterministic statistics block (no timing information)."""
        return {
            "time_model": self.time_model,
            "seed": self.seed,
            "batches": self.batches,
            "batch_len": self.batch_len,
            "burn": self.burn,
            "horizon": self.horizon,
            "mean_x": self.batch_means("x").mean(axis=0).tolist(),
            "mean_x2": self.batch_means("x2").mean(axis=0).tolist(),
            "departure_rate": self.batch_means("eta").mean(axis=0).tolist(),
            "final_state": [int(v) for v in self.final],
            "exclusion_conflicts": int(self.conflicts),
            "self_loops": int(self.self_loops),
            "events": int(self.events),
            "steps": int(self.steps),
            "max_rate_ratio": float(self.max_rate_ratio),
            "histogram_overflow": float(np.sum(self.overflow)),
        }


def stack_batches(runs: list[RunStats], name: str) -> np.ndarray:
    """Concatenate per-batch means of all replications: shape (sum B, n)."""
    return np.concatenate([r.batch_means(name) for r in runs], axis=0)


def stack_functional(runs: list[RunStats], f) -> np.ndarray:
    return np.concatenate([r.functional_batches(f) for r in runs], axis=0)
