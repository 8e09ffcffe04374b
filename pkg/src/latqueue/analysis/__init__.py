from .bounds import (
    BoundReport,
    Side,
    bernoulli_constants,
    bound_thm22,
    bound_thm23,
    bound_thm41,
    bound_thm55,
    inapplicable,
    thm23_constants,
    thm41_value,
    thm55_value,
    verdict,
)
from .drift import (
    DriftChain,
    DriftScan,
    all_states,
    drift_bound,
    drift_bruteforce,
    drift_chain,
    drift_exact,
    scan_negative_drift,
)
from .estimate import MomentEstimate, batch_ci, batch_matrix, estimate_moments, series_ci
from .exact import ExactSolution, SolveError, chain_matrix, exact_stationary
from .sweep import SweepPoint, TrendReport, moment_trend, stability_sweep, window_verdict

__all__ = [
    "BoundReport", "Side", "bernoulli_constants", "bound_thm22", "bound_thm23",
    "bound_thm41", "bound_thm55", "inapplicable", "thm23_constants", "thm41_value",
    "thm55_value", "verdict", "DriftChain", "DriftScan", "all_states", "drift_bound",
    "drift_bruteforce", "drift_chain", "drift_exact", "scan_negative_drift",
    "MomentEstimate", "batch_ci", "batch_matrix", "estimate_moments", "series_ci",
    "ExactSolution", "SolveError", "chain_matrix", "exact_stationary", "SweepPoint", "TrendReport",
    "moment_trend", "stability_sweep", "window_verdict",
]
