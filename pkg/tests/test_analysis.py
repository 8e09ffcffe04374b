import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latqueue import analysis as A
from latqueue import model as M
from latqueue.analysis.bounds import HOLDS, INCONCLUSIVE, VIOLATED, Side
from latqueue.model import ModelError
from latqueue.rates import sir_rates

from conftest import pair, single_node, torus

Q = M.quadratic_inverse()


# -- drift -------------------------------------------------------------------


def test_drift_single_queue_examples():
    spec = M.LyapunovSpec([1.0], 0.5, Q)
    assert A.drift_exact([0], [0.3], [0.0], spec) == pytest.approx(0.3)
    assert A.drift_exact([5], [0.5], [1.0], spec) == pytest.approx(-12.5)


def test_drift_matches_bruteforce_small_states(ring3):
    spec = M.LyapunovSpec(np.full(3, 1 / 3), 1 / 12, Q)
    lam = np.full(3, 0.25)
    X = A.all_states(3, 4)
    psi = sir_rates(X, ring3)
    fast = A.drift_exact(X, lam, psi, spec)
    slow = [A.drift_bruteforce(x, lam, p, spec) for x, p in zip(X, psi)]
    assert np.max(np.abs(fast - slow)) <= 1e-12
    assert A.drift_exact([3, 3, 3], lam, sir_rates([3, 3, 3], ring3), spec) == pytest.approx(
        A.drift_bruteforce([3, 3, 3], lam, sir_rates([3, 3, 3], ring3), spec), abs=1e-12)


def test_drift_bruteforce_on_pair_with_other_utility():
    topo = pair()
    spec = M.LyapunovSpec([0.4, 0.45], 0.05, M.power(1.5))
    lam = np.array([0.3, 0.2])
    X = A.all_states(2, 4)
    psi = sir_rates(X, topo)
    fast = A.drift_exact(X, lam, psi, spec)
    slow = [A.drift_bruteforce(x, lam, p, spec) for x, p in zip(X, psi)]
    assert np.max(np.abs(fast - slow)) <= 1e-12


def test_drift_rejects_non_bernoulli():
    spec = M.LyapunovSpec([1.0], 0.5, Q)
    with pytest.raises(ModelError):
        A.drift_exact([1], M.from_pmf([0.5, 0.3, 0.2]), [1.0], spec)


def test_drift_bound_at_zero():
    spec = M.LyapunovSpec([1 / 3, 1 / 3], 0.1, Q)
    assert A.drift_bound([0, 0], spec) == pytest.approx(2 * 9 * 1.0)


def test_drift_bound_crossover_square_weight():
    eps = 0.1
    spec = M.LyapunovSpec([1.0], eps, Q)
    y = np.arange(0, 200)
    neg = y[A.drift_bound(y[:, None], spec) < 0]
    root = (1 + np.sqrt(1 + eps)) / eps  # largest root of -eps y^2 + 2y + 1
    assert neg.min() == int(np.floor(root)) + 1


def test_drift_chain_random_states(ring8, rng):
    spec = M.LyapunovSpec(np.full(8, 1 / 3), 1 / 30, Q)
    X = rng.integers(0, 50, size=(10_000, 8))
    chain = A.drift_chain(X, np.full(8, 0.3), sir_rates(X, ring8), spec)
    assert chain.holds()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 60), min_size=8, max_size=8).filter(any),
       st.lists(st.floats(0.05, 20.0), min_size=8, max_size=8))
def test_aggregated_fairness_inequality(xs, ps):
    # sum g h'(nu)(psi - nu) >= sum g (h(psi) - h(nu)) >= 0 for nu = psi(p)
    topo = torus(8)
    x = np.array(xs)
    nu = sir_rates(np.array(ps), topo)
    psi = sir_rates(x, topo)
    m = x > 0
    g = Q.g(x[m])
    first = np.sum(g * Q.h_prime(nu[m]) * (psi[m] - nu[m]))
    second = np.sum(g * (Q.h(psi[m]) - Q.h(nu[m])))
    scale = 1 + abs(first) + abs(second)
    assert first >= second - 1e-9 * scale
    assert second >= -1e-9 * scale


def test_scan_finds_negative_drift_region(ring3):
    spec = M.LyapunovSpec(np.full(3, 1 / 3), 1 / 12, Q)
    scan = A.scan_negative_drift(ring3, np.full(3, 0.25), spec, 60)
    assert scan.x0 is not None and scan.x0 <= 60
    assert scan.worst_beyond < 0
    X = A.all_states(3, 30)
    d = A.drift_exact(X, np.full(3, 0.25), sir_rates(X, ring3), spec)
    assert np.all(d[X.max(axis=1) >= scan.x0] < 0)


# -- exact solves ------------------------------------------------------------


def test_exact_two_state_chain():
    for lam in (0.1, 0.5, 0.8):
        sc = M.ScenarioConfig(single_node(), M.bernoulli(lam, 1))
        sol = A.exact_stationary(sc, cap=5)
        assert sol.marginals[0][:2] == pytest.approx([1 - lam, lam], abs=1e-12)
        assert sol.mean[0] == pytest.approx(lam, abs=1e-12)


def test_exact_mm1():
    sc = M.ScenarioConfig(single_node(), M.poisson(0.5, 1), scheduler="uniformized",
                          time_model="continuous")
    sol = A.exact_stationary(sc, cap=50)
    assert sol.mean[0] == pytest.approx(1.0, abs=1e-10)
    assert sol.marginals[0][:4] == pytest.approx(0.5 ** np.arange(1, 5), abs=1e-12)


def test_exact_zero_arrivals():
    sc = M.ScenarioConfig(pair(), M.bernoulli(0.0, 2))
    sol = A.exact_stationary(sc, cap=5)
    assert sol.pi[0] == pytest.approx(1.0)


def test_exact_balance_and_flow():
    sc = M.ScenarioConfig(pair(), M.bernoulli([0.3, 0.2], 2))
    sol = A.exact_stationary(sc, cap=40)
    assert sol.residual < 1e-10
    assert sol.tail_mass < 1e-8
    assert np.all(np.abs(sol.psi_mean - [0.3, 0.2]) < 1e-8)


def test_exact_flow_with_general_pmf():
    sc = M.ScenarioConfig(pair(), M.from_pmf([0.8, 0.1, 0.1], 2))
    sol = A.exact_stationary(sc, cap=60)
    assert np.all(np.abs(sol.psi_mean - 0.3) < 1e-8)


def test_exact_auto_cap_doubles():
    sc = M.ScenarioConfig(pair(), M.bernoulli(0.4, 2))
    sol = A.exact_stationary(sc, cap=5, auto_cap=True)
    assert sol.cap > 5 and sol.tail_mass < 1e-8


def test_exact_state_limit():
    sc = M.ScenarioConfig(torus(8), M.bernoulli(0.1, 8))
    with pytest.raises(ModelError):
        A.exact_stationary(sc, cap=10)


def test_exact_requires_d2():
    sc = M.ScenarioConfig(pair(), M.bernoulli(0.1, 2), scheduler="D1")
    with pytest.raises(ModelError):
        A.exact_stationary(sc, cap=5)


def test_exact_multihop_continuous_flow():
    sc = M.ScenarioConfig(torus(3), M.poisson(0.1, 3), scheduler="uniformized",
                          time_model="continuous", routing=M.Routing(0.5))
    sol = A.exact_stationary(sc, cap=25)
    # total throughput lam/q per node in stationarity
    assert np.all(np.abs(sol.psi_mean - 0.2) < 1e-8)
    assert sol.mean.mean() <= A.thm55_value(0.2, 0.5, 1)


def test_exact_discrete_matches_transient_iteration():
    sc = M.ScenarioConfig(pair(), M.bernoulli(0.25, 2))
    P, _ = A.chain_matrix(sc, 15)
    pi = A.exact_stationary(sc, 15).pi
    v = np.zeros(P.shape[0])
    v[0] = 1.0
    for _ in range(3000):
        v = P.T @ v
    assert np.max(np.abs(v - pi)) < 1e-10


# -- estimators --------------------------------------------------------------


def test_constant_series():
    est = A.series_ci(np.full(1000, 2.5))
    assert est.value == 2.5 and est.half_width == 0.0 and est.ok


def test_too_few_batches_flagged():
    est = A.batch_ci([1.0, 2.0, 3.0])
    assert not est.ok
    rep = A.bound_thm41(0.125, 0.25, 0.5, 1, EX=np.ones((3, 4)))
    assert rep.verdict == INCONCLUSIVE


def test_ci_calibration():
    hits = 0
    for seed in range(100):
        z = np.random.default_rng(seed).standard_normal(10_000)
        hits += A.series_ci(z).covers(0.0)
    assert hits >= 90


def test_estimate_moments_pools_replications():
    sc = M.ScenarioConfig(single_node(), M.bernoulli(0.5, 1), horizon=40_000, replications=2)
    from latqueue.sim_discrete import run_replications
    runs = run_replications(sc)
    est = A.estimate_moments(runs, ("x",))["x"]
    assert est.batches == 40 and est.covers(0.5)
    per = A.estimate_moments(runs[0], ("x",), per_node=True)["x"]
    assert len(per) == 1


# -- bounds ------------------------------------------------------------------


def test_verdict_rules():
    assert A.verdict(Side(1.0), Side(2.0)) == HOLDS
    assert A.verdict(Side(2.5, 0.2), Side(2.0, 0.2)) == VIOLATED
    assert A.verdict(Side(2.1, 0.2), Side(2.0, 0.2)) == INCONCLUSIVE
    assert A.verdict(Side(1.0, 0.1, ok=False), Side(2.0)) == INCONCLUSIVE


def test_thm22_examples():
    spec = M.LyapunovSpec([1.0], 0.5, Q)
    rep = A.bound_thm22([0.0], [1.0], spec)
    assert rep.lhs.value == 0 and rep.holds
    sc = M.ScenarioConfig(single_node(), M.bernoulli(0.5, 1))
    sol = A.exact_stationary(sc, cap=10)
    rep = A.bound_thm22(sol.expect(Q.g), sol.expect(Q.delta), spec)
    assert rep.lhs.value == pytest.approx(0.5) and rep.rhs.value == pytest.approx(4.0)
    assert rep.verdict == HOLDS and rep.ci == 0


def test_thm23_constants_bernoulli_substitution():
    lam = np.array([0.0, 0.1, 0.3, 0.5])
    arr = M.bernoulli(lam)
    A_, B_, Ai, Bi = A.thm23_constants(arr.moments, np.ones(4))
    ai, bi = A.bernoulli_constants(lam)
    assert np.allclose(Ai, ai, atol=1e-15) and np.allclose(Bi, bi, atol=1e-15)
    pmf = np.stack([1 - lam, lam], axis=1)
    k = np.arange(2)
    m = np.stack([pmf @ k**p for p in (1, 2, 3)])
    assert np.allclose(A.thm23_constants(m, np.ones(4))[2], ai)


def test_thm23_zero_rates():
    rep = A.bound_thm23(M.bernoulli(0.0, 3), np.full(3, 1 / 3), 0.1, np.zeros(3), np.zeros(3))
    assert rep.theoretical["A"] == 0 and rep.theoretical["B"] == 0
    assert rep.lhs.value == 0 and rep.rhs.value == 0 and rep.holds


def test_thm23_missing_third_moment():
    with pytest.raises(ModelError):
        A.thm23_constants(np.array([[0.1], [0.1]]), [1.0])


def test_thm23_per_node_line_sharper_on_exact_pair():
    sc = M.ScenarioConfig(pair(), M.bernoulli(0.3, 2))
    sol = A.exact_stationary(sc, 40)
    rep = A.bound_thm23(sc.arrivals, np.full(2, 1 / 3), 1 / 30, sol.mean, sol.second)
    assert rep.holds and rep.secondary.holds
    assert rep.secondary.rhs.value / rep.secondary.lhs.value < rep.rhs.value / rep.lhs.value


def test_thm41_values():
    assert A.thm41_value(0.125, 0.25, 0.5, 1) == pytest.approx(7.125)
    lam = 0.2
    assert A.thm41_value(lam, lam, 1.0, 1) == pytest.approx(lam * (2 - 2 * lam) / (2 * (1 / 3 - lam)))
    assert A.thm41_value(0.125, 1 / 3 - 1e-9, 0.5, 1) > 1e6
    with pytest.raises(ModelError):
        A.thm41_value(0.125, 1 / 3, 0.5, 1)


def test_thm55_values():
    assert A.thm55_value(0.25, 0.5, 1) == pytest.approx(6.0)
    assert A.thm55_value(0.25, 1.0, 1) == pytest.approx(3.0)
    assert A.thm55_value(1e-12, 0.5, 1) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ModelError):
        A.thm55_value(0.4, 0.5, 1)


def test_routing_degree_changes_threshold_only_for_d3():
    assert A.thm55_value(0.05, 0.5, 2, "lattice") == A.thm55_value(0.05, 0.5, 2, "2^d")
    assert A.thm55_value(0.05, 0.5, 3, "lattice") != A.thm55_value(0.05, 0.5, 3, "2^d")


# -- sweep and trend ---------------------------------------------------------


def test_window_verdicts():
    assert A.window_verdict([0, 0], [0, 0]) == "stabilizing"
    assert A.window_verdict([2.0, 2.1], [2.05, 2.0]) == "stabilizing"
    assert A.window_verdict([10.0, 11.0], [14.0, 15.0]) == "growing"
    assert A.window_verdict([10.0, 11.0], [12.0, 15.0]) == "inconclusive"


def test_sweep_zero_rate():
    sc = M.ScenarioConfig(torus(4), M.bernoulli(0.1, 4), horizon=2000)
    (pt,) = A.stability_sweep(sc, [0.0])
    assert pt.verdict == "stabilizing"


def test_moment_trend():
    flat = A.moment_trend([8, 16, 32, 64], [7.4, 7.39, 7.37, 7.38], [0.15] * 4)
    assert not flat.increasing
    up = A.moment_trend([8, 16, 32, 64], [1.0, 2.0, 4.0, 8.0], [0.1] * 4)
    assert up.increasing and up.slope > 0
