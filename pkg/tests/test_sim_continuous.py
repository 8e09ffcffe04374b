import numpy as np
import pytest
from scipy import sparse

from latqueue import model as M
from latqueue.analysis import chain_matrix, estimate_moments, exact_stationary
from latqueue.model import ModelError
from latqueue.rng import Streams
from latqueue.sim_continuous import plan_ct, run_ct, uniformization_rate, uniformized_step

from conftest import pair, single_node, torus


def ct(topo, lam, **kw):
    n = topo.n
    return M.ScenarioConfig(topo, M.poisson(lam, n), scheduler="uniformized",
                            time_model="continuous", **kw)


def test_uniformization_constant():
    assert uniformization_rate(ct(torus(4), 0.2)) == pytest.approx(0.8 + 4)
    sc = ct(torus(4), 0.2, rates=M.RateFamily("shannon"))
    assert uniformization_rate(sc) == pytest.approx(0.8 + 4 * np.log(2))


def test_idle_system_only_self_loops():
    sc = ct(torus(3), 0.0)
    streams = Streams.from_seed(0)
    x, t = np.zeros(3, dtype=int), 0.0
    for _ in range(200):
        x, ev = uniformized_step(x, sc, streams, t)
        assert ev.kind == "self-loop" and ev.time > t
        t = ev.time
    assert x.tolist() == [0, 0, 0]


def test_event_frequencies():
    sc = ct(single_node(), 0.5)
    Lam = uniformization_rate(sc)
    streams = Streams.from_seed(1)
    kinds = [uniformized_step([0], sc, streams)[1].kind for _ in range(4000)]
    p_arr = kinds.count("arrival") / len(kinds)
    assert abs(p_arr - 0.5 / Lam) < 4 * np.sqrt(0.5 / Lam * (1 - 0.5 / Lam) / 4000)
    assert "departure" not in kinds  # empty queue never departs


def test_departure_with_routing_records_destination():
    sc = ct(torus(4), 0.1, routing=M.Routing(0.01))
    streams = Streams.from_seed(2)
    seen = []
    for _ in range(500):
        _, ev = uniformized_step([3, 3, 3, 3], sc, streams)
        if ev.kind == "departure":
            seen.append(ev)
    assert seen and any(ev.destination is not None for ev in seen)
    for ev in seen:
        if ev.destination is not None:
            assert (ev.destination - ev.node) % 4 in (1, 3)


def test_requires_continuous_scenario():
    sc = M.ScenarioConfig(torus(3), M.bernoulli(0.1, 3))
    with pytest.raises(ModelError):
        run_ct(sc)


def test_zero_arrivals_zero_averages():
    r = run_ct(ct(torus(4), 0.0, horizon=500))
    assert np.all(r.sum_x == 0) and np.all(r.departures == 0)


def test_mm1_empty_probability():
    sc = ct(single_node(), 0.5, horizon=100_000, seed=6)
    est = estimate_moments(run_ct(sc), {"p0": lambda y: (y == 0).astype(float)})["p0"]
    assert est.covers(0.5)


def test_rate_bound_never_exceeded():
    sc = ct(torus(6), 0.25, horizon=5000, rates=M.RateFamily("sinr", 0.5))
    r = run_ct(sc)
    assert 0 < r.max_rate_ratio <= 1.0 + 1e-12


def test_flow_balance_single_hop_ring():
    sc = ct(torus(16), 0.25, horizon=50_000, seed=3)
    est = estimate_moments(run_ct(sc), ("eta",))["eta"]
    assert est.covers(0.25)


def test_embedded_chain_matches_generator():
    sc = ct(pair(), 0.3)
    Q, _ = chain_matrix(sc, 12)
    Lam = uniformization_rate(sc)
    P = sparse.identity(Q.shape[0]) + Q / Lam
    # stationary vector of P by power iteration from the generator solution
    pi = exact_stationary(sc, 12).pi
    assert np.max(np.abs(P.T @ pi - pi)) < 1e-12
    v = np.full(Q.shape[0], 1.0 / Q.shape[0])
    for _ in range(20_000):
        v = P.T @ v
    assert np.max(np.abs(v - pi)) < 1e-9


def test_two_node_simulation_matches_exact():
    sc = ct(pair(), 0.3, horizon=200_000, seed=12)
    exact = exact_stationary(sc, 30)
    est = estimate_moments(run_ct(sc), ("x",), per_node=True)["x"]
    for i in range(2):
        assert abs(est[i].value - exact.mean[i]) <= 3 * est[i].half_width


def test_plan_ct():
    sc = ct(torus(3), 0.1, horizon=100.0, burn_in=0.2, batches=20)
    assert plan_ct(sc) == pytest.approx((20.0, 4.0))


def test_trace_sampling():
    sc = ct(torus(3), 0.2, horizon=100.0, trace_stride=1.0)
    r = run_ct(sc)
    assert r.trace.shape == (100, 3) and np.all(r.trace >= 0)
