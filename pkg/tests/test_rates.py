import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latqueue import model as M
from latqueue import rates as R
from latqueue.model import InterferenceKernel, ModelError

from conftest import torus


def test_sir_examples(ring3):
    assert R.sir_rates([1, 1, 1], ring3) == pytest.approx([1 / 3] * 3)
    assert R.sir_rates([0, 0, 0], ring3).tolist() == [0, 0, 0]
    assert R.sir_rates([2, 1, 1], ring3) == pytest.approx([0.5, 0.25, 0.25])


def test_shannon_examples(ring3):
    assert R.shannon_rates([1, 1, 1], ring3) == pytest.approx([math.log(4 / 3)] * 3)
    assert R.shannon_rates([0, 0, 0], ring3).tolist() == [0, 0, 0]
    assert R.shannon_rates([2, 1, 1], ring3)[0] == pytest.approx(math.log(1.5))


def test_sinr_examples(ring3, rng):
    x = rng.integers(0, 9, size=(50, 3))
    assert np.allclose(R.sinr_rates(x, ring3, 0.0), R.shannon_rates(x, ring3))
    assert R.sinr_rates([1, 0, 0], ring3, 1.0)[0] == pytest.approx(math.log(1.5))
    assert R.sinr_rates([0, 0, 0], ring3, 5.0).tolist() == [0, 0, 0]
    with pytest.raises(ModelError):
        R.sinr_rates([1, 0, 0], ring3, -1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=8, max_size=8))
def test_rate_ranges_and_zero_pattern(xs):
    topo = torus(8)
    x = np.array(xs)
    for fam in (M.RateFamily("sir"), M.RateFamily("shannon"), M.RateFamily("sinr", 2.0)):
        psi = R.rates_for(fam, x, topo)
        assert np.all(psi >= 0) and np.all(psi <= fam.psi_max + 1e-15)
        assert np.all((psi == 0) == (x == 0))
    assert np.array_equal(R.shannon_rates(x, topo), np.log1p(R.sir_rates(x, topo)))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=7, max_size=7).filter(any))
def test_sir_cost_identity(xs):
    # sum x_i^2 / psi_i equals the quadratic form sum_i sum_j a_{j-i} x_i x_j
    topo = M.build_topology("torus", 7, InterferenceKernel.from_1d([0.3, 1, 1, 1, 0.3]))
    x = np.array(xs, dtype=float)
    psi = R.sir_rates(x, topo)
    m = x > 0
    lhs = np.sum(x[m] ** 2 / psi[m])
    rhs = x @ topo.weight_matrix() @ x
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_fairness_examples(ring3, rng):
    x = np.array([1, 1, 1])
    assert R.optimal_cost(x, ring3) == pytest.approx(9.0)
    assert R.weighted_cost(x, np.ones(3), ring3) == pytest.approx(9.0)
    x = np.array([2, 1, 1])
    assert R.weighted_cost(x, x.astype(float), ring3) == pytest.approx(R.optimal_cost(x, ring3),
                                                                        rel=1e-9)
    rep = R.verify_fairness(x, ring3, 1000, rng)
    assert rep.violations == 0 and rep.equality_gap <= 1e-9 and rep.ok


def test_fairness_rejects_empty_state(ring3, rng):
    with pytest.raises(ModelError):
        R.verify_fairness([0, 0, 0], ring3, 10, rng)
    with pytest.raises(ModelError):
        R.verify_shannon_fairness([0, 0, 0], ring3, 10, rng)


def test_fairness_detects_a_wrong_rate_rule(ring3, rng):
    # equal sharing is not 2-fair: a witness matching x beats it
    x = np.array([5, 1, 1])
    equal = np.sum(x**2 / np.full(3, 1 / 3))
    assert R.weighted_cost(x, x.astype(float), ring3) < equal


def test_shannon_fairness(ring3, rng):
    x = np.array([1, 1, 1])
    best = R.shannon_utility(x, R.shannon_rates(x, ring3))
    assert R.shannon_utility(x, R.shannon_rates(np.ones(3), ring3)) == pytest.approx(best)
    rep = R.verify_shannon_fairness(np.array([3, 0, 1]), ring3, 1000, rng)
    assert rep.ok


def test_shannon_companion_is_concave():
    u = M.shannon_companion()
    y = np.linspace(1e-3, 3, 3001)
    v = u.h(y)
    assert np.all(np.diff(v) > 0) and np.all(np.diff(v, 2) <= 1e-12)


def test_symmetric_threshold():
    assert R.symmetric_threshold(InterferenceKernel.nearest_neighbour(1)) == pytest.approx(1 / 3)
    assert R.symmetric_threshold(InterferenceKernel.isolated(1)) == 1.0
    # for d <= 2 the lattice degree 2d coincides with 2^d
    assert R.symmetric_threshold(InterferenceKernel.nearest_neighbour(2)) == pytest.approx(1 / 5)


def test_spectral_radius_against_eigvals(rng):
    for _ in range(20):
        A = rng.random((5, 5)) + 0.01
        rho, p, _ = R.spectral_radius(A)
        assert rho == pytest.approx(max(abs(np.linalg.eigvals(A))), rel=1e-8)
        assert np.allclose(A @ p, rho * p, rtol=1e-7)


def test_feasibility_constant_rate_circulant():
    k = InterferenceKernel.nearest_neighbour(1)
    cert = R.periodic_feasibility([0.3], k, cell=[1])
    assert cert.feasible and cert.rho == pytest.approx(0.9)
    cert = R.periodic_feasibility(np.full(4, 0.3), k, cell=[4])
    assert cert.rho == pytest.approx(0.9) and cert.feasible
    assert not R.periodic_feasibility([1 / 3], k, cell=[1]).feasible


def test_feasibility_threshold_consistency():
    k = InterferenceKernel.nearest_neighbour(1)
    thr = R.symmetric_threshold(k)
    for lam in np.linspace(0.2, 0.45, 26):
        assert R.periodic_feasibility([lam], k, cell=[1]).feasible == (lam < thr - 1e-12)


def test_feasibility_period_two():
    k = InterferenceKernel.nearest_neighbour(1)
    lam = np.array([0.9, 0.01])
    cert = R.periodic_feasibility(lam, k, cell=[2])
    # 2x2 oracle: M = [[l1, 2 l1], [2 l2, l2]]
    Mx = np.array([[lam[0], 2 * lam[0]], [2 * lam[1], lam[1]]])
    tr, det = np.trace(Mx), np.linalg.det(Mx)
    rho = (tr + math.sqrt(tr * tr - 4 * det)) / 2
    assert cert.rho == pytest.approx(rho, rel=1e-9)
    assert cert.feasible
    p1, p2 = cert.witness
    assert lam[0] < p1 / (p1 + 2 * p2) and lam[1] < p2 / (p2 + 2 * p1)
    assert np.all(cert.nu > lam) and cert.margin > 0
    assert not R.periodic_feasibility([0.9, 0.1], k, cell=[2]).feasible


def test_feasibility_zero_rate_cell():
    k = InterferenceKernel.nearest_neighbour(1)
    assert R.periodic_feasibility([0.95, 0.0], k, cell=[2]).feasible


def test_feasibility_2d_cell():
    k = InterferenceKernel.nearest_neighbour(2)
    cert = R.periodic_feasibility(np.full((2, 2), 0.15), k)
    assert cert.rho == pytest.approx(0.75) and cert.feasible
