import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localize.generators import gen_curie_weiss, random_ising, random_potts
from localize.meanfield import (InfeasibleMarginals, ascend, as_site_distributions, deficit,
                                mf_objective, mf_optimize)
from localize.models import SpinModel, exact_log_z, potts2_as_ising
from oracles import brute_product_objective
from conftest import philox


def test_objective_matches_enumeration(rng):
    model = random_ising(4, rng)
    m = rng.uniform(-1, 1, 4)
    q = as_site_distributions(model, m)
    assert mf_objective(model, m) == pytest.approx(
        brute_product_objective(model.J, model.h, [[1.0], [-1.0]], q.tolist()), abs=1e-12)


def test_objective_matches_enumeration_potts(rng):
    model = random_potts(3, 3, rng)
    q = rng.dirichlet(np.ones(3), size=3)
    assert mf_objective(model, q) == pytest.approx(
        brute_product_objective(model.J, model.h, np.eye(3).tolist(), q.tolist()), abs=1e-12)


def test_independent_spins_are_exact():
    model = SpinModel.ising(np.zeros((3, 3)), [0.2, -0.4, 1.0])
    sol = mf_optimize(model)
    np.testing.assert_allclose(sol.marginals, np.tanh([0.2, -0.4, 1.0]), atol=1e-8)
    assert deficit(model, sol) == pytest.approx(0.0, abs=1e-10)


def test_infeasible_marginals():
    model = SpinModel.ising(np.zeros((2, 2)))
    with pytest.raises(InfeasibleMarginals):
        mf_objective(model, [1.5, 0.0])
    with pytest.raises(InfeasibleMarginals):
        mf_objective(SpinModel.potts(np.zeros((2, 2)), 3), [[0.5, 0.5, 0.5], [1, 0, 0]])


def test_ascent_monotone(rng):
    model = random_potts(5, 3, rng, coupling=0.8)
    q0 = rng.dirichlet(np.ones(3), size=5)
    _, it, conv, deltas = ascend(model, q0, record=200)
    recorded = deltas[np.isfinite(deltas)]
    assert len(recorded) > 0
    assert recorded.min() >= -1e-12


def test_deterministic_and_backend_agree(rng):
    model = random_ising(7, rng, coupling=0.5)
    a = mf_optimize(model, seed=3, backend="numba")
    b = mf_optimize(model, seed=3, backend="numba")
    c = mf_optimize(model, seed=3, backend="numpy")
    np.testing.assert_array_equal(a.marginals, b.marginals)
    np.testing.assert_allclose(a.marginals, c.marginals, atol=1e-9)
    assert a.value == pytest.approx(c.value, abs=1e-12)


def test_curie_weiss_symmetric_optimum():
    # beta < 1/2 in f = beta/n (sum s)^2 normalization: paramagnetic, m = 0
    model = gen_curie_weiss(8, 0.3)
    sol = mf_optimize(model)
    np.testing.assert_allclose(sol.marginals, 0.0, atol=1e-6)


def test_potts2_mean_field_consistent(rng):
    potts = random_potts(5, 2, rng)
    ising, const = potts2_as_ising(potts)
    a = mf_optimize(potts)
    b = mf_optimize(ising)
    # the product families coincide under the relabeling, so values differ by const
    assert a.value == pytest.approx(b.value + const, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_gibbs_inequality(seed, n):
    rng = philox(seed)
    model = random_ising(n, rng, coupling=2.0 / n)
    m = rng.uniform(-1, 1, n)
    assert mf_objective(model, m) <= exact_log_z(model) + 1e-9


@pytest.mark.parametrize("h", [-1.3, 0.0, 0.7])
def test_single_site_log_z(h):
    model = SpinModel.ising([[0.0]], [h])
    assert exact_log_z(model) == pytest.approx(np.log(2 * np.cosh(h)), abs=1e-14)
    assert mf_optimize(model).value == pytest.approx(np.log(2 * np.cosh(h)), abs=1e-12)


def _cw_fixed_point(beta, n):
    # positive root of m = tanh(2 beta m (n-1)/n) by bisection
    g = lambda m: np.tanh(2 * beta * m * (n - 1) / n) - m
    lo, hi = 1e-6, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


def test_curie_weiss_symmetric_pair_tie_break():
    n, beta = 10, 1.5
    model = gen_curie_weiss(n, beta)
    m_star = _cw_fixed_point(beta, n)
    sol = mf_optimize(model, seed=0)
    # the +m* and -m* optima tie; the lexicographically smaller one wins
    np.testing.assert_allclose(sol.marginals, -m_star, atol=1e-7)
    plus = mf_objective(model, np.full(n, m_star))
    assert sol.value == pytest.approx(plus, abs=1e-9)


def test_spin_flip_symmetry(rng):
    model = SpinModel.ising(random_ising(6, rng, coupling=0.6).J)
    inits = [rng.uniform(-1, 1, 6) for _ in range(4)]
    a = mf_optimize(model, inits=inits)
    b = mf_optimize(model, inits=[-m for m in inits])
    assert a.value == pytest.approx(b.value, abs=1e-10)
