import numpy as np
import pytest

from localize.measure import (AtomicMeasure, MeasureError, batch_moments, covariance, entropy,
                              gibbs_measure, mean, point_mass, tilt, tilted_weights)
from localize.models import SpinModel


def test_point_mass_is_degenerate():
    mu = point_mass([1.0, -1.0, 1.0])
    assert entropy(mu) == 0.0
    np.testing.assert_array_equal(mean(mu), [1.0, -1.0, 1.0])
    np.testing.assert_array_equal(covariance(mu), np.zeros((3, 3)))


def test_uniform_two_atoms():
    mu = AtomicMeasure([[1.0], [-1.0]], [0.5, 0.5])
    assert entropy(mu) == pytest.approx(np.log(2))
    assert mean(mu)[0] == 0.0
    assert covariance(mu)[0, 0] == pytest.approx(1.0)


def test_zero_weight_atom_contributes_nothing():
    mu = AtomicMeasure([[0.0], [1.0], [2.0]], [0.5, 0.5, 0.0])
    assert entropy(mu) == pytest.approx(np.log(2))


def test_base_weights_enter_entropy():
    mu = AtomicMeasure([[0.0], [1.0]], [0.5, 0.5], [2.0, 2.0])
    # -sum p log(p / nu) = log 2 + log 2
    assert entropy(mu) == pytest.approx(2 * np.log(2))


@pytest.mark.parametrize("kwargs,msg", [
    (dict(atoms=[[0.0], [1.0]], weights=[0.6, 0.6]), "sum"),
    (dict(atoms=[[0.0], [1.0]], weights=[1.5, -0.5]), "nonnegative"),
    (dict(atoms=[[0.0], [0.0]], weights=[0.5, 0.5]), "distinct"),
    (dict(atoms=[[0.0], [1.0]], weights=[0.5, 0.5], base_weights=[1.0, 0.0]), "strictly"),
    (dict(atoms=[[0.0], [1.0]], weights=[1.0]), "expected"),
])
def test_validation(kwargs, msg):
    with pytest.raises(MeasureError, match=msg):
        AtomicMeasure(**kwargs)


def test_tilt_zero_is_identity(rng):
    X = rng.choice([-1.0, 1.0], size=(8, 3))
    X = np.unique(X, axis=0)
    p = rng.dirichlet(np.ones(len(X)))
    mu = AtomicMeasure(X, p)
    out = tilt(mu, np.zeros(X.shape[1]), 0.0, np.eye(X.shape[1]))
    np.testing.assert_allclose(out.weights, p, atol=1e-15)


def test_tilt_matches_direct_formula(rng):
    X = np.array([[0.0, 1.0], [2.0, -1.0], [1.0, 1.0]])
    p = np.array([0.2, 0.3, 0.5])
    w = rng.standard_normal(2)
    Q = np.array([[1.0, 0.2], [0.2, 0.5]])
    t = 0.7
    raw = p * np.exp(X @ w - 0.5 * t * np.sum((X @ Q.T) ** 2, axis=1))
    out = tilt(AtomicMeasure(X, p), w, t, Q)
    np.testing.assert_allclose(out.weights, raw / raw.sum(), rtol=1e-13)
    np.testing.assert_allclose(tilted_weights(AtomicMeasure(X, p), w[None], [t], Q)[0],
                               out.weights, rtol=1e-13)


def test_tilt_survives_huge_exponent():
    mu = AtomicMeasure([[-1.0], [1.0]], [0.5, 0.5])
    out = tilt(mu, [2000.0], 0.0, np.eye(1))
    np.testing.assert_allclose(out.weights, [0.0, 1.0])


def test_batch_moments_match_scalar(rng):
    X = np.unique(rng.choice([-1.0, 1.0], size=(16, 4)), axis=0)
    mu = AtomicMeasure(X, np.full(len(X), 1 / len(X)))
    P = rng.dirichlet(np.ones(len(X)), size=5)
    P[0, 0] = 0.0
    P[0] /= P[0].sum()
    means, covs, ents = batch_moments(mu, P)
    for r in range(5):
        nu = mu.with_weights(P[r])
        np.testing.assert_allclose(means[r], mean(nu), atol=1e-14)
        np.testing.assert_allclose(covs[r], covariance(nu), atol=1e-14)
        assert ents[r] == pytest.approx(entropy(nu), abs=1e-13)


def test_gibbs_measure_single_site():
    model = SpinModel.ising([[0.0]], [0.3])
    mu = gibbs_measure(model)
    np.testing.assert_allclose(mean(mu), [np.tanh(0.3)])


def test_roundtrip_dict():
    mu = AtomicMeasure([[0.5, 1.0], [1.0, 0.5]], [0.25, 0.75], [1.0, 3.0])
    back = AtomicMeasure.from_dict(mu.to_dict())
    np.testing.assert_array_equal(back.atoms, mu.atoms)
    np.testing.assert_array_equal(back.weights, mu.weights)
    np.testing.assert_array_equal(back.base_weights, mu.base_weights)
