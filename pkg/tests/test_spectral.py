import numpy as np
import pytest

from localize.spectral import (SpectralError, as_symmetric, logdet_plus_id, matrix_abs,
                               psd_leq, psd_sqrt, rank, schatten_norm, sym_eig)


def _random_sym(rng, n):
    A = rng.standard_normal((n, n))
    return A + A.T


def test_eig_descending_and_reconstructs(rng):
    A = _random_sym(rng, 6)
    spec = sym_eig(A)
    assert np.all(np.diff(spec.eigenvalues) <= 0)
    np.testing.assert_allclose(spec.reconstruct(), A, atol=1e-12)


def test_rejects_asymmetric():
    with pytest.raises(SpectralError, match="symmetric"):
        as_symmetric([[0.0, 1.0], [0.0, 0.0]])


def test_matrix_abs_squares_to_J_squared(rng):
    J = _random_sym(rng, 5)
    Jt = matrix_abs(J)
    np.testing.assert_allclose(Jt @ Jt, J @ J, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(Jt) >= -1e-12)


def test_psd_sqrt(rng):
    B = rng.standard_normal((4, 4))
    A = B @ B.T
    R = psd_sqrt(A)
    np.testing.assert_allclose(R @ R, A, atol=1e-10)


def test_schatten_norms():
    J = np.diag([3.0, -4.0, 0.0])
    assert schatten_norm(J, 1) == pytest.approx(7.0)
    assert schatten_norm(J, 2) == pytest.approx(5.0)
    assert schatten_norm(J, np.inf) == pytest.approx(4.0)
    # quasi-norm below 1
    assert schatten_norm(J, 0.5) == pytest.approx((np.sqrt(3) + 2) ** 2)
    with pytest.raises(SpectralError):
        schatten_norm(J, 0)


def test_rank():
    assert rank(np.ones((5, 5))) == 1
    assert rank(np.zeros((3, 3))) == 0
    assert rank(np.diag([1.0, 1e-14, 2.0])) == 2


def test_logdet_plus_id_matches_direct(rng):
    for n in (1, 3, 6):
        B = rng.standard_normal((n, n))
        C = B @ B.T
        E = rng.standard_normal((n, n))
        L = E @ E.T + 0.1 * np.eye(n)
        sign, direct = np.linalg.slogdet(C @ L + np.eye(n))
        assert sign > 0
        assert logdet_plus_id(C, L) == pytest.approx(direct, rel=1e-10)


def test_psd_leq():
    A = np.diag([1.0, 2.0])
    assert psd_leq(A, A + 1e-3 * np.eye(2))
    v = psd_leq(A, np.diag([1.0, 1.9]))
    assert not v.holds
    assert v.min_eigenvalue == pytest.approx(-0.1)
    np.testing.assert_allclose(np.abs(v.witness), [0.0, 1.0], atol=1e-12)
    assert psd_leq(A, np.diag([1.0, 1.9]), tol=0.11).holds
