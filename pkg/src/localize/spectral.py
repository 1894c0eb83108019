"""Symmetric-matrix toolbox: eigendecomposition, matrix functions, Schatten
norms, stabilized log-determinants and Loewner-order checks."""
from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-10
RANK_RTOL = 1e-10


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, orthonormal

    def reconstruct(self):
        U, lam = self.eigenvectors, self.eigenvalues
        return (U * lam) @ U.T


@dataclass(frozen=True)
class PSDVerdict:
    holds: bool
    min_eigenvalue: float
    witness: np.ndarray = None
    tol: float = 0.0

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {
            "holds": self.holds,
            "min_eigenvalue": self.min_eigenvalue,
            "tol": self.tol,
            "witness": None if self.witness is None else self.witness.tolist(),
        }


def as_symmetric(A, tol=SYMMETRY_TOL):
    """Return the symmetrized float copy of ``A``; reject asymmetric input."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SpectralError("matrix has non-finite entries")
    scale = 1.0 + (np.max(np.abs(A)) if A.size else 0.0)
    asym = np.max(np.abs(A - A.T)) if A.size else 0.0
    if asym > tol * scale:
        raise SpectralError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    return 0.5 * (A + A.T)


def sym_eig(A):
    A = as_symmetric(A)
    try:
        lam, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:  # LAPACK syevd did not converge
        raise SpectralError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(lam, kind="stable")[::-1]
    return Spectrum(lam[order], U[:, order])


def matrix_function(A, fn):
    spec = sym_eig(A)
    U = spec.eigenvectors
    out = (U * fn(spec.eigenvalues)) @ U.T
    return 0.5 * (out + out.T)


def matrix_abs(J):
    """(J^2)^{1/2}: same eigenvectors, absolute eigenvalues."""
    return matrix_function(J, np.abs)


def psd_sqrt(A):
    """Principal square root of a PSD matrix (tiny negative eigenvalues clipped)."""
    return matrix_function(A, lambda lam: np.sqrt(np.clip(lam, 0.0, None)))


def schatten_norm(J, p):
    if not (p > 0):
        raise SpectralError(f"Schatten exponent must be positive, got {p!r}")
    lam = np.abs(sym_eig(J).eigenvalues)
    if np.isinf(p):
        return float(lam.max()) if lam.size else 0.0
    return float(np.sum(lam ** p) ** (1.0 / p))


def rank(J, rtol=RANK_RTOL):
    lam = np.abs(sym_eig(J).eigenvalues)
    if lam.size == 0 or lam.max() == 0:
        return 0
    return int(np.sum(lam > rtol * lam.max()))


def logdet_plus_id(C, L):
    """log det(C L + Id) for PSD C, L via the symmetric form L^{1/2} C L^{1/2}."""
    C = as_symmetric(C)
    Lh = psd_sqrt(L)
    M = Lh @ C @ Lh
    lam = sym_eig(0.5 * (M + M.T)).eigenvalues
    return float(np.sum(np.log1p(np.clip(lam, 0.0, None))))


def psd_leq(A, B, tol=0.0):
    """Check ``A <= B`` in the Loewner order up to ``tol``."""
    A = as_symmetric(A)
    B = as_symmetric(B)
    if A.shape != B.shape:
        raise SpectralError(f"shape mismatch {A.shape} vs {B.shape}")
    spec = sym_eig(B - A)
    lam_min = float(spec.eigenvalues[-1])
    if lam_min >= -tol:
        return PSDVerdict(True, lam_min, None, tol)
    return PSDVerdict(False, lam_min, spec.eigenvectors[:, -1].copy(), tol)
