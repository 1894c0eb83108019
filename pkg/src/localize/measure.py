"""Finite-support measures on R^n: entropy, moments and exponential tilts."""
from dataclasses import dataclass, field

import numpy as np

NORMALIZATION_TOL = 1e-12


class MeasureError(ValueError):
    pass


def _log_weights(weights):
    with np.errstate(divide="ignore"):
        return np.log(weights)


def _softmax_rows(logits):
    logits = np.atleast_2d(logits)
    mx = np.max(logits, axis=-1, keepdims=True)
    e = np.exp(logits - mx)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Probability measure on finitely many atoms with a background measure.

    ``base_weights`` is the mass the background measure puts on each atom;
    the default is the counting measure.
    """

    atoms: np.ndarray
    weights: np.ndarray
    base_weights: np.ndarray = None
    _trusted: bool = field(default=False, repr=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        base = (np.ones(len(weights)) if self.base_weights is None
                else np.asarray(self.base_weights, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "base_weights", base)
        for arr in (atoms, weights, base):
            arr.setflags(write=False)
        if self._trusted:
            return

        if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[1] == 0:
            raise MeasureError(f"atoms must be a nonempty (m, n) array, got shape {atoms.shape}")
        m = atoms.shape[0]
        if weights.shape != (m,) or base.shape != (m,):
            raise MeasureError(
                f"expected {m} weights and base weights, got {weights.shape[0]} and {base.shape[0]}")
        if not np.all(np.isfinite(atoms)):
            raise MeasureError("atoms must be finite")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise MeasureError("weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
            raise MeasureError(f"weights sum to {weights.sum()!r}, not 1")
        if np.any(base <= 0) or not np.all(np.isfinite(base)):
            raise MeasureError("base_weights must be finite and strictly positive")
        if len(np.unique(atoms, axis=0)) != m:
            raise MeasureError("atoms must be pairwise distinct")

    @property
    def size(self):
        return self.atoms.shape[0]

    @property
    def dim(self):
        return self.atoms.shape[1]

    def with_weights(self, weights):
        return AtomicMeasure(self.atoms, weights, self.base_weights, _trusted=True)

    def to_dict(self):
        return {
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
            "base_weights": self.base_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        missing = [k for k in ("atoms", "weights") if k not in data]
        if missing:
            raise MeasureError(f"measure file is missing field(s): {', '.join(missing)}")
        weights = np.asarray(data["weights"], dtype=np.float64)
        return cls(data["atoms"], weights, data.get("base_weights"))


@dataclass(frozen=True)
class MomentSummary:
    mean: np.ndarray
    covariance: np.ndarray
    entropy: float


def point_mass(x, base_weight=1.0):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return AtomicMeasure(x[None, :], [1.0], [base_weight])


def entropy(mu):
    """Relative entropy ``-sum p log(p / nu)`` with ``0 log 0 = 0``."""
    p = mu.weights
    nz = p > 0
    return float(-np.sum(p[nz] * (np.log(p[nz]) - np.log(mu.base_weights[nz]))))


def mean(mu):
    return mu.weights @ mu.atoms


def covariance(mu):
    a = mean(mu)
    centered = mu.atoms - a
    cov = (centered * mu.weights[:, None]).T @ centered
    return 0.5 * (cov + cov.T)


def moments(mu):
    return MomentSummary(mean(mu), covariance(mu), entropy(mu))


def tilt_logits(atoms, log_weights, w, t, Q):
    """Unnormalized log-weights after tilting by ``exp(<w,x> - t/2 |Qx|^2)``.

    ``w`` may be a single vector or a batch of shape (T, n) with ``t`` of
    shape (T,); the result then has shape (T, m).
    """
    Qx = atoms @ np.asarray(Q, dtype=np.float64).T
    half_sq = 0.5 * np.einsum("ij,ij->i", Qx, Qx)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        return log_weights + atoms @ w - float(t) * half_sq
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (w.shape[0],))
    return log_weights[None, :] + w @ atoms.T - t[:, None] * half_sq[None, :]


def tilt(mu, w, t, Q):
    """Exponential tilt of ``mu``; atoms and background measure are kept."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if w.shape[0] != mu.dim or Q.shape != (mu.dim, mu.dim):
        raise MeasureError(f"tilt dimensions disagree with measure dimension {mu.dim}")
    if t < 0:
        raise MeasureError("tilt time must be nonnegative")
    logits = tilt_logits(mu.atoms, _log_weights(mu.weights), w, t, Q)
    logits = logits - np.max(logits)
    p = np.exp(logits)
    total = p.sum()
    assert total >= 1.0, "max-subtracted tilt lost all mass"
    return mu.with_weights(p / total)


def tilted_weights(mu, W, t, Q):
    """Batch version of :func:`tilt` returning only the (T, m) weight matrix."""
    return _softmax_rows(tilt_logits(mu.atoms, _log_weights(mu.weights), W, t, Q))


def batch_moments(mu, P):
    """Means, covariances and entropies for a stack of weight vectors P (T, m)."""
    X = mu.atoms
    means = P @ X
    second = np.einsum("tm,mi,mj->tij", P, X, X, optimize=True)
    covs = second - means[:, :, None] * means[:, None, :]
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * (np.log(P) - np.log(mu.base_weights)[None, :]), 0.0)
    return means, covs, -terms.sum(axis=1)


def gibbs_measure(model, cap=None):
    """Gibbs measure of a spin model under the counting background measure.

    Atoms are spin configurations flattened to R^(n k).
    """
    from .models import DEFAULT_STATE_CAP, enumerate_configurations, energies

    configs = enumerate_configurations(model, cap=DEFAULT_STATE_CAP if cap is None else cap)
    f = energies(model, configs)
    p = np.exp(f - f.max())
    p /= p.sum()
    atoms = model.alphabet[configs].reshape(len(configs), -1)
    return AtomicMeasure(atoms, p, np.ones(len(p)), _trusted=True)
