"""Naive mean-field: the product-measure objective and coordinate ascent.

Product measures are stored as per-site distributions ``q`` (n, a) over the
model's alphabet. For Ising models the public marginals are the means
m_i = q_i(+1) - q_i(-1).
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .models import DEFAULT_STATE_CAP, exact_log_z

FEASIBILITY_TOL = 1e-10
TIE_TOL = 1e-9


class InfeasibleMarginals(ValueError):
    pass


@dataclass
class MeanFieldSolution:
    spin_space: str
    q: np.ndarray
    value: float
    iterations: int
    converged: bool
    restart: int

    @property
    def marginals(self):
        if self.spin_space == "ising":
            return self.q[:, 0] - self.q[:, 1]
        return self.q

    def to_dict(self):
        return {
            "spin_space": self.spin_space,
            "marginals": self.marginals.tolist(),
            "value": self.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart": self.restart,
        }


def as_site_distributions(model, marginals):
    """Convert Ising means or per-site distributions to a validated (n, a) array."""
    arr = np.asarray(marginals, dtype=np.float64)
    if model.spin_space == "ising" and arr.ndim == 1:
        if arr.shape != (model.n,):
            raise InfeasibleMarginals(f"expected {model.n} means, got shape {arr.shape}")
        if np.any(np.abs(arr) > 1 + FEASIBILITY_TOL) or not np.all(np.isfinite(arr)):
            raise InfeasibleMarginals("Ising means must lie in [-1, 1]")
        m = np.clip(arr, -1.0, 1.0)
        return np.column_stack([(1 + m) / 2, (1 - m) / 2])
    if arr.shape != (model.n, model.alphabet_size):
        raise InfeasibleMarginals(
            f"expected distributions of shape ({model.n}, {model.alphabet_size}), got {arr.shape}")
    if np.any(arr < -FEASIBILITY_TOL) or not np.all(np.isfinite(arr)):
        raise InfeasibleMarginals("site distributions must be nonnegative")
    if np.any(np.abs(arr.sum(axis=1) - 1) > FEASIBILITY_TOL):
        raise InfeasibleMarginals("site distributions must sum to 1")
    return np.clip(arr, 0.0, None)


def _objective(model, q):
    P = model.alphabet
    means = q @ P
    sq = q @ np.einsum("bc,bc->b", P, P)
    J = model.J
    gram = means @ means.T
    energy = (np.sum(J * gram) - np.sum(np.diag(J) * np.diag(gram))
              + np.sum(np.diag(J) * sq) + np.sum(model.h * means))
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(q > 0, q * np.log(q), 0.0))
    return float(energy + ent)


def mf_objective(model, marginals):
    """E_xi f + H(xi) for the product measure xi with the given marginals.

    Off-diagonal couplings see only site means; the diagonal term uses
    E|sigma_i|^2, which is 1 for Ising and Potts spins.
    """
    return _objective(model, as_site_distributions(model, marginals))


def _random_start(model, rng):
    return rng.dirichlet(np.ones(model.alphabet_size), size=model.n)


def ascend(model, q0, tol=1e-10, max_iters=10_000, record=0, backend=None):
    """Coordinate ascent from ``q0``; returns ``(q, iterations, converged, deltas)``."""
    q, it, conv, _, deltas = kernels.mf_coordinate_ascent(
        model.J, model.alphabet, model.h, q0, tol, max_iters, record=record, backend=backend)
    return q, it, conv, deltas


def mf_optimize(model, restarts=8, tol=1e-10, max_iters=10_000, seed=0, inits=None, backend=None):
    """Best product measure over one uniform start plus ``restarts`` random ones.

    Random starts draw each site from a flat Dirichlet using a Philox stream
    keyed by (seed, restart). ``inits`` replaces the random starts with
    explicit marginals. Among results within 1e-9 of the best value the
    lexicographically smallest marginal vector wins.
    """
    if restarts < 1 and inits is None:
        raise ValueError("restarts must be at least 1")
    starts = [np.full((model.n, model.alphabet_size), 1.0 / model.alphabet_size)]
    if inits is not None:
        starts += [as_site_distributions(model, m) for m in inits]
    else:
        for r in range(restarts):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(r,))))
            starts.append(_random_start(model, rng))

    results = []
    for idx, q0 in enumerate(starts):
        q, it, conv, _ = ascend(model, q0, tol, max_iters, backend=backend)
        results.append(MeanFieldSolution(model.spin_space, q, _objective(model, q), it, conv, idx))
    best = max(r.value for r in results)
    tied = [r for r in results if r.value >= best - TIE_TOL]
    return min(tied, key=lambda r: tuple(np.asarray(r.marginals).ravel()))


def deficit(model, mf, cap=DEFAULT_STATE_CAP):
    """log Z - mf.value; nonnegative up to rounding by the Gibbs variational principle."""
    return exact_log_z(model, cap) - mf.value
