"""Spin models with quadratic Hamiltonians and exact enumeration."""
from dataclasses import dataclass, field

import numpy as np

DEFAULT_STATE_CAP = 2 ** 20
_CHUNK = 1 << 14


class ModelError(ValueError):
    pass


class StateSpaceTooLarge(ModelError):
    def __init__(self, required, cap):
        super().__init__(f"state space has {required} configurations, exceeding the cap of {cap}")
        self.required = required
        self.cap = cap


@dataclass(frozen=True, eq=False)
class SpinModel:
    """Hamiltonian f(s) = sum_ij J_ij s_i.s_j + sum_i h_i.s_i over a finite alphabet.

    ``alphabet`` holds the allowed single-site spins as rows of an (a, k)
    array: ``[[1], [-1]]`` for Ising, the standard basis of R^k for Potts,
    user-supplied points otherwise.
    """

    J: np.ndarray
    h: np.ndarray
    spin_space: str
    alphabet: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.J, dtype=np.float64))
        if J.shape[0] != J.shape[1]:
            raise ModelError(f"J must be square, got {J.shape}")
        if np.max(np.abs(J - J.T), initial=0.0) > 1e-10 * (1 + np.max(np.abs(J), initial=0.0)):
            raise ModelError("J must be symmetric")
        J = 0.5 * (J + J.T)
        alphabet = np.atleast_2d(np.asarray(self.alphabet, dtype=np.float64))
        n, k = J.shape[0], alphabet.shape[1]
        h = np.zeros((n, k)) if self.h is None else np.asarray(self.h, dtype=np.float64)
        if h.ndim == 1 and k == 1:
            h = h[:, None]
        if h.shape != (n, k):
            raise ModelError(f"h must have shape ({n}, {k}), got {h.shape}")
        if self.spin_space not in ("ising", "potts", "atoms"):
            raise ModelError(f"unknown spin space {self.spin_space!r}")
        if self.spin_space == "ising" and not np.array_equal(alphabet, [[1.0], [-1.0]]):
            raise ModelError("ising alphabet must be [[1], [-1]]")
        if self.spin_space == "potts" and not np.array_equal(alphabet, np.eye(k)):
            raise ModelError("potts alphabet must be the standard basis of R^k")
        if len(np.unique(alphabet, axis=0)) != len(alphabet):
            raise ModelError("alphabet points must be distinct")
        for name, arr in (("J", J), ("h", h), ("alphabet", alphabet)):
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def ising(cls, J, h=None, metadata=None):
        return cls(J, h, "ising", [[1.0], [-1.0]], dict(metadata or {}))

    @classmethod
    def potts(cls, J, k, h=None, metadata=None):
        return cls(J, h, "potts", np.eye(int(k)), dict(metadata or {}))

    @classmethod
    def atoms(cls, J, points, h=None, metadata=None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        return cls(J, h, "atoms", points, dict(metadata or {}))

    @property
    def n(self):
        return self.J.shape[0]

    @property
    def k(self):
        return self.alphabet.shape[1]

    @property
    def alphabet_size(self):
        return self.alphabet.shape[0]

    @property
    def num_states(self):
        return self.alphabet_size ** self.n

    def interaction(self):
        """J lifted to the (n k) x (n k) matrix acting on flattened configurations."""
        return np.kron(self.J, np.eye(self.k)) if self.k > 1 else self.J.copy()

    def diameter_sq(self):
        P = self.alphabet
        diff = P[:, None, :] - P[None, :, :]
        return float(np.max(np.sum(diff ** 2, axis=-1)))

    def default_budget(self):
        """Trace budget S bounding Tr Cov(mu): n for Ising spins, D^2 n otherwise."""
        if self.spin_space == "ising":
            return float(self.n)
        return self.diameter_sq() * self.n

    def same_as(self, other):
        return (self.spin_space == other.spin_space
                and np.array_equal(self.J, other.J)
                and np.array_equal(self.h, other.h)
                and np.array_equal(self.alphabet, other.alphabet)
                and self.metadata == other.metadata)


def _as_configuration(model, sigma):
    sigma = np.asarray(sigma, dtype=np.float64)
    if model.spin_space == "ising" and sigma.ndim == 1:
        sigma = sigma[:, None]
    if sigma.shape != (model.n, model.k):
        raise ModelError(f"configuration must have shape ({model.n}, {model.k}), got {sigma.shape}")
    match = np.all(np.abs(sigma[:, None, :] - model.alphabet[None, :, :]) <= 1e-12, axis=-1)
    bad = np.flatnonzero(~match.any(axis=1))
    if bad.size:
        raise ModelError(f"site(s) {bad.tolist()} hold spins outside the alphabet")
    return sigma


def hamiltonian(model, sigma):
    """f(sigma) with the full double sum, diagonal included."""
    s = _as_configuration(model, sigma)
    return float(np.sum(model.J * (s @ s.T)) + np.sum(model.h * s))


def enumerate_configurations(model, cap=DEFAULT_STATE_CAP):
    """All configurations as alphabet indices, site 0 most significant."""
    required = model.num_states
    if required > cap:
        raise StateSpaceTooLarge(required, cap)
    a, n = model.alphabet_size, model.n
    idx = np.arange(required)
    digits = np.empty((required, n), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        digits[:, i] = idx % a
        idx //= a
    return digits


def energies(model, configs):
    configs = np.asarray(configs)
    Jk = model.interaction()
    hflat = model.h.reshape(-1)
    out = np.empty(len(configs))
    for start in range(0, len(configs), _CHUNK):
        X = model.alphabet[configs[start:start + _CHUNK]].reshape(-1, model.n * model.k)
        out[start:start + _CHUNK] = np.einsum("bi,bi->b", X @ Jk, X) + X @ hflat
    return out


def exact_log_z(model, cap=DEFAULT_STATE_CAP):
    """log sum_sigma exp f(sigma) by streaming log-sum-exp in a fixed chunk order."""
    configs = enumerate_configurations(model, cap)
    acc = -np.inf
    for start in range(0, len(configs), _CHUNK):
        f = energies(model, configs[start:start + _CHUNK])
        mx = f.max()
        part = mx + np.log(np.sum(np.exp(f - mx)))
        acc = np.logaddexp(acc, part)
    return float(acc)


def potts2_as_ising(model):
    """Rewrite a 2-state Potts model as an Ising model plus a constant.

    With s_i = +1 for e_1 and -1 for e_2, e_a.e_b = (1 + s_a s_b)/2 and
    h_i.sigma_i = (h_i1 + h_i2)/2 + s_i (h_i1 - h_i2)/2, so
    f_potts = f_ising(J/2, (h1 - h2)/2) + sum_ij J_ij/2 + sum_i (h_i1 + h_i2)/2.
    Returns ``(ising_model, constant)``; log Z differs by exactly ``constant``.
    """
    if model.spin_space != "potts" or model.k != 2:
        raise ModelError("mapping applies to potts models with k = 2 only")
    h = model.h
    ising = SpinModel.ising(model.J / 2.0, (h[:, 0] - h[:, 1]) / 2.0)
    const = float(model.J.sum() / 2.0 + (h[:, 0] + h[:, 1]).sum() / 2.0)
    return ising, const
