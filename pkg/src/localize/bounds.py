"""Upper bounds on the mean-field deficit log Z - sup_product (E f + H).

All bounds are functions of the interaction spectrum and a trace budget S
bounding Tr Cov(mu); the log-det bound additionally needs Cov(mu) itself.
"""
from dataclasses import dataclass, field

import numpy as np

from .spectral import as_symmetric, logdet_plus_id, matrix_abs, rank, schatten_norm, sym_eig

DEFAULT_P_GRID = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
_BISECT_RTOL = 1e-12


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class WaterFill:
    value: float
    beta: np.ndarray
    level: float


def waterfill_S(alphas, S):
    """max sum log(beta_i alpha_i + 1) subject to beta >= 0, sum beta <= S.

    KKT gives beta_i = max(level - 1/alpha_i, 0). The water level is located
    by bisection on the budget; once the active set is known the level is
    recomputed in closed form so the budget is met exactly.
    """
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1)
    S = float(S)
    if np.any(alphas < 0) or not np.all(np.isfinite(alphas)):
        raise BoundError("alphas must be finite and nonnegative")
    if not (S >= 0) or not np.isfinite(S):
        raise BoundError(f"budget must be finite and nonnegative, got {S!r}")
    beta = np.zeros_like(alphas)
    pos = alphas > 0
    if S == 0 or not pos.any():
        return WaterFill(0.0, beta, 0.0)

    inv = 1.0 / alphas[pos]

    def used(level):
        return np.sum(np.clip(level - inv, 0.0, None))

    lo, hi = inv.min(), inv.max() + S
    while hi - lo > _BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if used(mid) < S:
            lo = mid
        else:
            hi = mid
    active = inv < hi
    level = (S + inv[active].sum()) / active.sum()
    # a level below some active 1/alpha means the set was one too large
    while np.any(inv[active] > level):
        active &= inv < inv[active].max()
        level = (S + inv[active].sum()) / active.sum()
    b = np.where(active, level - inv, 0.0)
    beta[pos] = b
    value = float(np.sum(np.log1p(alphas * beta)))
    return WaterFill(value, beta, float(level))


def _check_p(p):
    if not (p > 0):
        raise BoundError(f"p must be positive, got {p!r}")


def lemma41_bound(alphas, S, p):
    """(3(p+1)/p) (S ||alpha||_p)^{p/(p+1)}; the constant used by the Schatten-norm bound."""
    _check_p(p)
    alphas = np.abs(np.asarray(alphas, dtype=np.float64))
    norm = float(np.sum(alphas ** p) ** (1.0 / p))
    return 3.0 * (p + 1.0) / p * (S * norm) ** (p / (p + 1.0))


def lemma41_bound_printed(alphas, S, p):
    """Same power law with the smaller constant (3p+1)/p."""
    _check_p(p)
    alphas = np.abs(np.asarray(alphas, dtype=np.float64))
    norm = float(np.sum(alphas ** p) ** (1.0 / p))
    return (3.0 * p + 1.0) / p * (S * norm) ** (p / (p + 1.0))


def lift(J, dim):
    """Lift an n x n interaction to act on flattened (n k)-dimensional spins."""
    J = as_symmetric(J)
    n = J.shape[0]
    if dim == n:
        return J
    if dim % n:
        raise BoundError(f"covariance dimension {dim} is not a multiple of {n}")
    return np.kron(J, np.eye(dim // n))


def logdet_mf_bound(cov, J):
    """3 log det(Cov(mu) |J| + Id)."""
    cov = as_symmetric(cov)
    return 3.0 * logdet_plus_id(cov, matrix_abs(lift(J, cov.shape[0])))


def schatten_mf_bound(J, S, p):
    """10 ((p+1)/p) (S ||J||_{S_p})^{p/(p+1)}."""
    _check_p(p)
    if S < 0:
        raise BoundError("budget must be nonnegative")
    return 10.0 * (p + 1.0) / p * (S * schatten_norm(J, p)) ** (p / (p + 1.0))


def rank_bound(J, S):
    """3 Rank(J) log(S ||J||_op + 1)."""
    if S < 0:
        raise BoundError("budget must be nonnegative")
    r = rank(J)
    if r == 0:
        return 0.0
    return 3.0 * r * float(np.log1p(S * schatten_norm(J, np.inf)))


@dataclass
class BoundReport:
    S_used: float
    eigenvalues: np.ndarray
    s_js_bound: float
    beta: np.ndarray
    schatten_bounds: list
    rank: int
    rank_bound: float
    logdet_bound: float = None
    extras: dict = field(default_factory=dict)

    @property
    def entries(self):
        out = [("waterfill", self.s_js_bound), ("rank", self.rank_bound)]
        out += [(f"schatten_p={p:g}", v) for p, v in self.schatten_bounds]
        if self.logdet_bound is not None:
            out.append(("logdet", self.logdet_bound))
        return out

    @property
    def best(self):
        return min(self.entries, key=lambda kv: kv[1])

    @property
    def best_schatten(self):
        return min(self.schatten_bounds, key=lambda pv: pv[1])

    def to_dict(self):
        name, value = self.best
        return {
            "S": self.S_used,
            "eigenvalues": self.eigenvalues.tolist(),
            "waterfill_bound": self.s_js_bound,
            "waterfill_beta": self.beta.tolist(),
            "schatten_bounds": [{"p": p, "value": v} for p, v in self.schatten_bounds],
            "best_schatten_p": self.best_schatten[0],
            "rank": self.rank,
            "rank_bound": self.rank_bound,
            "logdet_bound": self.logdet_bound,
            "best": {"name": name, "value": value},
            **self.extras,
        }


def best_bound(J, S=None, cov_exact=None, p_grid=DEFAULT_P_GRID):
    """Evaluate every deficit bound and report the smallest.

    ``J`` must already act on the same space as ``cov_exact`` (use
    :func:`lift` for Potts models). ``S`` defaults to Tr(cov_exact).
    """
    J = as_symmetric(J)
    if S is None:
        if cov_exact is None:
            raise BoundError("need a budget S or an exact covariance")
        S = float(np.trace(cov_exact))
    S = float(S)
    if S < 0:
        raise BoundError("budget must be nonnegative")
    lam = sym_eig(J).eigenvalues
    wf = waterfill_S(np.abs(lam), S)
    schatten = [(float(p), schatten_mf_bound(J, S, p)) for p in p_grid]
    report = BoundReport(S, lam, 3.0 * wf.value, wf.beta, schatten, rank(J), rank_bound(J, S))
    if cov_exact is not None:
        report.logdet_bound = logdet_mf_bound(cov_exact, J)
    return report


@dataclass(frozen=True)
class Lemma42Result:
    lhs: float
    rhs: float
    holds: bool


def lemma42_check(A, B, slack=1e-8):
    """log det(AB + Id) <= water-filling value with levels spec(A), budget Tr(B)."""
    A = as_symmetric(A)
    B = as_symmetric(B)
    lhs = logdet_plus_id(B, A)
    alphas = np.clip(sym_eig(A).eigenvalues, 0.0, None)
    rhs = waterfill_S(alphas, max(float(np.trace(B)), 0.0)).value
    return Lemma42Result(lhs, rhs, bool(lhs <= rhs + slack))
