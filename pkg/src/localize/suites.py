"""Seeded property suites behind ``localize check``."""
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .generators import random_ising
from .localization import (LocalizationConfig, covariance_decay_check, decompose,
                           entropy_identity_check, top_directions)
from .measure import AtomicMeasure, gibbs_measure

SUITES = ("lemma41", "lemma42", "entropy-identity", "decay", "martingale")
DEFAULT_CASES = {"lemma41": 1000, "lemma42": 1000, "entropy-identity": 4000, "decay": 2000,
                 "martingale": 2000}


@dataclass
class SuiteResult:
    name: str
    rows: list = field(default_factory=list)

    @property
    def failures(self):
        return sum(not r["passed"] for r in self.rows)

    @property
    def passed(self):
        return self.failures == 0

    def to_dict(self):
        return {"suite": self.name, "cases": len(self.rows), "failures": self.failures,
                "passed": self.passed, "rows": self.rows}


def _rng(seed, *key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=size))


def random_orthogonal(n, rng):
    Z = rng.standard_normal((n, n))
    Qm, R = np.linalg.qr(Z)
    return Qm * np.sign(np.diag(R))


def random_pd(n, rng, lo=1e-3, hi=1e2):
    U = random_orthogonal(n, rng)
    lam = _log_uniform(rng, lo, hi, n)
    A = (U * lam) @ U.T
    return 0.5 * (A + A.T)


def lemma41_instance(seed, case):
    rng = _rng(seed, 41, case)
    n = int(rng.integers(1, 7))
    alphas = _log_uniform(rng, 1e-3, 1e3, n)
    S = float(_log_uniform(rng, 1e-3, 1e3))
    p = float(_log_uniform(rng, 0.05, 20.0))
    return alphas, S, p


def run_lemma41(seed=0, cases=1000, slack=1e-8):
    """Water-filling value against both constants of the power-law bound."""
    res = SuiteResult("lemma41")
    for c in range(cases):
        alphas, S, p = lemma41_instance(seed, c)
        value = bounds.waterfill_S(alphas, S).value
        margins, printed = [], []
        for q in (p,) + bounds.DEFAULT_P_GRID:
            margins.append(bounds.lemma41_bound(alphas, S, q) - value)
            printed.append(bounds.lemma41_bound_printed(alphas, S, q) - value)
        res.rows.append({"case": c, "n": len(alphas), "S": S, "p": p, "value": value,
                         "margin": min(margins), "printed_margin": min(printed),
                         "passed": bool(min(margins) >= -slack)})
    return res


def lemma42_instance(seed, case):
    rng = _rng(seed, 42, case)
    n = int(rng.integers(1, 7))
    return random_pd(n, rng), random_pd(n, rng)


def run_lemma42(seed=0, cases=1000, slack=1e-8):
    res = SuiteResult("lemma42")
    for c in range(cases):
        A, B = lemma42_instance(seed, c)
        r = bounds.lemma42_check(A, B, slack)
        res.rows.append({"case": c, "n": A.shape[0], "lhs": r.lhs, "rhs": r.rhs,
                         "margin": r.rhs - r.lhs, "passed": r.holds})
    return res


def two_atom_uniform():
    return AtomicMeasure([[1.0], [-1.0]], [0.5, 0.5])


def run_entropy_identity(seed=0, cases=4000, rel_tol=0.05):
    cfg = LocalizationConfig(dt=1e-3, trials=cases, seed=seed)
    r = entropy_identity_check(two_atom_uniform(), np.eye(1), 1.0, cfg)
    res = SuiteResult("entropy-identity")
    res.rows.append({"case": 0, **r.to_dict(), "margin": rel_tol - r.rel_err,
                     "passed": bool(r.rel_err <= rel_tol)})
    return res


def _small_gibbs(seed, n=4):
    return gibbs_measure(random_ising(n, _rng(seed, 7)))


def run_decay(seed=0, cases=2000):
    mu = _small_gibbs(seed)
    Q = np.eye(mu.dim)
    cfg = LocalizationConfig(dt=1e-3, trials=cases, seed=seed)
    rows = covariance_decay_check(mu, Q, top_directions(mu, Q, 3), [0.5, 1.0, 2.0], cfg)
    res = SuiteResult("decay")
    for i, r in enumerate(rows):
        res.rows.append({"case": i, **r.to_dict(), "margin": r.bound + 3 * r.se - r.estimate,
                         "passed": r.holds})
    return res


def run_martingale(seed=0, cases=2000):
    mu = _small_gibbs(seed)
    cfg = LocalizationConfig(dt=1e-3, trials=cases, seed=seed)
    run = decompose(mu, np.eye(mu.dim), cfg)
    m = run.martingale
    res = SuiteResult("martingale")
    gap = np.abs(m.mean_tau - m.mean0)
    for i in range(len(gap)):
        res.rows.append({"case": i, "check": "mean", "gap": float(gap[i]),
                         "se": float(m.mean_tau_se[i]),
                         "margin": float(3 * m.mean_tau_se[i] - gap[i]),
                         "passed": bool(gap[i] <= 3 * m.mean_tau_se[i] + 1e-12)})
    tv = m.total_variance
    res.rows.append({"case": len(gap), "check": "total_variance", "gap": -tv.min_eigenvalue,
                     "se": tv.tol / 3, "margin": tv.min_eigenvalue + tv.tol, "passed": tv.holds})
    return res


RUNNERS = {
    "lemma41": run_lemma41,
    "lemma42": run_lemma42,
    "entropy-identity": run_entropy_identity,
    "decay": run_decay,
    "martingale": run_martingale,
}


def run_suite(name, seed=0, cases=None):
    if name not in RUNNERS:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return RUNNERS[name](seed=seed, cases=DEFAULT_CASES[name] if cases is None else cases)
