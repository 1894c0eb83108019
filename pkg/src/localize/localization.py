"""Stochastic localization as a finite-dimensional tilt SDE.

The density process dF_t(x) = F_t(x) (x - a_t).Q dB_t keeps every mu_t an
exponential tilt of mu with weights proportional to
exp(<w_t, x> - t/2 |Q x|^2), where dw_t = Q^2 a_t dt + Q dB_t. We integrate
w_t with Euler-Maruyama and recover mu_t exactly by tilting, so weights are
never stepped directly and normalization never drifts.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .measure import (AtomicMeasure, MomentSummary, batch_moments, covariance, entropy, mean,
                      tilted_weights)
from .spectral import SpectralError, as_symmetric, logdet_plus_id, psd_leq, psd_sqrt, sym_eig

CHUNK_TRIALS = 256
_GRID_TOL = 1e-9


class LocalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Stopping:
    """Stopping time: uniform on [lo, hi] independently of the path, or fixed (lo == hi)."""

    lo: float = 1.0
    hi: float = 2.0

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi) or not math.isfinite(self.hi):
            raise ValueError(f"invalid stopping interval [{self.lo}, {self.hi}]")

    @classmethod
    def uniform(cls, lo=1.0, hi=2.0):
        return cls(float(lo), float(hi))

    @classmethod
    def fixed(cls, t):
        return cls(float(t), float(t))

    @property
    def is_fixed(self):
        return self.lo == self.hi

    def to_dict(self):
        if self.is_fixed:
            return {"kind": "fixed", "t": self.lo}
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class LocalizationConfig:
    dt: float = 1e-3
    stopping: Stopping = field(default_factory=Stopping.uniform)
    trials: int = 1000
    seed: int = 0
    Q: np.ndarray = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def with_(self, **changes):
        fields = {"dt": self.dt, "stopping": self.stopping, "trials": self.trials,
                  "seed": self.seed, "Q": self.Q}
        fields.update(changes)
        return LocalizationConfig(**fields)


@dataclass
class LocalizationState:
    t: float
    w: np.ndarray


@dataclass(frozen=True)
class DecompositionSample:
    tau: float
    final_w: np.ndarray
    measure: AtomicMeasure
    moments: MomentSummary


@dataclass
class PathBundle:
    """Raw simulator output for a batch of trials."""

    taus: np.ndarray
    w_tau: np.ndarray
    record_times: np.ndarray
    traces: np.ndarray
    entropies: np.ndarray
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    Q: np.ndarray


def _check_psd(Q, name="Q"):
    Q = as_symmetric(Q)
    lam = sym_eig(Q).eigenvalues
    if lam.size and lam[-1] < -1e-10 * max(1.0, abs(lam[0])):
        raise SpectralError(f"{name} must be positive semidefinite (min eigenvalue {lam[-1]:.3g})")
    return Q


def _grid_steps(times, dt, what):
    steps = []
    for t in times:
        s = round(t / dt)
        if t < 0 or abs(s * dt - t) > _GRID_TOL * max(1.0, t):
            raise ValueError(f"{what} {t!r} is not a nonnegative multiple of dt={dt!r}")
        steps.append(int(s))
    return np.asarray(steps, dtype=np.int64)


def trial_generators(seed, trial_index):
    """Independent Philox streams (path noise, stopping time) for one trial."""
    path = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial_index, 0))))
    stop = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial_index, 1))))
    return path, stop


def _steps_to(tau, dt):
    return 0 if tau == 0 else int(math.ceil(tau / dt - _GRID_TOL))


def simulate(mu0, Q, cfg, trial_indices=None, horizon=0.0, snapshot_times=(), record_every=0,
             backend=None):
    """Run independent trials of the localization process.

    Each trial stops at its own time from ``cfg.stopping``; paths are
    continued up to ``horizon`` when that is later, so fixed-grid snapshots
    (``snapshot_times``) and trace/entropy records can share the same noise.
    """
    Q = _check_psd(np.atleast_2d(np.asarray(Q, dtype=np.float64)))
    if Q.shape != (mu0.dim, mu0.dim):
        raise ValueError(f"Q has shape {Q.shape}, measure dimension is {mu0.dim}")
    dt = cfg.dt
    if trial_indices is None:
        trial_indices = range(cfg.trials)
    trial_indices = list(trial_indices)
    snap_steps = _grid_steps(snapshot_times, dt, "snapshot time")
    order = np.argsort(snap_steps, kind="stable")
    horizon_steps = max(_grid_steps([horizon], dt, "horizon")[0],
                        int(snap_steps.max()) if snap_steps.size else 0)

    with np.errstate(divide="ignore"):
        logp0 = np.log(mu0.weights)
    logbase = np.log(mu0.base_weights)
    n = mu0.dim
    taus_all, wt_all, tr_all, en_all, sn_all = [], [], [], [], []
    for start in range(0, len(trial_indices), CHUNK_TRIALS):
        chunk = trial_indices[start:start + CHUNK_TRIALS]
        taus = np.empty(len(chunk))
        n_tau = np.empty(len(chunk), dtype=np.int64)
        n_total = np.empty(len(chunk), dtype=np.int64)
        gens = []
        for r, idx in enumerate(chunk):
            path_rng, stop_rng = trial_generators(cfg.seed, idx)
            st = cfg.stopping
            taus[r] = st.lo if st.is_fixed else stop_rng.uniform(st.lo, st.hi)
            n_tau[r] = _steps_to(taus[r], dt)
            n_total[r] = max(n_tau[r], horizon_steps)
            gens.append(path_rng)
        noise = np.zeros((len(chunk), max(int(n_total.max()), 1), n))
        for r, g in enumerate(gens):
            noise[r, :n_total[r]] = g.standard_normal((n_total[r], n))
        W_tau, traces, ents, snaps = kernels.simulate_paths(
            mu0.atoms, logp0, logbase, Q, dt, taus, n_tau, n_total, noise,
            record_every=record_every, snap_steps=snap_steps[order], backend=backend)
        if not np.all(np.isfinite(W_tau)):
            bad = chunk[int(np.flatnonzero(~np.all(np.isfinite(W_tau), axis=1))[0])]
            raise LocalizationError(f"trial {bad}: tilt vector became non-finite")
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        taus_all.append(taus)
        wt_all.append(W_tau)
        tr_all.append(traces)
        en_all.append(ents)
        sn_all.append(snaps[:, inv])

    def _cat(parts):
        width = max(p.shape[1] for p in parts)
        padded = [np.pad(p, [(0, 0), (0, width - p.shape[1])] + [(0, 0)] * (p.ndim - 2),
                         constant_values=np.nan) for p in parts]
        return np.concatenate(padded)

    traces = _cat(tr_all)
    rec_times = (np.arange(traces.shape[1]) * record_every * dt
                 if record_every > 0 else np.zeros(0))
    return PathBundle(np.concatenate(taus_all), np.concatenate(wt_all), rec_times, traces,
                      _cat(en_all), np.asarray(snapshot_times, dtype=np.float64),
                      np.concatenate(sn_all), Q)


def samples_from_paths(mu0, paths):
    P = tilted_weights(mu0, paths.w_tau, paths.taus, paths.Q)
    means, covs, ents = batch_moments(mu0, P)
    return [DecompositionSample(float(paths.taus[r]), paths.w_tau[r].copy(),
                                mu0.with_weights(P[r]), MomentSummary(means[r], covs[r], float(ents[r])))
            for r in range(len(paths.taus))]


def step(state, mu0, cfg, noise):
    """One Euler-Maruyama step of w: w + Q^2 a_t dt + Q sqrt(dt) noise."""
    Q = np.atleast_2d(np.asarray(cfg.Q, dtype=np.float64))
    noise = np.asarray(noise, dtype=np.float64).reshape(-1)
    P = tilted_weights(mu0, state.w[None, :], state.t, Q)[0]
    a = P @ mu0.atoms
    w = state.w + (Q @ Q @ a) * cfg.dt + (Q @ noise) * math.sqrt(cfg.dt)
    if not np.all(np.isfinite(w)):
        raise LocalizationError(f"non-finite tilt vector after step at t={state.t}")
    return LocalizationState(state.t + cfg.dt, w)


def run_trial(mu0, cfg, trial_index, backend=None):
    """A single stopped sample mu_tau using the trial's own RNG streams."""
    if cfg.Q is None:
        raise ValueError("run_trial needs cfg.Q")
    try:
        paths = simulate(mu0, cfg.Q, cfg, [trial_index], backend=backend)
    except LocalizationError as exc:
        raise LocalizationError(f"trial {trial_index} aborted: {exc}") from exc
    return samples_from_paths(mu0, paths)[0]


def driving_matrix(L):
    """Q = L^{1/2}; L must be positive definite."""
    L = as_symmetric(L)
    lam = sym_eig(L).eigenvalues
    if lam[-1] <= 0:
        raise SpectralError(f"L must be positive definite (min eigenvalue {lam[-1]:.3g})")
    return psd_sqrt(L)


def sample_decomposition(mu0, L, cfg, backend=None):
    Q = driving_matrix(np.atleast_2d(L))
    return samples_from_paths(mu0, simulate(mu0, Q, cfg.with_(Q=Q), backend=backend))


# ------------------------------------------------------------- reporting

def _mean_se(x):
    x = np.asarray(x, dtype=np.float64)
    m = x.mean(axis=0)
    if len(x) < 2:
        return m, np.zeros_like(m)
    return m, x.std(axis=0, ddof=1) / math.sqrt(len(x))


@dataclass
class Verdict:
    name: str
    lhs: float
    rhs: float
    tol: float
    holds: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "tol": self.tol,
                "holds": self.holds, **self.detail}


@dataclass
class DecompositionReport:
    trials: int
    dt: float
    entropy0: float
    mean_entropy: float
    mean_entropy_se: float
    mean_cov: np.ndarray
    mean_cov_se: np.ndarray
    mean_cov_L_cov: np.ndarray
    mean_cov_L_cov_se: np.ndarray
    cov0: np.ndarray
    deficit_bound: float
    trace_bound: float
    allowance_c: float
    verdicts: list

    @property
    def holds(self):
        return all(v.holds for v in self.verdicts)

    def to_dict(self):
        return {
            "trials": self.trials,
            "dt": self.dt,
            "entropy0": self.entropy0,
            "mean_entropy": self.mean_entropy,
            "mean_entropy_se": self.mean_entropy_se,
            "entropy_deficit": self.entropy0 - self.mean_entropy,
            "deficit_bound_logdet": self.deficit_bound,
            "deficit_bound_trace": self.trace_bound,
            "cov0": self.cov0.tolist(),
            "mean_cov": self.mean_cov.tolist(),
            "mean_cov_se": self.mean_cov_se.tolist(),
            "mean_cov_L_cov": self.mean_cov_L_cov.tolist(),
            "mean_cov_L_cov_se": self.mean_cov_L_cov_se.tolist(),
            "discretization_c": self.allowance_c,
            "discretization_allowance": self.allowance_c * self.dt,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "holds": self.holds,
        }


def verify_theorem(mu0, L, samples, dt=1e-3):
    """Monte Carlo check of the three decomposition estimates.

    (1) H(mu) - E H(mu_tau) <= log det(Cov(mu) L + Id),
    (2) E Cov(mu_tau) <= L^{-1},
    (3) E[Cov(mu_tau) L Cov(mu_tau)] <= Cov(mu),
    each with tolerance 3 SE + c dt, c = 10 Tr(L Cov(mu)).
    """
    if not samples:
        raise ValueError("verify_theorem needs at least one sample")
    L = as_symmetric(np.atleast_2d(L))
    cov0 = covariance(mu0)
    H0 = entropy(mu0)
    ents = np.array([s.moments.entropy for s in samples])
    covs = np.stack([s.moments.covariance for s in samples])
    clc = np.einsum("tij,jk,tkl->til", covs, L, covs)
    clc = 0.5 * (clc + np.swapaxes(clc, 1, 2))

    mH, seH = _mean_se(ents)
    mC, seC = _mean_se(covs)
    mCLC, seCLC = _mean_se(clc)
    mC = 0.5 * (mC + mC.T)
    mCLC = 0.5 * (mCLC + mCLC.T)
    bound = logdet_plus_id(cov0, L)
    trace_bound = float(np.trace(cov0 @ L))
    c = 10.0 * trace_bound
    allow = c * dt

    deficit = H0 - float(mH)
    tol1 = 3.0 * float(seH) + allow
    v1 = Verdict("entropy", deficit, bound, tol1, bool(deficit <= bound + tol1),
                 {"logdet_le_trace": bool(bound <= trace_bound + 1e-10)})
    tol2 = 3.0 * float(seC.max()) + allow
    chk2 = psd_leq(mC, np.linalg.inv(L), tol2)
    v2 = Verdict("cov_le_Linv", float(-chk2.min_eigenvalue), 0.0, tol2, chk2.holds,
                 {"min_eig_gap": chk2.min_eigenvalue})
    tol3 = 3.0 * float(seCLC.max()) + allow
    chk3 = psd_leq(mCLC, cov0, tol3)
    v3 = Verdict("cov_L_cov_le_cov", float(-chk3.min_eigenvalue), 0.0, tol3, chk3.holds,
                 {"min_eig_gap": chk3.min_eigenvalue})
    return DecompositionReport(len(samples), float(dt), H0, float(mH), float(seH), mC, seC,
                               mCLC, seCLC, cov0, bound, trace_bound, c, [v1, v2, v3])


@dataclass
class MartingaleReport:
    mean0: np.ndarray
    mean_tau: np.ndarray
    mean_tau_se: np.ndarray
    atom_weights0: np.ndarray
    atom_weights_tau: np.ndarray
    atom_weights_se: np.ndarray
    total_variance: object  # PSDVerdict
    n_se: float = 3.0

    @property
    def mean_holds(self):
        return bool(np.all(np.abs(self.mean_tau - self.mean0) <= self.n_se * self.mean_tau_se + 1e-12))

    @property
    def atoms_hold(self):
        gap = np.abs(self.atom_weights_tau - self.atom_weights0)
        return bool(np.all(gap <= self.n_se * self.atom_weights_se + 1e-12))

    @property
    def holds(self):
        return self.mean_holds and self.total_variance.holds

    def to_dict(self):
        return {
            "mean0": self.mean0.tolist(),
            "mean_tau": self.mean_tau.tolist(),
            "mean_tau_se": self.mean_tau_se.tolist(),
            "mean_holds": self.mean_holds,
            "atoms_hold": self.atoms_hold,
            "max_atom_gap": float(np.max(np.abs(self.atom_weights_tau - self.atom_weights0))),
            "total_variance": self.total_variance.to_dict(),
            "holds": self.holds,
        }


def martingale_check(mu0, samples, n_se=3.0):
    """E a_tau = a_0, E mu_tau({x}) = mu({x}) and E Cov(mu_tau) <= Cov(mu)."""
    a = np.stack([s.moments.mean for s in samples])
    P = np.stack([s.measure.weights for s in samples])
    covs = np.stack([s.moments.covariance for s in samples])
    ma, sea = _mean_se(a)
    mp, sep = _mean_se(P)
    mC, seC = _mean_se(covs)
    tv = psd_leq(0.5 * (mC + mC.T), covariance(mu0), n_se * float(seC.max()))
    return MartingaleReport(mean(mu0), ma, sea, mu0.weights.copy(), mp, sep, tv, n_se)


@dataclass
class IdentityCheck:
    lhs: float
    rhs: float
    rel_err: float
    lhs_se: float

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "rel_err": self.rel_err, "lhs_se": self.lhs_se}


def entropy_identity_check(mu0, Q, t_end, cfg, backend=None):
    """H(mu) - E H(mu_t) versus 1/2 int_0^t E Tr(Q A_s Q) ds, both by Monte Carlo.

    The right side integrates the trial-averaged trace trajectory with the
    trapezoidal rule on the simulation grid.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    _grid_steps([t_end], cfg.dt, "t_end")
    run = cfg.with_(stopping=Stopping.fixed(t_end), Q=Q)
    paths = simulate(mu0, Q, run, record_every=1, backend=backend)
    H0 = entropy(mu0)
    final_ent = paths.entropies[:, -1]
    m_ent, se_ent = _mean_se(final_ent)
    lhs = H0 - float(m_ent)
    mtr = paths.traces.mean(axis=0)
    rhs = 0.5 * float(np.sum(0.5 * (mtr[1:] + mtr[:-1])) * cfg.dt) if len(mtr) > 1 else 0.0
    denom = max(abs(lhs), abs(rhs))
    rel = abs(lhs - rhs) / denom if denom > 1e-300 else 0.0
    return IdentityCheck(lhs, rhs, rel, float(se_ent))


@dataclass
class DecayRow:
    direction: int
    t: float
    estimate: float
    se: float
    bound: float
    holds: bool

    def to_dict(self):
        return dict(self.__dict__)


def decay_table(mu0, paths, directions, n_se=3.0):
    """Rows comparing E<theta, Q A_t Q theta> with 1/(t + 1/<theta, Q A_0 Q theta>)."""
    Q = paths.Q
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise ValueError("directions must be unit vectors")
    U = directions @ Q  # rows theta^T Q
    cov0 = covariance(mu0)
    init = np.einsum("di,ij,dj->d", U, cov0, U)
    rows = []
    for j, t in enumerate(paths.snapshot_times):
        W = paths.snapshots[:, j]
        alive = np.all(np.isfinite(W), axis=1)
        P = tilted_weights(mu0, W[alive], t, Q)
        _, covs, _ = batch_moments(mu0, P)
        vals = np.einsum("di,tij,dj->td", U, covs, U)
        est, se = _mean_se(vals)
        for d in range(len(U)):
            bound = 1.0 / (t + 1.0 / init[d]) if init[d] > 0 else 0.0
            ok = bool(est[d] <= bound + n_se * se[d] + 1e-12)
            rows.append(DecayRow(d, float(t), float(est[d]), float(se[d]), float(bound), ok))
    return rows


def covariance_decay_check(mu0, Q, directions, t_grid, cfg, backend=None, n_se=3.0):
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    t_grid = [float(t) for t in t_grid]
    run = cfg.with_(stopping=Stopping.fixed(max(t_grid)), Q=Q)
    paths = simulate(mu0, Q, run, snapshot_times=t_grid, backend=backend)
    return decay_table(mu0, paths, directions, n_se)


def trace_profile(paths):
    """Trial-averaged Tr(Q A_t Q) and H(mu_t) with standard errors on the record grid."""
    out = []
    for j, t in enumerate(paths.record_times):
        tr = paths.traces[:, j]
        en = paths.entropies[:, j]
        alive = np.isfinite(tr)
        if not alive.any():
            break
        mt, st = _mean_se(tr[alive])
        me, _ = _mean_se(en[alive])
        out.append((float(t), float(mt), float(st), float(me), int(alive.sum())))
    return out


def top_directions(mu0, Q, count):
    """Leading unit eigenvectors of Q Cov(mu) Q."""
    M = Q @ covariance(mu0) @ Q
    spec = sym_eig(0.5 * (M + M.T))
    return spec.eigenvectors[:, :count].T.copy()


@dataclass
class DecompositionRun:
    samples: list
    report: DecompositionReport
    martingale: MartingaleReport
    decay: list
    paths: PathBundle


def decompose(mu0, L, cfg, decay_times=(), decay_directions=3, record_every=0, backend=None):
    """Sample the decomposition and run every Monte Carlo check on one set of paths.

    Paths are continued to ``max(decay_times)`` past each trial's stopping
    time so the decay table reuses the same trials.
    """
    Q = driving_matrix(np.atleast_2d(L))
    run = cfg.with_(Q=Q)
    decay_times = [float(t) for t in decay_times]
    paths = simulate(mu0, Q, run, horizon=max(decay_times, default=0.0),
                     snapshot_times=decay_times, record_every=record_every, backend=backend)
    samples = samples_from_paths(mu0, paths)
    report = verify_theorem(mu0, L, samples, cfg.dt)
    mart = martingale_check(mu0, samples)
    decay = []
    if decay_times:
        if isinstance(decay_directions, int):
            decay_directions = top_directions(mu0, Q, min(decay_directions, mu0.dim))
        decay = decay_table(mu0, paths, decay_directions)
    return DecompositionRun(samples, report, mart, decay, paths)
