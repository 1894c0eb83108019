"""Hot loops: tilt-SDE path simulation and mean-field coordinate sweeps.

Each kernel has a numba implementation and a vectorized numpy one with the
same signature. :func:`simulate_paths` and :func:`mf_coordinate_ascent`
dispatch on ``backend`` (default from ``LOCALIZE_DISABLE_JIT``).
"""
import math

import numpy as np

from ._accel import njit, prange, resolve_backend


# ---------------------------------------------------------------- SDE paths

# Finite-math flags are excluded: zero-weight atoms carry -inf log-weights.
_FASTMATH = {"reassoc", "contract", "arcp", "nsz"}

_LOG2E = 1.4426950408889634
_LN2_HI = 0.6931471803691238
_LN2_LO = 1.9082149292705877e-10
_EXP_FLOOR = -700.0


@njit(cache=True, fastmath={"contract", "nsz"})
def _exp_nonpositive(x, out, bits):
    """out = exp(x) for x <= 0, written so LLVM can vectorize it.

    Cody-Waite reduction plus a degree-12 Taylor polynomial; relative error
    stays within a few ulp. Arguments below -700 (weights under 1e-304 of the
    leading atom) return exactly 0.
    """
    m = x.shape[0]
    for i in range(m):
        xi = max(x[i], _EXP_FLOOR)
        kf = math.floor(xi * _LOG2E + 0.5)
        r = xi - kf * _LN2_HI - kf * _LN2_LO
        poly = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6 + r * (1.0 / 24 + r * (
            1.0 / 120 + r * (1.0 / 720 + r * (1.0 / 5040 + r * (1.0 / 40320 + r * (
                1.0 / 362880 + r * (1.0 / 3628800 + r * (1.0 / 39916800 + r / 479001600)))))))))))
        out[i] = poly if x[i] >= _EXP_FLOOR else 0.0
        bits[i] = (np.int64(kf) + 1023) << 52
    scale = bits.view(np.float64)
    for i in range(m):
        out[i] *= scale[i]


@njit(cache=True, fastmath=_FASTMATH)
def _one_path(tr, XT, logp0, half_sq, logbase, Q, Q2, dt, tau, n_tau, n_total, noise,
              record_every, snap_steps, W_tau, traces, ents, snaps):
    n, m = XT.shape
    w = np.zeros(n)
    logits = np.empty(m)
    p = np.empty(m)
    shifted = np.empty(m)
    bits = np.empty(m, dtype=np.int64)
    a = np.empty(n)
    drift = np.empty(n)
    kick = np.empty(n)
    js = 0
    nsnap = snap_steps.shape[0]
    sdt = math.sqrt(dt)
    if n_tau == 0:
        for j in range(n):
            W_tau[tr, j] = 0.0
    for k in range(n_total + 1):
        t = k * dt
        for i in range(m):
            logits[i] = logp0[i] - t * half_sq[i]
        for j in range(n):
            wj = w[j]
            for i in range(m):
                logits[i] += wj * XT[j, i]
        mx = -np.inf
        for i in range(m):
            mx = max(mx, logits[i])
        for i in range(m):
            shifted[i] = logits[i] - mx
        _exp_nonpositive(shifted, p, bits)
        z = 0.0
        for i in range(m):
            z += p[i]
        inv = 1.0 / z
        for i in range(m):
            p[i] *= inv
        for j in range(n):
            s = 0.0
            for i in range(m):
                s += p[i] * XT[j, i]
            a[j] = s

        if record_every > 0 and k % record_every == 0:
            lse = mx + math.log(z)
            tr_q = 0.0
            ent = 0.0
            for i in range(m):
                if p[i] > 0.0:
                    tr_q += 2.0 * p[i] * half_sq[i]
                    ent -= p[i] * (logits[i] - lse - logbase[i])
            for r in range(n):
                qa = 0.0
                for c in range(n):
                    qa += Q[r, c] * a[c]
                tr_q -= qa * qa
            traces[tr, k // record_every] = tr_q
            ents[tr, k // record_every] = ent
        while js < nsnap and snap_steps[js] == k:
            for j in range(n):
                snaps[tr, js, j] = w[j]
            js += 1
        if k == n_total:
            break

        for r in range(n):
            d = 0.0
            e = 0.0
            for c in range(n):
                d += Q2[r, c] * a[c]
                e += Q[r, c] * noise[tr, k, c]
            drift[r] = d
            kick[r] = e
        if k == n_tau - 1:
            h = tau - k * dt
            sh = math.sqrt(h)
            for j in range(n):
                W_tau[tr, j] = w[j] + drift[j] * h + sh * kick[j]
        for j in range(n):
            w[j] += drift[j] * dt + sdt * kick[j]


@njit(parallel=True, cache=True)
def _paths_numba(XT, logp0, half_sq, logbase, Q, Q2, dt, taus, n_tau, n_total, noise,
                 record_every, snap_steps, W_tau, traces, ents, snaps):
    for tr in prange(taus.shape[0]):
        _one_path(tr, XT, logp0, half_sq, logbase, Q, Q2, dt, taus[tr], n_tau[tr], n_total[tr],
                  noise, record_every, snap_steps, W_tau, traces, ents, snaps)


def _paths_numpy(X, logp0, half_sq, logbase, Q, Q2, dt, taus, n_tau, n_total, noise,
                 record_every, snap_steps, W_tau, traces, ents, snaps):
    T, n = taus.shape[0], X.shape[1]
    W = np.zeros((T, n))
    W_tau[n_tau == 0] = 0.0
    sdt = math.sqrt(dt)
    for k in range(int(n_total.max()) + 1):
        alive = k <= n_total
        logits = logp0[None, :] - (k * dt) * half_sq[None, :] + W @ X.T
        mx = logits.max(axis=1, keepdims=True)
        e = np.exp(logits - mx)
        z = e.sum(axis=1, keepdims=True)
        P = e / z
        A = P @ X
        if record_every > 0 and k % record_every == 0:
            lse = mx + np.log(z)
            with np.errstate(invalid="ignore"):
                logp = np.where(P > 0, logits - lse - logbase[None, :], 0.0)
            tq = 2.0 * P @ half_sq - np.sum((A @ Q.T) ** 2, axis=1)
            ent = -np.sum(P * logp, axis=1)
            traces[alive, k // record_every] = tq[alive]
            ents[alive, k // record_every] = ent[alive]
        for js in np.flatnonzero(snap_steps == k):
            snaps[alive, js] = W[alive]
        stepping = k < n_total
        if not stepping.any():
            break
        drift = A @ Q2.T
        kick = noise[:, k, :] @ Q.T
        cap = n_tau - 1 == k
        if cap.any():
            h = (taus[cap] - k * dt)[:, None]
            W_tau[cap] = W[cap] + drift[cap] * h + np.sqrt(h) * kick[cap]
        W[stepping] += drift[stepping] * dt + sdt * kick[stepping]


def simulate_paths(X, logp0, logbase, Q, dt, taus, n_tau, n_total, noise,
                   record_every=0, snap_steps=None, backend=None):
    """Euler-Maruyama on the tilt vector w for a batch of trials.

    Trial ``r`` runs ``n_total[r]`` steps; the state at its stopping time
    ``taus[r]`` (reached after ``n_tau[r]`` steps, the last one shortened) is
    returned as ``W_tau[r]``. Every ``record_every`` steps the trace
    Tr(Q A_t Q) and entropy of the current tilt are stored; ``snap_steps``
    lists step indices at which w is snapshotted. Unvisited cells are NaN.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    Q2 = np.ascontiguousarray(Q @ Q)
    Qx = X @ Q.T
    half_sq = 0.5 * np.einsum("ij,ij->i", Qx, Qx)
    taus = np.ascontiguousarray(taus, dtype=np.float64)
    n_tau = np.ascontiguousarray(n_tau, dtype=np.int64)
    n_total = np.ascontiguousarray(n_total, dtype=np.int64)
    snap_steps = np.ascontiguousarray(
        np.zeros(0, dtype=np.int64) if snap_steps is None else snap_steps, dtype=np.int64)
    T, n = taus.shape[0], X.shape[1]
    nrec = int(n_total.max()) // record_every + 1 if record_every > 0 else 0
    W_tau = np.full((T, n), np.nan)
    traces = np.full((T, nrec), np.nan)
    ents = np.full((T, nrec), np.nan)
    snaps = np.full((T, len(snap_steps), n), np.nan)
    if resolve_backend(backend) == "numba":
        impl, atoms = _paths_numba, np.ascontiguousarray(X.T)
    else:
        impl, atoms = _paths_numpy, X
    impl(atoms, np.ascontiguousarray(logp0, dtype=np.float64), half_sq,
         np.ascontiguousarray(logbase, dtype=np.float64), Q, Q2, float(dt), taus, n_tau, n_total,
         np.ascontiguousarray(noise, dtype=np.float64), int(record_every), snap_steps,
         W_tau, traces, ents, snaps)
    return W_tau, traces, ents, snaps


# ------------------------------------------------------- mean-field ascent

@njit(cache=True)
def _site_update(i, J, P, sq, h, q, means, qnew):
    a, k = P.shape
    n = J.shape[0]
    g = np.empty(k)
    for c in range(k):
        s = h[i, c]
        for j in range(n):
            if j != i:
                s += 2.0 * J[i, j] * means[j, c]
        g[c] = s
    scores = np.empty(a)
    mx = -np.inf
    for b in range(a):
        s = J[i, i] * sq[b]
        for c in range(k):
            s += P[b, c] * g[c]
        scores[b] = s
        if s > mx:
            mx = s
    z = 0.0
    for b in range(a):
        qnew[b] = math.exp(scores[b] - mx)
        z += qnew[b]
    old = 0.0
    new = 0.0
    for b in range(a):
        qnew[b] /= z
        if q[i, b] > 0.0:
            old += q[i, b] * (scores[b] - math.log(q[i, b]))
        if qnew[b] > 0.0:
            new += qnew[b] * (scores[b] - math.log(qnew[b]))
    return new - old


@njit(cache=True)
def _ascent_numba(J, P, h, q, tol, max_iters, deltas):
    n = J.shape[0]
    a, k = P.shape
    sq = np.empty(a)
    for b in range(a):
        s = 0.0
        for c in range(k):
            s += P[b, c] * P[b, c]
        sq[b] = s
    means = q @ P
    qnew = np.empty(a)
    min_delta = np.inf
    record = deltas.shape[0]
    pos = 0
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        change = 0.0
        for i in range(n):
            d = _site_update(i, J, P, sq, h, q, means, qnew)
            if d < min_delta:
                min_delta = d
            if pos < record:
                deltas[pos] = d
                pos += 1
            for b in range(a):
                diff = abs(qnew[b] - q[i, b])
                if diff > change:
                    change = diff
                q[i, b] = qnew[b]
            for c in range(k):
                s = 0.0
                for b in range(a):
                    s += q[i, b] * P[b, c]
                means[i, c] = s
        if change < tol:
            converged = True
            break
    return it, converged, min_delta


def _ascent_numpy(J, P, h, q, tol, max_iters, deltas):
    n = J.shape[0]
    sq = np.einsum("bc,bc->b", P, P)
    means = q @ P
    offdiag = J - np.diag(np.diag(J))
    min_delta = np.inf
    pos = 0
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        change = 0.0
        for i in range(n):
            g = h[i] + 2.0 * offdiag[i] @ means
            scores = P @ g + J[i, i] * sq
            e = np.exp(scores - scores.max())
            qn = e / e.sum()
            with np.errstate(divide="ignore", invalid="ignore"):
                old = np.sum(np.where(q[i] > 0, q[i] * (scores - np.log(q[i])), 0.0))
                new = np.sum(np.where(qn > 0, qn * (scores - np.log(qn)), 0.0))
            d = new - old
            min_delta = min(min_delta, d)
            if pos < len(deltas):
                deltas[pos] = d
                pos += 1
            change = max(change, float(np.max(np.abs(qn - q[i]))))
            q[i] = qn
            means[i] = qn @ P
        if change < tol:
            converged = True
            break
    return it, converged, min_delta


def mf_coordinate_ascent(J, P, h, q0, tol, max_iters, record=0, backend=None):
    """Sequential single-site maximization of the product-measure objective.

    ``q0`` is an (n, a) array of per-site distributions over the alphabet
    rows of ``P``. Returns ``(q, iterations, converged, min_delta, deltas)``
    where ``deltas`` holds the objective change of the first ``record``
    single-site updates.
    """
    q = np.array(q0, dtype=np.float64, order="C")
    deltas = np.full(int(record), np.nan)
    impl = _ascent_numba if resolve_backend(backend) == "numba" else _ascent_numpy
    it, conv, min_delta = impl(np.ascontiguousarray(J, dtype=np.float64),
                               np.ascontiguousarray(P, dtype=np.float64),
                               np.ascontiguousarray(h, dtype=np.float64),
                               q, float(tol), int(max_iters), deltas)
    return q, int(it), bool(conv), float(min_delta), deltas
