"""Interaction matrices for the Curie-Weiss, torus heat-kernel and expander examples."""
from collections import Counter

import numpy as np

from .models import ModelError, SpinModel
from .spectral import sym_eig

MATRIX_CAP = 2000


def gen_curie_weiss(n, beta):
    """J_ij = beta/n for every i, j (diagonal included, so J has rank one)."""
    if n < 1:
        raise ModelError("n must be at least 1")
    J = np.full((n, n), beta / n)
    return SpinModel.ising(J, metadata={"generator": "curie-weiss", "n": int(n), "beta": float(beta)})


def torus_step_kernel(k, d):
    """Transition matrix of the walk moving every coordinate by +-1 mod k."""
    C = np.zeros((k, k))
    for x in range(k):
        C[x, (x + 1) % k] += 0.5
        C[x, (x - 1) % k] += 0.5
    L = np.ones((1, 1))
    for _ in range(d):
        L = np.kron(L, C)
    return L


def gen_torus_heat_kernel(k, d, alpha, beta, cap=MATRIX_CAP):
    """J = beta L^(alpha k) on the torus (Z/kZ)^d; alpha k must be a positive integer."""
    if k < 3 or d < 1:
        raise ModelError("torus needs k >= 3 and d >= 1")
    steps = alpha * k
    if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
        raise ModelError(f"alpha * k = {steps!r} must be a positive integer")
    steps = int(round(steps))
    size = k ** d
    if size > cap:
        raise ModelError(f"torus has {size} sites, exceeding the cap of {cap}")
    L = torus_step_kernel(k, d)
    J = beta * np.linalg.matrix_power(L, steps)
    J = 0.5 * (J + J.T)
    meta = {"generator": "torus", "k": int(k), "d": int(d), "alpha": float(alpha),
            "beta": float(beta), "steps": steps}
    return SpinModel.ising(J, metadata=meta)


def _configuration_pairing(n, d, rng):
    stubs = np.repeat(np.arange(n), d)
    rng.shuffle(stubs)
    return stubs.reshape(-1, 2)


def _is_simple(edges):
    if np.any(edges[:, 0] == edges[:, 1]):
        return False
    key = np.sort(edges, axis=1)
    return len(np.unique(key, axis=0)) == len(key)


def _edge_key(u, v):
    return (u, v) if u < v else (v, u)


def _repair(edges, rng, max_rounds=100_000):
    """Remove self-loops and multi-edges by degree-preserving double swaps."""
    edges = [tuple(e) for e in edges.tolist()]
    counts = Counter(_edge_key(*e) for e in edges)
    for _ in range(max_rounds):
        bad = [i for i, (u, v) in enumerate(edges) if u == v or counts[_edge_key(u, v)] > 1]
        if not bad:
            return np.array(edges)
        i = bad[0]
        j = int(rng.integers(len(edges)))
        (a, b), (c, e) = edges[i], edges[j]
        if rng.random() < 0.5:
            c, e = e, c
        new1, new2 = _edge_key(a, c), _edge_key(b, e)
        if a == c or b == e or new1 == new2 or counts[new1] or counts[new2]:
            continue
        for old in (edges[i], edges[j]):
            counts[_edge_key(*old)] -= 1
        edges[i], edges[j] = (a, c), (b, e)
        counts[new1] += 1
        counts[new2] += 1
    raise ModelError("could not repair the pairing into a simple graph")


def random_regular_graph(n, d, seed, retries=200):
    """Adjacency matrix of a random simple d-regular graph (configuration model)."""
    if (n * d) % 2 or not (0 <= d < n):
        raise ModelError("need n*d even and 0 <= d < n")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    edges = None
    for _ in range(retries):
        edges = _configuration_pairing(n, d, rng)
        if _is_simple(edges):
            break
    else:
        edges = _repair(edges, rng)
    A = np.zeros((n, n))
    A[edges[:, 0], edges[:, 1]] = 1.0
    A[edges[:, 1], edges[:, 0]] = 1.0
    if not np.all(A.sum(axis=1) == d):
        raise ModelError("regular graph construction failed")
    return A


def gen_expander(n, d, beta, seed):
    """J = (beta/d) A_G for a random d-regular G; metadata carries the measured lambda_2."""
    A = random_regular_graph(n, d, seed)
    lam = sym_eig(A).eigenvalues
    second = float(max(abs(lam[1]), abs(lam[-1]))) if n > 1 else 0.0
    meta = {"generator": "expander", "n": int(n), "d": int(d), "beta": float(beta),
            "seed": int(seed), "lambda2_abs": second,
            "ramanujan_reference": float(2 * np.sqrt(max(d - 1, 0)) + 1)}
    return SpinModel.ising((beta / d) * A, metadata=meta)


def random_ising(n, rng, coupling=None, field=0.5):
    """Symmetric J with entries uniform in [-c, c] (c = 1/n by default), h uniform in [-field, field]."""
    c = 1.0 / n if coupling is None else coupling
    U = rng.uniform(-c, c, size=(n, n))
    J = np.triu(U) + np.triu(U, 1).T
    h = rng.uniform(-field, field, size=n)
    return SpinModel.ising(J, h, metadata={"generator": "random-ising", "n": int(n)})


def random_potts(n, k, rng, coupling=None, field=0.5):
    c = 1.0 / n if coupling is None else coupling
    U = rng.uniform(-c, c, size=(n, n))
    J = np.triu(U) + np.triu(U, 1).T
    h = rng.uniform(-field, field, size=(n, k))
    return SpinModel.potts(J, k, h, metadata={"generator": "random-potts", "n": int(n), "k": int(k)})
