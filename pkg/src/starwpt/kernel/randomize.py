"""Gaussian randomization: rank-1 recovery from a lifted SDP solution."""

import numpy as np

from .eig import jacobi_eigh


def gaussian_randomize(X, candidates, projector, score, rng):
    """Draw ``candidates`` vectors xi ~ CN(0, X), project each to the
    feasible set, return the best-scoring one.

    Negative eigenvalues from solver roundoff are clipped at zero.
    """
    if candidates < 1:
        raise ValueError("candidates must be >= 1")
    w, V = jacobi_eigh(X)
    w = np.clip(w, 0.0, None)
    F = V * np.sqrt(w)
    n = X.shape[0]
    # leading eigenvector first, then random draws
    cands = [V[:, int(np.argmax(w))]]
    for _ in range(candidates):
        zeta = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) \
            / np.sqrt(2.0)
        cands.append(F @ zeta)
    best_vec, best_score = None, -np.inf
    for xi in cands:
        cand = projector(xi)
        s = score(cand)
        if s > best_score:
            best_score, best_vec = s, cand
    return best_vec
