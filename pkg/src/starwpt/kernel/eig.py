"""Cyclic Jacobi eigendecomposition for dense Hermitian matrices.

Chosen over power iteration because the LoS-dominant channel matrices here
have nearly degenerate spectra.  The compiled extension and the python
implementation run the same rotation sequence; results agree to roundoff.
"""

import numpy as np


class NonHermitianError(ValueError):
    pass


def _check_hermitian(H):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NonHermitianError(f"expected square matrix, got {H.shape}")
    scale = np.linalg.norm(H)
    if scale > 0 and np.linalg.norm(H - H.conj().T) > 1e-10 * scale:
        raise NonHermitianError("matrix is not Hermitian within 1e-10")
    return 0.5 * (H + H.conj().T)


def _jacobi_python(A, tol, max_sweeps):
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.linalg.norm(A) ** 2
                          - np.sum(np.abs(np.diag(A)) ** 2), 0.0))
        if off <= tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = A[p, q]
                ab = abs(b)
                if ab <= 1e-300:
                    continue
                # unitary 2x2 rotation zeroing the (p,q) entry; the phase of
                # b reduces the problem to a real Jacobi rotation on |b|
                tau = (A[q, q].real - A[p, p].real) / (2.0 * ab)
                if tau == 0.0:
                    t = 1.0
                elif abs(tau) > 1e150:     # tau*tau would overflow
                    t = 0.5 / tau
                else:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = (t * c) * (b / ab)
                # columns: B = A J with J = [[c, s],[-conj(s), c]] on (p,q)
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - np.conj(s) * Aq
                A[:, q] = s * Ap + c * Aq
                # rows: A' = J^H B
                Bp = A[p, :].copy()
                Bq = A[q, :].copy()
                A[p, :] = c * Bp - s * Bq
                A[q, :] = np.conj(s) * Bp + c * Bq
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                Vp = V[:, p].copy()
                Vq = V[:, q].copy()
                V[:, p] = c * Vp - np.conj(s) * Vq
                V[:, q] = s * Vp + c * Vq
    return np.real(np.diag(A)), V


def jacobi_eigh(H, tol=1e-13, max_sweeps=60):
    """Full eigendecomposition, eigenvalues ascending. Returns (w, V)."""
    from . import _jacobi_ext
    A = _check_hermitian(H).astype(complex, copy=True)
    if _jacobi_ext is not None:
        w, V = _jacobi_ext.jacobi(A, tol, max_sweeps)
    else:
        w, V = _jacobi_python(A, tol, max_sweeps)
    order = np.argsort(w)
    return w[order], V[:, order]


def hermitian_eig(H, tol=1e-13):
    return jacobi_eigh(H, tol=tol)


def hermitian_eig_max(H):
    """Largest eigenpair (lambda, unit vector)."""
    w, V = jacobi_eigh(H)
    u = V[:, -1]
    return float(w[-1]), u / np.linalg.norm(u)
