# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic Jacobi sweeps for Hermitian matrices.

Same rotation sequence as the python fallback in eig.py; kept loop-level
so the whole sweep stays in C for the small (N <= 64) matrices this
package produces.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def jacobi(cnp.ndarray[cnp.complex128_t, ndim=2] A, double tol, int max_sweeps):
    cdef int n = A.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] V = np.eye(n, dtype=complex)
    cdef int sweep, p, q, i
    cdef double ab, tau, t, c, fro, off, diag2
    cdef double complex b, s, sc, xp, xq

    fro = 0.0
    for p in range(n):
        for q in range(n):
            fro += A[p, q].real * A[p, q].real + A[p, q].imag * A[p, q].imag
    fro = sqrt(fro)
    if fro == 0.0:
        return np.zeros(n), V

    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p, q].real * A[p, q].real + A[p, q].imag * A[p, q].imag
        if sqrt(off) <= tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = A[p, q]
                ab = sqrt(b.real * b.real + b.imag * b.imag)
                if ab <= 1e-300:
                    continue
                tau = (A[q, q].real - A[p, p].real) / (2.0 * ab)
                if tau != 0.0:
                    t = (1.0 if tau > 0 else -1.0) / (fabs(tau) + sqrt(1.0 + tau * tau))
                else:
                    t = 1.0
                c = 1.0 / sqrt(1.0 + t * t)
                s = (t * c) * (b / ab)
                sc = s.real - 1j * s.imag
                for i in range(n):
                    xp = A[i, p]
                    xq = A[i, q]
                    A[i, p] = c * xp - sc * xq
                    A[i, q] = s * xp + c * xq
                for i in range(n):
                    xp = A[p, i]
                    xq = A[q, i]
                    A[p, i] = c * xp - s * xq
                    A[q, i] = sc * xp + c * xq
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                for i in range(n):
                    xp = V[i, p]
                    xq = V[i, q]
                    V[i, p] = c * xp - sc * xq
                    V[i, q] = s * xp + c * xq
    w = np.real(np.diag(np.asarray(A)))
    return w, np.asarray(V)
