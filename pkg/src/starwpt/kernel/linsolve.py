"""Dense linear solve with an explicit residual guarantee."""

import warnings

import numpy as np
import scipy.linalg


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def solve_dense_linear(A, b):
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SingularMatrixError(f"expected square matrix, got {A.shape}")
    try:
        # conditioning warnings are redundant with the residual check below
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            x = scipy.linalg.solve(A, b)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrixError(str(exc)) from exc
    resid = np.linalg.norm(A @ x - b)
    bound = 1e-10 * (np.linalg.norm(A) * np.linalg.norm(x) + np.linalg.norm(b))
    if not np.isfinite(resid) or resid > bound:
        raise SingularMatrixError(
            f"residual {resid:.3e} exceeds bound {bound:.3e}")
    return x
