"""Small dense numerical kernel: Hermitian eigensolver (compiled core with
pure-python fallback), block SDP interior-point solver, Gaussian
randomization, monotone 1-D search and bisection."""

import os

if os.environ.get("STARWPT_NO_EXT"):
    _jacobi_ext = None
else:
    try:
        from . import _jacobi as _jacobi_ext
    except ImportError:
        _jacobi_ext = None

HAVE_EXT = _jacobi_ext is not None

from .eig import hermitian_eig, hermitian_eig_max, NonHermitianError
from .sdp import (SdpProblem, SdpSolution, solve_sdp, SdpError,
                  SdpInfeasibleError, SdpUnboundedError, SdpNoConvergence)
from .linsolve import solve_dense_linear, SingularMatrixError
from .randomize import gaussian_randomize
from .search import one_dim_search, scan_grid, bisect_monotone, SearchInfeasible
