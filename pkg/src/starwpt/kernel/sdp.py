"""Dense primal-dual interior-point solver for small block SDPs.

Problem form (complex interface):

    maximize    sum_b  Tr(C_b X_b)
    subject to  sum_b  Tr(A_{i,b} X_b)  =  b_i      (equalities)
                sum_b  Tr(A_{i,b} X_b)  <= b_i      (inequalities)
                X_b Hermitian PSD

All matrices Hermitian.  Internally each complex n x n block is embedded
as a real symmetric 2n x 2n block (T(H) = [[Re,-Im],[Im,Re]]); the
real-embedded iterate is projected back to the structured (complex
Hermitian) subspace on exit, which preserves PSD-ness, all constraint
values and the objective.  Inequalities get 1x1 slack blocks.  The
search direction is the HKM direction with a Mehrotra
predictor-corrector; the Schur complement is formed densely, which is
the right trade at block sizes <= 2*max(N, M).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular


class SdpError(RuntimeError):
    pass


class SdpInfeasibleError(SdpError):
    pass


class SdpUnboundedError(SdpError):
    pass


class SdpNoConvergence(SdpError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass
class SdpProblem:
    block_dims: dict                  # name -> complex dimension
    objective: dict                   # name -> Hermitian C_b (missing = 0)
    eq: list = field(default_factory=list)    # (coeffs: name->A, rhs)
    ineq: list = field(default_factory=list)  # (coeffs: name->A, rhs)

    def add_eq(self, coeffs, rhs):
        self.eq.append((coeffs, float(rhs)))

    def add_ineq(self, coeffs, rhs):
        self.ineq.append((coeffs, float(rhs)))


@dataclass
class SdpSolution:
    blocks: dict
    objective: float
    dual_objective: float
    gap: float
    max_residual: float
    iterations: int


def _embed(H, n):
    """Hermitian n x n -> real symmetric 2n x 2n."""
    H = np.asarray(H, dtype=complex)
    out = np.empty((2 * n, 2 * n))
    out[:n, :n] = H.real
    out[n:, n:] = H.real
    out[:n, n:] = -H.imag
    out[n:, :n] = H.imag
    return 0.5 * (out + out.T)


def _recover(Xr, n):
    """Project real 2n x 2n back to Hermitian n x n (and halve the doubling)."""
    A = Xr[:n, :n]
    D = Xr[n:, n:]
    B = Xr[n:, :n]
    Ct = Xr[:n, n:]
    H = 0.5 * (A + D) + 0.5j * (B - Ct)
    return 0.5 * (H + H.conj().T)


def _min_eig_step(L, dX):
    """Largest alpha with X + alpha dX psd, X = L L^T."""
    W = solve_triangular(L, dX, lower=True)
    W = solve_triangular(L, W.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (W + W.T))[0]
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


class _Block:
    __slots__ = ("dim", "X", "Z", "Zi", "Lx")


def solve_sdp(problem, tol=1e-8, max_iter=100, trace=None):
    """Solve; returns SdpSolution on the complex interface.

    trace: optional list; per-iteration dicts (mu, gap, residuals) appended.
    """
    names = list(problem.block_dims)
    cdims = [problem.block_dims[n] for n in names]
    # embedded (real) dimensions; slack blocks for inequalities are real 1x1
    m_eq = len(problem.eq)
    m_in = len(problem.ineq)
    m = m_eq + m_in

    rdims = [2 * d for d in cdims] + [1] * m_in
    nb = len(rdims)
    ntot = sum(rdims)

    # maximize <C,X>  ->  min <-C,X>; embedded objective halved on report
    C = []
    for i, nm in enumerate(names):
        Cb = problem.objective.get(nm)
        C.append(-_embed(Cb, cdims[i]) if Cb is not None
                 else np.zeros((rdims[i], rdims[i])))
    C.extend(np.zeros((1, 1)) for _ in range(m_in))

    # constraint matrices; embedded trace doubles, so rhs doubles too;
    # slack entries stay 1 against doubled rhs, harmless (pure scaling of y)
    A = [[None] * nb for _ in range(m)]
    b = np.empty(m)
    rows = list(problem.eq) + list(problem.ineq)
    for i, (coeffs, rhs) in enumerate(rows):
        b[i] = 2.0 * rhs
        for j, nm in enumerate(names):
            if nm in coeffs:
                A[i][j] = _embed(coeffs[nm], cdims[j])
        if i >= m_eq:
            A[i][len(cdims) + (i - m_eq)] = np.array([[2.0]])

    # drop identically-zero rows (0 = 0 is fine, 0 = b is infeasible)
    keep = []
    for i in range(m):
        if any(Aij is not None and np.abs(Aij).max() > 0 for Aij in A[i]):
            keep.append(i)
        elif abs(b[i]) > tol:
            raise SdpInfeasibleError("constraint with zero matrix, nonzero rhs")
    A = [A[i] for i in keep]
    b = b[keep]
    m = len(keep)

    # equilibrate: unit-norm constraint rows, unit-norm objective;
    # row scale from the structural blocks only, never the slack entry
    nstruct = len(cdims)
    for i in range(m):
        s = max((np.linalg.norm(A[i][j]) for j in range(nstruct)
                 if A[i][j] is not None), default=1.0)
        for j in range(nstruct):
            if A[i][j] is not None:
                A[i][j] = A[i][j] / s
        b[i] /= s
    obj_scale = max((np.linalg.norm(Cb) for Cb in C
                     if np.linalg.norm(Cb) > 0), default=1.0)
    C = [Cb / obj_scale for Cb in C]

    bscale = 1.0 + np.abs(b).max() if m else 1.0
    cscale = 1.0 + max((np.linalg.norm(Cb) for Cb in C), default=0.0)

    blocks = []
    for d in rdims:
        blk = _Block()
        blk.dim = d
        blk.X = np.eye(d) * max(1.0, np.sqrt(bscale))
        blk.Z = np.eye(d) * max(1.0, cscale / max(1, np.sqrt(ntot)))
        blocks.append(blk)
    y = np.zeros(m)

    def op_A(Xs):
        out = np.empty(m)
        for i in range(m):
            s = 0.0
            for j in range(nb):
                if A[i][j] is not None:
                    s += np.tensordot(A[i][j], Xs[j])
            out[i] = s
        return out

    def op_At(yv):
        out = [np.zeros((d, d)) for d in rdims]
        for i in range(m):
            if yv[i] == 0.0:
                continue
            for j in range(nb):
                if A[i][j] is not None:
                    out[j] += yv[i] * A[i][j]
        return out

    # best-so-far iterate by worst relative residual; a stalled run that
    # got close enough (accept_tol) is returned rather than rejected
    accept_tol = max(1e-6, 100.0 * tol)
    best_metric = np.inf
    best_state = None
    stall = 0

    def settle(reason):
        if best_state is not None and best_metric <= accept_tol:
            Xs_b, y_b, it_b = best_state
            for j in range(nb):
                blocks[j].X = Xs_b[j]
            return _package(problem, names, cdims, blocks, y_b, b,
                            obj_scale, it_b)
        raise SdpNoConvergence(reason, best=best_state)

    it = 0
    for it in range(1, max_iter + 1):
        Xs = [blk.X for blk in blocks]
        mu = sum(np.tensordot(blk.X, blk.Z) for blk in blocks) / ntot
        r_p = b - op_A(Xs)
        Aty = op_At(y)
        R_d = [C[j] - Aty[j] - blocks[j].Z for j in range(nb)]

        pobj = sum(np.tensordot(C[j], blocks[j].X) for j in range(nb))
        dobj = float(b @ y)
        rel_p = np.abs(r_p).max() / bscale if m else 0.0
        rel_d = max(np.abs(R_d[j]).max() for j in range(nb)) / cscale
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if trace is not None:
            trace.append(dict(iteration=it, mu=mu, rel_p=rel_p,
                              rel_d=rel_d, relgap=relgap))
        metric = max(rel_p, rel_d, relgap)
        if metric < 0.9 * best_metric:
            best_metric = metric
            best_state = ([blk.X.copy() for blk in blocks], y.copy(), it)
            stall = 0
        else:
            stall += 1
        if rel_p <= tol and rel_d <= tol and relgap <= tol:
            break
        if stall >= 8:
            return settle("progress stalled")

        # divergence heuristics
        ynorm = np.abs(y).max() if m else 0.0
        if ynorm > 1e9 * bscale * cscale and rel_d <= 1e-6:
            raise SdpInfeasibleError("dual iterate diverging: primal infeasible")
        if abs(pobj) > 1e10 * bscale * cscale and rel_p <= 1e-6:
            raise SdpUnboundedError("primal objective diverging: unbounded")

        try:
            for blk in blocks:
                blk.Lx = np.linalg.cholesky(blk.X)
                Lz = np.linalg.cholesky(blk.Z)
                Zi_half = solve_triangular(Lz, np.eye(blk.dim), lower=True)
                blk.Zi = Zi_half.T @ Zi_half
        except np.linalg.LinAlgError:
            return settle("iterate left the cone")

        # Schur complement M_ij = sum_b Tr(A_i Zi A_j X)
        ZAX = [[None] * nb for _ in range(m)]
        for i in range(m):
            for j in range(nb):
                if A[i][j] is not None:
                    ZAX[i][j] = blocks[j].Zi @ A[i][j] @ blocks[j].X
        Mmat = np.zeros((m, m))
        for i in range(m):
            for l in range(i, m):
                s = 0.0
                for j in range(nb):
                    if A[i][j] is not None and ZAX[l][j] is not None:
                        s += np.tensordot(A[i][j].T, ZAX[l][j])
                Mmat[i, l] = s
                Mmat[l, i] = s
        Mmat[np.diag_indices_from(Mmat)] += 1e-13 * (1.0 + Mmat.diagonal().max())
        try:
            Mfac = cho_factor(Mmat)
        except np.linalg.LinAlgError:
            return settle("singular Schur complement")

        def direction(sigma_mu, corr=None):
            rhs = np.empty(m)
            for i in range(m):
                s = r_p[i]
                for j in range(nb):
                    if A[i][j] is not None:
                        blk = blocks[j]
                        Wj = sigma_mu * blk.Zi - blk.X - blk.Zi @ R_d[j] @ blk.X
                        if corr is not None:
                            Wj = Wj - blk.Zi @ corr[j]
                        s -= np.tensordot(A[i][j], Wj)
                rhs[i] = s
            dy = cho_solve(Mfac, rhs) if m else rhs
            Aty_dy = op_At(dy)
            dZ = [R_d[j] - Aty_dy[j] for j in range(nb)]
            dX = []
            for j in range(nb):
                blk = blocks[j]
                W = sigma_mu * blk.Zi - blk.X - blk.Zi @ dZ[j] @ blk.X
                if corr is not None:
                    W = W - blk.Zi @ corr[j]
                dX.append(0.5 * (W + W.T))
            return dX, dy, dZ

        def steplen(dX, dZ):
            ap = ad = 1.0
            for j in range(nb):
                blk = blocks[j]
                ap = min(ap, 0.98 * _min_eig_step(blk.Lx, dX[j]))
                Lz = np.linalg.cholesky(blk.Z)
                ad = min(ad, 0.98 * _min_eig_step(Lz, dZ[j]))
            return ap, ad

        dXa, dya, dZa = direction(0.0)
        ap, ad = steplen(dXa, dZa)
        mu_aff = sum(np.tensordot(blocks[j].X + ap * dXa[j],
                                  blocks[j].Z + ad * dZa[j])
                     for j in range(nb)) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu)) ** 3)
        corr = [dZa[j] @ dXa[j] for j in range(nb)]
        dX, dy, dZ = direction(sigma * mu, corr=corr)
        ap, ad = steplen(dX, dZ)

        for j in range(nb):
            blocks[j].X = blocks[j].X + ap * dX[j]
            blocks[j].X = 0.5 * (blocks[j].X + blocks[j].X.T)
            blocks[j].Z = blocks[j].Z + ad * dZ[j]
            blocks[j].Z = 0.5 * (blocks[j].Z + blocks[j].Z.T)
        y = y + ad * dy
    else:
        return settle(f"no convergence in {max_iter} iterations")

    return _package(problem, names, cdims, blocks, y, b, obj_scale, it)


def _package(problem, names, cdims, blocks, y, b, obj_scale, iters):
    out = {}
    for j, nm in enumerate(names):
        out[nm] = _recover(blocks[j].X, cdims[j])
    obj = 0.0
    for nm, Cb in problem.objective.items():
        if Cb is not None:
            obj += float(np.real(np.trace(np.asarray(Cb) @ out[nm])))
    # min-form dual of the negated, rescaled objective
    dobj = float(b @ y) * -0.5 * obj_scale
    resid = 0.0
    for coeffs, rhs in problem.eq:
        v = sum(float(np.real(np.trace(np.asarray(Ab) @ out[nm])))
                for nm, Ab in coeffs.items())
        resid = max(resid, abs(v - rhs))
    for coeffs, rhs in problem.ineq:
        v = sum(float(np.real(np.trace(np.asarray(Ab) @ out[nm])))
                for nm, Ab in coeffs.items())
        resid = max(resid, max(0.0, v - rhs))
    return SdpSolution(blocks=out, objective=obj, dual_objective=dobj,
                       gap=abs(dobj - obj), max_residual=resid,
                       iterations=iters)
