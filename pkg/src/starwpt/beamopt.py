"""Alternating (BCD) optimization of STAR-RIS phase profiles and AP
beamformers for the three phases of a round: energy transfer, uplink,
downlink.

Each subproblem is a lifted SDP: phase vectors phi -> Phi = phi phi^H
with the rank-1 constraint dropped, beamformer columns v_k -> V_k.
The two blocks are alternated until the tracked objective stops
improving, keeping the lifted matrices throughout; Gaussian
randomization recovers vectors only after the loop ends.  The best
iterate is retained, so the accepted-objective sequence is
non-decreasing by construction.

Modes: ES (per-element amplitude split between surface sides), TS
(per-side unit-modulus profiles used in disjoint slots), CONV (fixed
split surface: first ceil(N/2) elements reflect-only, rest
transmit-only).
"""

from dataclasses import dataclass

import numpy as np

from .kernel import (SdpProblem, SdpError, solve_sdp, hermitian_eig_max,
                     gaussian_randomize)
from .kernel.eig import jacobi_eigh


@dataclass
class PhaseProfile:
    mode: str               # ES | TS | CONV
    phi_t: np.ndarray
    phi_r: np.ndarray

    def phi(self, side):
        return self.phi_t if side == "t" else self.phi_r


@dataclass
class GainSummary:
    """Post-randomization effective gains feeding resource allocation."""
    uplink_mode: str
    downlink_mode: str
    groups: np.ndarray
    z_e: np.ndarray
    z_u: np.ndarray
    cross_u: np.ndarray      # |h_{u,m} v_{u,k}|^2
    noise_v: np.ndarray      # noise_power * ||v_{u,k}||^2
    sigma_d2: np.ndarray
    z_d: np.ndarray
    z_worst: float = None    # ES downlink: min_k z_dk / sigma_k^2
    z_worst_t: float = None
    z_worst_r: float = None


class BcdTrace(list):
    """Rows of (iteration, objective) accepted by the BCD loop."""


# -- lifted-form builders ----------------------------------------------------

def cascade(g, G):
    """W = diag(g) G, the per-user cascaded channel (N x M)."""
    return g[:, None] * G


def lambda_lifted(W, V):
    """Lambda = W V W^H for lifted beamformer V (or v v^H)."""
    return W @ V @ W.conj().T


def gamma_lifted(W, Phi):
    """Gamma = W^H Phi W for lifted profile Phi."""
    return W.conj().T @ Phi @ W


def build_lambda(channels, beam, phase, k, side):
    v = beam[phase][:, k]
    W = cascade(channels.g_side(phase, side)[k], channels.G[phase])
    u = W @ v
    return np.outer(u, u.conj())


def build_gamma(channels, profile, phase, k, side):
    phi = profile[phase].phi(side)
    W = cascade(channels.g_side(phase, side)[k], channels.G[phase])
    w = W.conj().T @ phi
    return np.outer(w, w.conj())


# -- structural helpers ------------------------------------------------------

def conv_masks(N):
    """Reflect-only on the first ceil(N/2) elements, transmit-only after."""
    n_r = -(-N // 2)
    mask_r = np.zeros(N, dtype=bool)
    mask_r[:n_r] = True
    return ~mask_r, mask_r


def _diag_unit(prob, name, dim):
    for n in range(dim):
        E = np.zeros((dim, dim))
        E[n, n] = 1.0
        prob.add_eq({name: E}, 1.0)


def _diag_coupled(prob, dim):
    for n in range(dim):
        E = np.zeros((dim, dim))
        E[n, n] = 1.0
        prob.add_eq({"Pt": E, "Pr": E}, 1.0)


def _profile_blocks(prob_dims, mode, N):
    """Declare phase blocks; CONV uses reduced blocks on active elements."""
    if mode == "CONV":
        mt, mr = conv_masks(N)
        prob_dims["Pt"] = int(mt.sum())
        prob_dims["Pr"] = int(mr.sum())
        return mt, mr
    prob_dims["Pt"] = N
    prob_dims["Pr"] = N
    return np.ones(N, dtype=bool), np.ones(N, dtype=bool)


def _expand(phi_active, mask):
    out = np.zeros(len(mask), dtype=complex)
    out[mask] = phi_active
    return out


# -- generic BCD loop --------------------------------------------------------

def _bcd(step, objective, config, trace=None):
    """Alternate `step()` until `objective()` stops improving.

    Keeps the best state; a decrease terminates the loop (previous best
    stands).  Returns the number of accepted iterations.
    """
    best = -np.inf
    best_state = None
    iters = 0
    for it in range(1, config.bcd_max_iter + 1):
        state = step()
        obj = objective()
        if obj < best * (1.0 + 1e-12) and it > 1:
            break
        improved = obj - best
        best, best_state = obj, state
        iters = it
        if trace is not None:
            trace.append((it, obj))
        if it > 1 and improved < config.eps * max(abs(best), 1e-300):
            break
    return best, best_state, iters


# -- phase-step SDPs ---------------------------------------------------------

def _solve_fair(prob, gains, weights, ref, sdp_tol):
    """Weighted max-min step: equalized form first, epigraph fallback.

    gains: user -> linear gain expression (block name -> Hermitian).
    The primary form maximizes the ref user's gain with the others
    pinned at their weight ratio; it keeps the iterate on a low-rank
    face, which the rank-1 recovery likes.  On degenerate draws (few
    active elements, near-collinear channels) exact equalization has no
    solution and the solver diverges; the fallback solves the same
    max-min with an explicit level variable, which is always feasible.
    """
    p = SdpProblem(prob.block_dims, dict(gains[ref]),
                   eq=list(prob.eq), ineq=list(prob.ineq))
    for i, G in gains.items():
        if i == ref:
            continue
        coeffs = dict(G)
        for k, v in gains[ref].items():
            coeffs[k] = coeffs.get(k, 0) - weights[i] * np.asarray(v)
        p.add_eq(coeffs, 0.0)
    try:
        return solve_sdp(p, tol=sdp_tol)
    except SdpError:
        pass
    p = SdpProblem({**prob.block_dims, "t": 1}, {"t": np.eye(1)},
                   eq=list(prob.eq), ineq=list(prob.ineq))
    for i, G in gains.items():
        coeffs = {k: -np.asarray(v) for k, v in G.items()}
        coeffs["t"] = weights[i] * np.eye(1)
        p.add_ineq(coeffs, 0.0)
    return solve_sdp(p, tol=sdp_tol)


def _phase_sdp_sum(lams, beta, groups, users, mode, N, ref, sdp_tol):
    """Maximize ref user's lifted gain under coupling + fairness.

    lams: per user, dict side -> Lambda (active side only), already
    restricted to active elements for CONV.
    """
    prob = SdpProblem({}, {})
    mt, mr = _profile_blocks(prob.block_dims, mode, N)
    blk = {"t": "Pt", "r": "Pr"}
    if mode == "ES":
        _diag_coupled(prob, N)
    else:
        _diag_unit(prob, "Pt", prob.block_dims["Pt"])
        _diag_unit(prob, "Pr", prob.block_dims["Pr"])
    gains = {}
    weights = {}
    for i in users:
        coeffs = {}
        for s, L in lams[i].items():
            coeffs[blk[s]] = coeffs.get(blk[s], 0) + L
        gains[i] = coeffs
        weights[i] = 1.0 if i == ref else beta[i, ref]
    sol = _solve_fair(prob, gains, weights, ref, sdp_tol)
    return sol.blocks["Pt"], sol.blocks["Pr"], mt, mr


def _phase_sdp_sum_single(lam_by_user, beta, users, N, ref, sdp_tol,
                          block="P"):
    """Single-side TS phase SDP: unit diagonal, fairness within group."""
    prob = SdpProblem({block: N}, {})
    _diag_unit(prob, block, N)
    gains = {i: {block: lam_by_user[i]} for i in users}
    weights = {i: 1.0 if i == ref else beta[i, ref] for i in users}
    sol = _solve_fair(prob, gains, weights, ref, sdp_tol)
    return sol.blocks[block]


# -- beam-step SDPs ----------------------------------------------------------

def _beam_sdp_sum(gammas, beta, users, M, ref, budget, sdp_tol):
    """Maximize total lifted gain, trace budget, fairness against ref."""
    prob = SdpProblem({f"V{k}": M for k in users}, {})
    prob.add_ineq({f"V{k}": np.eye(M) for k in users}, budget)
    gains = {i: {f"V{i}": gammas[i]} for i in users}
    weights = {i: 1.0 if i == ref else beta[i, ref] for i in users}
    sol = _solve_fair(prob, gains, weights, ref, sdp_tol)
    return {k: sol.blocks[f"V{k}"] for k in users}


# -- randomization -----------------------------------------------------------

def _chol_factor(X):
    w, V = jacobi_eigh(X)
    return V * np.sqrt(np.clip(w, 0.0, None))


def _cn(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) \
        / np.sqrt(2.0)


def _top_col(F):
    # column of largest norm = sqrt(w_max) * leading eigenvector
    return F[:, int(np.argmax(np.sum(np.abs(F) ** 2, axis=0)))]


def project_es(xi_t, xi_r):
    """Joint per-element normalization onto |phi_t|^2 + |phi_r|^2 = 1."""
    s = np.sqrt(np.abs(xi_t) ** 2 + np.abs(xi_r) ** 2)
    t = np.where(s > 0, xi_t / np.where(s > 0, s, 1.0),
                 np.sqrt(0.5))
    r = np.where(s > 0, xi_r / np.where(s > 0, s, 1.0),
                 np.sqrt(0.5))
    return t, r


def project_unit_modulus(xi):
    ab = np.abs(xi)
    return np.where(ab > 0, xi / np.where(ab > 0, ab, 1.0), 1.0)


def _randomize_profile_pair(Phi_t, Phi_r, mode, masks, score, config, rng):
    """Joint draw over both side blocks; returns full-length (phi_t, phi_r)."""
    mt, mr = masks
    Ft = _chol_factor(Phi_t)
    Fr = _chol_factor(Phi_r)
    best, best_pair = -np.inf, None
    for i in range(config.rand_candidates + 1):
        if i == 0:       # leading-eigenvector pair first
            xt, xr = _top_col(Ft), _top_col(Fr)
        else:
            xt = Ft @ _cn(rng, Ft.shape[1])
            xr = Fr @ _cn(rng, Fr.shape[1])
        if mode == "ES":
            pt, pr = project_es(xt, xr)
        else:  # CONV: unit modulus on each side's active elements
            pt = _expand(project_unit_modulus(xt), mt)
            pr = _expand(project_unit_modulus(xr), mr)
        s = score(pt, pr)
        if s > best:
            best, best_pair = s, (pt, pr)
    return best_pair


def _randomize_beams(V_blocks, users, z_of, objective, beta, budget, config,
                     rng):
    """Joint draw of all columns, projected to exact fairness.

    Since z_k depends on column k alone and scales with ||v_k||^2, the
    fairness ratios can be enforced exactly by per-column rescaling; the
    whole set is then renormalized to the trace budget and scored by the
    plain objective.
    """
    F = {k: _chol_factor(V_blocks[k]) for k in users}
    M = next(iter(V_blocks.values())).shape[0]
    ref = users[0]
    best, best_cols = -np.inf, None
    for i in range(config.rand_candidates + 1):
        if i == 0:
            cols = {k: _top_col(F[k]) for k in users}
        else:
            cols = {k: F[k] @ _cn(rng, M) for k in users}
        z = z_of(cols)
        if min(z.values()) <= 0:
            continue
        # exact fairness: z'_k = s_k^2 z_k = beta_{k,ref} z_ref
        for k in users:
            cols[k] = cols[k] * np.sqrt(beta[k, ref] * z[ref] / z[k])
        tot = sum(np.linalg.norm(c) ** 2 for c in cols.values())
        scale = np.sqrt(budget / tot)
        cols = {k: c * scale for k, c in cols.items()}
        s = objective(z_of(cols), cols)
        if s > best:
            best, best_cols = s, cols
    if best_cols is None:
        raise RuntimeError("all beam candidates degenerate (zero gain)")
    return best_cols


def fairness_residual(z, beta, users):
    ref = users[0]
    if z[ref] <= 0:
        return np.inf
    return max(abs(z[i] - beta[i, ref] * z[ref]) / (beta[i, ref] * z[ref])
               for i in users)


def _fair_score(obj, res):
    # scale-invariant penalty: 5% residual costs ~10% of the objective
    return obj * (1.0 - 2.0 * min(res, 10.0))


# -- per-phase optimizers ----------------------------------------------------

def _setup(channels, phase):
    """Per-user cascaded channels on the user's active side."""
    G = channels.G[phase]
    W = {}
    sides = {}
    for k in range(channels.K):
        side = "t" if channels.groups[k] == "t" else "r"
        W[k] = cascade(channels.g_side(phase, side)[k], G)
        sides[k] = side
    return W, sides


def _init_V(M, users, rng, budget=1.0):
    cols = {k: _cn(rng, M) for k in users}
    tot = sum(np.linalg.norm(c) ** 2 for c in cols.values())
    return {k: np.outer(c, c.conj()) * (budget / tot) for k, c in cols.items()}


def _masked_lambda(W, V, side, masks):
    mt, mr = masks
    mask = mt if side == "t" else mr
    Wm = W[mask, :]
    return lambda_lifted(Wm, V)


def optimize_energy_phase(channels, beta, config, rng, mode="ES",
                          trace=None):
    """Maximize the (fair) sum of harvesting gains; returns the profile,
    the beam matrix and realized per-user gains z_e.

    Best of ``bcd_restarts`` independently initialized descents; the
    realized sum gain after rank-1 recovery picks the winner.
    """
    best = None
    for _ in range(max(1, config.bcd_restarts)):
        out = _energy_phase_once(channels, beta, config, rng, mode, trace)
        if best is None or out[2].sum() > best[2].sum():
            best = out
    return best


def _energy_phase_once(channels, beta, config, rng, mode, trace):
    W, sides = _setup(channels, "e")
    users = list(range(channels.K))
    ref = 0
    N, M = channels.N, channels.M
    masks = conv_masks(N) if mode == "CONV" else (np.ones(N, bool),
                                                  np.ones(N, bool))
    V = _init_V(M, users, rng)
    state = {}

    def step():
        lams = {k: {sides[k]: _masked_lambda(W[k], V[k], sides[k], masks)}
                for k in users}
        Pt, Pr, mt, mr = _phase_sdp_sum(lams, beta, channels.groups, users,
                                        mode, N, ref, config.sdp_tol)
        gammas = {}
        for k in users:
            mask = mt if sides[k] == "t" else mr
            Phi = Pt if sides[k] == "t" else Pr
            gammas[k] = gamma_lifted(W[k][mask, :], Phi)
        Vn = _beam_sdp_sum(gammas, beta, users, M, ref, 1.0, config.sdp_tol)
        state.update(Pt=Pt, Pr=Pr, gammas=gammas)
        V.update(Vn)
        return dict(Pt=Pt, Pr=Pr, V=dict(V))

    def objective():
        return sum(float(np.real(np.trace(state["gammas"][k] @ V[k])))
                   for k in users)

    obj, best, iters = _bcd(step, objective, config, trace=trace)
    Pt, Pr, Vb = best["Pt"], best["Pr"], best["V"]

    def z_of(pt, pr, Vmats):
        z = np.empty(len(users))
        for k in users:
            phi = pt if sides[k] == "t" else pr
            lam = _masked_lambda(W[k], Vmats[k], sides[k], masks)
            pa = phi[masks[0]] if sides[k] == "t" else phi[masks[1]]
            z[k] = float(np.real(pa.conj() @ lam @ pa))
        return z

    def prof_score(pt, pr):
        z = z_of(pt, pr, Vb)
        return _fair_score(z.sum(), fairness_residual(z, beta, users))

    pt, pr = _randomize_profile_pair(Pt, Pr, mode, masks, prof_score,
                                     config, rng)
    rows = {k: (pt if sides[k] == "t" else pr)[masks[0] if sides[k] == "t"
                                               else masks[1]].conj()
            @ W[k][masks[0] if sides[k] == "t" else masks[1], :]
            for k in users}

    def z_of(cols):
        return {k: abs(rows[k] @ cols[k]) ** 2 for k in users}

    cols = _randomize_beams(Vb, users, z_of, lambda z, c: sum(z.values()),
                            beta, 1.0, config, rng)
    Vmat = np.stack([cols[k] for k in users], axis=1)
    z = np.array([abs(rows[k] @ cols[k]) ** 2 for k in users])
    profile = PhaseProfile(mode, _expand(pt[masks[0]], masks[0]) if mode ==
                           "CONV" else pt, _expand(pr[masks[1]], masks[1])
                           if mode == "CONV" else pr)
    return profile, Vmat, z, iters


def optimize_uplink(channels, beta, config, rng, mode="ES", trace=None):
    """Maximize the fair sum of z_{u,k} / (sigma^2 ||v_k||^2).

    Best of ``bcd_restarts`` independently initialized descents, scored
    by the realized Rayleigh-quotient sum after rank-1 recovery.
    """
    once = _optimize_uplink_ts if mode == "TS" else _uplink_once
    best = None
    for _ in range(max(1, config.bcd_restarts)):
        out = once(channels, beta, config, rng, mode, trace)
        if best is None or out[3] > best[3]:
            best = out
    return best[:3]


def _uplink_once(channels, beta, config, rng, mode, trace):
    W, sides = _setup(channels, "u")
    users = list(range(channels.K))
    ref = 0
    N, M = channels.N, channels.M
    masks = conv_masks(N) if mode == "CONV" else (np.ones(N, bool),
                                                  np.ones(N, bool))
    V = _init_V(M, users, rng)
    state = {}

    def step():
        lams = {k: {sides[k]: _masked_lambda(W[k], V[k], sides[k], masks)}
                for k in users}
        Pt, Pr, mt, mr = _phase_sdp_sum(lams, beta, channels.groups, users,
                                        mode, N, ref, config.sdp_tol)
        gammas = {}
        for k in users:
            mask = mt if sides[k] == "t" else mr
            Phi = Pt if sides[k] == "t" else Pr
            gammas[k] = gamma_lifted(W[k][mask, :], Phi)
            # eigenvector step maximizes each Rayleigh quotient exactly
            _, u = hermitian_eig_max(gammas[k])
            V[k] = np.outer(u, u.conj()) / len(users)
        state.update(Pt=Pt, Pr=Pr, gammas=gammas)
        return dict(Pt=Pt, Pr=Pr, V=dict(V))

    def objective():
        return sum(float(np.real(np.trace(state["gammas"][k] @ V[k])))
                   / float(np.real(np.trace(V[k]))) for k in users)

    obj, best, iters = _bcd(step, objective, config, trace=trace)
    Pt, Pr, Vb = best["Pt"], best["Pr"], best["V"]

    def z_cols(pt, pr, Vmats):
        z = np.empty(len(users))
        nr = np.empty(len(users))
        for k in users:
            mask = masks[0] if sides[k] == "t" else masks[1]
            phi = (pt if sides[k] == "t" else pr)[mask]
            lam = _masked_lambda(W[k], Vmats[k], sides[k], masks)
            z[k] = float(np.real(phi.conj() @ lam @ phi))
            nr[k] = float(np.real(np.trace(Vmats[k])))
        return z, nr

    def prof_score(pt, pr):
        z, nr = z_cols(pt, pr, Vb)
        return _fair_score((z / nr).sum(), fairness_residual(z, beta, users))

    pt, pr = _randomize_profile_pair(Pt, Pr, mode, masks, prof_score,
                                     config, rng)
    rows = {}
    for k in users:
        mask = masks[0] if sides[k] == "t" else masks[1]
        phi = (pt if sides[k] == "t" else pr)[mask]
        rows[k] = phi.conj() @ W[k][mask, :]

    def z_cols_of(cols):
        return {k: abs(rows[k] @ cols[k]) ** 2 for k in users}

    def beam_obj(z, cols):
        return sum(z[k] / np.linalg.norm(cols[k]) ** 2 for k in users)

    cols = _randomize_beams(Vb, users, z_cols_of, beam_obj, beta, 1.0,
                            config, rng)
    Vmat = np.stack([cols[k] for k in users], axis=1)
    profile = PhaseProfile(mode,
                           _expand(pt[masks[0]], masks[0]) if mode == "CONV"
                           else pt,
                           _expand(pr[masks[1]], masks[1]) if mode == "CONV"
                           else pr)
    score = beam_obj(z_cols_of(cols), cols)
    return profile, Vmat, iters, score


def _optimize_uplink_ts(channels, beta, config, rng, mode, trace=None):
    """Two independent unit-modulus side problems sharing the beam budget."""
    W, sides = _setup(channels, "u")
    N, M = channels.N, channels.M
    phi_out = {}
    cols_out = {}
    iters_tot = 0
    for side in ("t", "r"):
        users = [k for k in range(channels.K) if sides[k] == side]
        ref = users[0]
        V = _init_V(M, users, rng, budget=0.5)
        state = {}

        def step():
            lam = {k: _masked_lambda(W[k], V[k], side,
                                     (np.ones(N, bool), np.ones(N, bool)))
                   for k in users}
            Phi = _phase_sdp_sum_single(lam, beta, users, N, ref,
                                        config.sdp_tol)
            gammas = {}
            for k in users:
                gammas[k] = gamma_lifted(W[k], Phi)
                _, u = hermitian_eig_max(gammas[k])
                V[k] = np.outer(u, u.conj()) * (0.5 / len(users))
            state.update(Phi=Phi, gammas=gammas)
            return dict(Phi=Phi, V=dict(V))

        def objective():
            return sum(float(np.real(np.trace(state["gammas"][k] @ V[k])))
                       / float(np.real(np.trace(V[k]))) for k in users)

        obj, best, iters = _bcd(step, objective, config, trace=trace)
        iters_tot = max(iters_tot, iters)
        Phi, Vb = best["Phi"], best["V"]

        def prof_score(phi):
            z = np.array([float(np.real(phi.conj()
                                        @ _masked_lambda(W[k], Vb[k], side,
                                                         (np.ones(N, bool),
                                                          np.ones(N, bool)))
                                        @ phi)) for k in users])
            nr = np.array([float(np.real(np.trace(Vb[k]))) for k in users])
            return _fair_score((z / nr).sum(),
                               _group_residual(z, beta, users))

        phi = gaussian_randomize(Phi, config.rand_candidates,
                                 project_unit_modulus, prof_score, rng)
        rows = {k: phi.conj() @ W[k] for k in users}

        def z_cols_of(cols):
            return {k: abs(rows[k] @ cols[k]) ** 2 for k in users}

        def beam_obj(z, cols):
            return sum(z[k] / np.linalg.norm(cols[k]) ** 2 for k in users)

        cols = _randomize_beams(Vb, users, z_cols_of, beam_obj, beta, 0.5,
                                config, rng)
        phi_out[side] = phi
        cols_out.update(cols)
    # greedy rescale of the shared norm budget to 1
    tot = sum(np.linalg.norm(c) ** 2 for c in cols_out.values())
    scale = np.sqrt(1.0 / tot)
    Vmat = np.stack([cols_out[k] * scale for k in range(channels.K)], axis=1)
    score = 0.0
    for k in range(channels.K):
        row = phi_out[sides[k]].conj() @ W[k]
        score += (abs(row @ cols_out[k]) ** 2
                  / np.linalg.norm(cols_out[k]) ** 2)
    return PhaseProfile("TS", phi_out["t"], phi_out["r"]), Vmat, iters_tot, \
        score


def _group_residual(z_group, beta, users):
    ref = users[0]
    if z_group[0] <= 0:
        return np.inf
    return max(abs(z_group[i] - beta[users[i], ref] * z_group[0])
               / (beta[users[i], ref] * z_group[0])
               for i in range(len(users)))


def optimize_downlink(channels, beta, config, rng, mode="ES", trace=None):
    """Maximize the worst noise-normalized downlink gain (per side for TS).

    Best of ``bcd_restarts`` independently initialized descents, scored
    by the realized objective after rank-1 recovery.
    """
    once = _optimize_downlink_ts if mode == "TS" else _downlink_once
    best = None
    for _ in range(max(1, config.bcd_restarts)):
        out = once(channels, beta, config, rng, mode, trace)
        if best is None or out[3] > best[3]:
            best = out
    return best[:3]


def _optimize_downlink_ts(channels, beta, config, rng, mode, trace=None):
    """Two independent unit-modulus side problems sharing the beam budget."""
    W, sides = _setup(channels, "d")
    N, M = channels.N, channels.M
    sigma2 = _noise(config)
    full = (np.ones(N, bool), np.ones(N, bool))
    phi_out = {}
    cols_out = {}
    iters_tot = 0
    for side in ("t", "r"):
        users = [k for k in range(channels.K) if sides[k] == side]
        ref = users[0]
        V = _init_V(M, users, rng, budget=0.5)
        state = {}

        def step():
            lam = {k: _masked_lambda(W[k], V[k], side, full) for k in users}
            Phi = _phase_sdp_sum_single(lam, beta, users, N, ref,
                                        config.sdp_tol)
            gammas = {k: gamma_lifted(W[k], Phi) for k in users}
            Vn = _beam_sdp_sum(gammas, beta, users, M, ref, 0.5,
                               config.sdp_tol)
            state.update(Phi=Phi, gammas=gammas)
            V.update(Vn)
            return dict(Phi=Phi, V=dict(V))

        def objective():
            return min(float(np.real(np.trace(state["gammas"][k] @ V[k])))
                       for k in users) / sigma2

        obj, best, iters = _bcd(step, objective, config, trace=trace)
        iters_tot = max(iters_tot, iters)
        Phi, Vb = best["Phi"], best["V"]

        def prof_score(phi):
            z = np.array([float(np.real(phi.conj()
                                        @ _masked_lambda(W[k], Vb[k], side,
                                                         full)
                                        @ phi)) for k in users])
            return _fair_score(z.min() / sigma2,
                               _group_residual(z, beta, users))

        phi = gaussian_randomize(Phi, config.rand_candidates,
                                 project_unit_modulus, prof_score, rng)
        rows = {k: phi.conj() @ W[k] for k in users}

        def z_cols_of(cols):
            return {k: abs(rows[k] @ cols[k]) ** 2 for k in users}

        def beam_obj(z, cols):
            return min(z[k] for k in users) / sigma2

        cols = _randomize_beams(Vb, users, z_cols_of, beam_obj, beta, 0.5,
                                config, rng)
        phi_out[side] = phi
        cols_out.update(cols)
    # greedy rescale of the shared norm budget: exhaust the unit norm
    # while equalizing the two sides' worst gains (g * f^2 matched)
    g = {}
    n = {}
    for side in ("t", "r"):
        us = [k for k in range(channels.K) if sides[k] == side]
        g[side] = min(abs(phi_out[side].conj() @ W[k] @ cols_out[k]) ** 2
                      for k in us)
        n[side] = sum(np.linalg.norm(cols_out[k]) ** 2 for k in us)
    den = g["r"] * n["t"] + g["t"] * n["r"]
    f2 = {"t": g["r"] / den, "r": g["t"] / den}
    Vmat = np.stack([cols_out[k] * np.sqrt(f2[sides[k]])
                     for k in range(channels.K)], axis=1)
    score = sum(g[s] * f2[s] for s in ("t", "r")) / sigma2
    return PhaseProfile("TS", phi_out["t"], phi_out["r"]), Vmat, iters_tot, \
        score


def _downlink_once(channels, beta, config, rng, mode, trace):
    """Single descent for the downlink problem.

    With the fairness equalities active the lifted gains are locked to
    fixed ratios, so maximizing the worst gain is equivalent to
    maximizing the reference user's gain with a linear objective.  The
    max-min epigraph form is deliberately avoided: its optimum has all
    epigraph inequalities active and linearly dependent on the fairness
    rows, which makes the interior-point Schur system singular.
    """
    W, sides = _setup(channels, "d")
    users = list(range(channels.K))
    N, M = channels.N, channels.M
    sigma2 = np.full(channels.K, _noise(config))
    masks = conv_masks(N) if mode == "CONV" else (np.ones(N, bool),
                                                  np.ones(N, bool))
    V = _init_V(M, users, rng)
    state = {}

    def step():
        lams = {k: {sides[k]: _masked_lambda(W[k], V[k], sides[k], masks)}
                for k in users}
        Pt, Pr, mt, mr = _phase_sdp_sum(lams, beta, channels.groups,
                                        users, mode, N, 0,
                                        config.sdp_tol)
        gammas = {}
        for k in users:
            mask = mt if sides[k] == "t" else mr
            Phi = Pt if sides[k] == "t" else Pr
            gammas[k] = gamma_lifted(W[k][mask, :], Phi)
        Vn = _beam_sdp_sum(gammas, beta, users, M, 0, 1.0, config.sdp_tol)
        state.update(Pt=Pt, Pr=Pr, gammas=gammas, masks=(mt, mr))
        V.update(Vn)
        return dict(Pt=Pt, Pr=Pr, V=dict(V))

    def objective():
        z = {k: float(np.real(np.trace(state["gammas"][k] @ V[k])))
             / sigma2[k] for k in users}
        return min(z.values())

    obj, best, iters = _bcd(step, objective, config, trace=trace)
    Pt, Pr, Vb = best["Pt"], best["Pr"], best["V"]

    def z_of(pt, pr, Vmats):
        z = np.empty(len(users))
        for k in users:
            mask = masks[0] if sides[k] == "t" else masks[1]
            phi = (pt if sides[k] == "t" else pr)[mask]
            lam = _masked_lambda(W[k], Vmats[k], sides[k], masks)
            z[k] = float(np.real(phi.conj() @ lam @ phi))
        return z

    def prof_obj(z):
        return (z / sigma2).min()

    def prof_score(pt, pr):
        z = z_of(pt, pr, Vb)
        return _fair_score(prof_obj(z), fairness_residual(z, beta, users))

    pt, pr = _randomize_profile_pair(Pt, Pr, mode, masks, prof_score,
                                     config, rng)

    rows = {}
    for k in users:
        mask = masks[0] if sides[k] == "t" else masks[1]
        phi = (pt if sides[k] == "t" else pr)[mask]
        rows[k] = phi.conj() @ W[k][mask, :]

    def z_cols_of(cols):
        return {k: abs(rows[k] @ cols[k]) ** 2 for k in users}

    def beam_obj(z, cols):
        return prof_obj(np.array([z[k] for k in users]))

    cols = _randomize_beams(Vb, users, z_cols_of, beam_obj, beta, 1.0,
                            config, rng)
    Vmat = np.stack([cols[k] for k in users], axis=1)
    profile = PhaseProfile(mode,
                           _expand(pt[masks[0]], masks[0]) if mode == "CONV"
                           else pt,
                           _expand(pr[masks[1]], masks[1]) if mode == "CONV"
                           else pr)
    score = beam_obj(z_cols_of(cols), cols)
    return profile, Vmat, iters, score


def _noise(config):
    return config.noise_power()


# -- assembly ----------------------------------------------------------------

def summarize_gains(channels, profiles, beams, config, uplink_mode,
                    downlink_mode):
    """Assemble the post-randomization GainSummary for one scenario.

    profiles/beams: dict phase -> PhaseProfile / (M, K) matrix.
    """
    K = channels.K
    noise = config.noise_power()
    groups = channels.groups

    prof = {p: profiles[p] for p in ("e", "u", "d")}
    z_e = np.array([_gain(channels, prof["e"], beams["e"][:, k], "e", k)
                    for k in range(K)])
    z_u = np.array([_gain(channels, prof["u"], beams["u"][:, k], "u", k)
                    for k in range(K)])

    # uplink composite rows h_m and cross products
    G = channels.G["u"]
    h = np.zeros((K, channels.M), dtype=complex)
    for m in range(K):
        for side in ("t", "r"):
            g = channels.g_side("u", side)[m]
            if np.any(g):
                h[m] += prof["u"].phi(side).conj() @ (g[:, None] * G)
    cross = np.abs(h @ beams["u"]) ** 2   # (m, k)
    if uplink_mode == "TS":
        same = (groups[:, None] == groups[None, :])
        cross = np.where(same, cross, 0.0)
    noise_v = noise * np.linalg.norm(beams["u"], axis=0) ** 2

    z_d = np.array([_gain(channels, prof["d"], beams["d"][:, k], "d", k)
                    for k in range(K)])
    sigma_d2 = np.full(K, noise)
    gs = GainSummary(uplink_mode=uplink_mode, downlink_mode=downlink_mode,
                     groups=groups, z_e=z_e, z_u=z_u, cross_u=cross,
                     noise_v=noise_v, sigma_d2=sigma_d2, z_d=z_d)
    zn = z_d / sigma_d2
    if downlink_mode == "TS":
        gs.z_worst_t = float(zn[groups == "t"].min())
        gs.z_worst_r = float(zn[groups == "r"].min())
    else:
        gs.z_worst = float(zn.min())
    return gs


def _gain(channels, profile, v, phase, k):
    G = channels.G[phase]
    z = 0.0
    for side in ("t", "r"):
        g = channels.g_side(phase, side)[k]
        if np.any(g):
            z += abs(profile.phi(side).conj() @ (g * (G @ v))) ** 2
    return float(z)
