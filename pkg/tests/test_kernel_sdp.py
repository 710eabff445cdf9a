import numpy as np
import pytest
from scipy.optimize import minimize

from starwpt.kernel import (SdpError, SdpInfeasibleError, SdpProblem,
                            solve_sdp)

from conftest import random_hermitian


def corr_sdp_max_2x2(C):
    # max <C, X>, X psd, unit diagonal: X12 on the unit disc, optimum
    # aligns its phase with C12 at modulus one
    return float(C[0, 0].real + C[1, 1].real + 2.0 * abs(C[0, 1]))


def corr_sdp_max_factored(C, restarts=12, seed=0):
    """Full-rank factorized ascent X = L L^H with unit-norm rows; at full
    rank the landscape has no spurious local maxima, so a multistart
    local optimizer is a valid reference."""
    n = C.shape[0]
    rng = np.random.default_rng(seed)

    def neg(x):
        L = x.reshape(2, n, n)
        L = L[0] + 1j * L[1]
        L /= np.linalg.norm(L, axis=1, keepdims=True)
        return -float(np.real(np.trace(C @ (L @ L.conj().T))))

    best = -np.inf
    for _ in range(restarts):
        out = minimize(neg, rng.normal(size=2 * n * n), method="L-BFGS-B",
                       options={"maxiter": 400, "ftol": 1e-14, "gtol": 1e-12})
        best = max(best, -out.fun)
    return best


def _unit_diag_problem(C):
    n = C.shape[0]
    prob = SdpProblem({"X": n}, {"X": C})
    for d in range(n):
        E = np.zeros((n, n))
        E[d, d] = 1.0
        prob.add_eq({"X": E}, 1.0)
    return prob


def test_hand_case_identity_objective():
    # max tr(X) with unit diagonal is exactly n
    for n in (2, 3):
        sol = solve_sdp(_unit_diag_problem(np.eye(n)), tol=1e-9)
        assert sol.objective == pytest.approx(n, abs=1e-7)


def test_two_by_two_closed_form():
    rng = np.random.default_rng(21)
    for i in range(13):
        C = random_hermitian(2, rng)
        sol = solve_sdp(_unit_diag_problem(C), tol=1e-9)
        ref = corr_sdp_max_2x2(C)
        assert sol.objective == pytest.approx(ref, abs=1e-3)
        assert abs(sol.gap) <= 1e-6


def test_three_by_three_factored_reference():
    rng = np.random.default_rng(22)
    for i in range(12):
        C = random_hermitian(3, rng)
        sol = solve_sdp(_unit_diag_problem(C), tol=1e-9)
        ref = corr_sdp_max_factored(C, seed=100 + i)
        assert sol.objective == pytest.approx(ref, abs=1e-3)
        assert abs(sol.gap) <= 1e-6


def test_solution_is_feasible_psd():
    rng = np.random.default_rng(5)
    C = random_hermitian(3, rng)
    sol = solve_sdp(_unit_diag_problem(C), tol=1e-9)
    X = sol.blocks["X"]
    assert np.allclose(np.diag(X).real, 1.0, atol=1e-6)
    w = np.linalg.eigvalsh(X)
    assert w.min() > -1e-7
    assert sol.max_residual < 1e-6


def test_inequality_constraint_binds():
    # max tr(X) over psd X with tr(X) <= 2.5
    prob = SdpProblem({"X": 2}, {"X": np.eye(2)})
    prob.add_ineq({"X": np.eye(2)}, 2.5)
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.objective == pytest.approx(2.5, abs=1e-6)


def test_multi_block_objective():
    # independent blocks add up
    prob = SdpProblem({"A": 2, "B": 2}, {"A": np.eye(2), "B": 2 * np.eye(2)})
    prob.add_ineq({"A": np.eye(2)}, 1.0)
    prob.add_ineq({"B": np.eye(2)}, 1.0)
    sol = solve_sdp(prob, tol=1e-9)
    assert sol.objective == pytest.approx(3.0, abs=1e-6)


def test_contradictory_constraints_rejected():
    prob = SdpProblem({"X": 2}, {"X": np.eye(2)})
    prob.add_eq({"X": np.eye(2)}, 1.0)
    prob.add_eq({"X": np.eye(2)}, 2.0)
    with pytest.raises(SdpError):
        solve_sdp(prob, tol=1e-9)


def test_negative_trace_bound_infeasible():
    # tr(X) <= -1 cannot hold for psd X
    prob = SdpProblem({"X": 2}, {"X": np.eye(2)})
    prob.add_ineq({"X": np.eye(2)}, -1.0)
    with pytest.raises(SdpError):
        solve_sdp(prob, tol=1e-9)
