"""Self-contained property and oracle suites.

Three groups of checks, each returning a report dict with a `failures`
list (empty means the suite passed):

* budget_suite    -- schedule invariants on randomly generated networks
* power_cap_suite -- full harvest power never loses to a throttled one
* kernel_suite    -- numeric kernels against independent references
"""

import numpy as np
from scipy.optimize import minimize

from . import resources as rs
from .kernel import SdpProblem, solve_sdp, hermitian_eig_max
from .beamopt import GainSummary
from .resources import SCENARIOS, SCENARIO_MODES, InfeasibleAllocation


# -- synthetic networks ------------------------------------------------------

def sample_gain_summary(config, scenario, rng):
    """Draw effective gains with desk-scale magnitudes.

    Log-uniform spreads around the values the optimization pipeline
    produces, so most draws admit a feasible schedule.
    """
    um, dm = SCENARIO_MODES[scenario]
    K = config.K
    groups = np.array(["t"] * config.K_t + ["r"] * config.K_r)
    noise = config.noise_power()
    z_e = 10.0 ** rng.uniform(-4.6, -3.8, K)
    z_u = 10.0 ** rng.uniform(-4.4, -3.5, K)
    cross = z_u[None, :] * 10.0 ** rng.uniform(-0.6, 0.1, (K, K))
    noise_v = noise * 10.0 ** rng.uniform(0.0, 0.6, K)
    sigma_d2 = np.full(K, noise)
    z_d = 10.0 ** rng.uniform(-4.4, -3.7, K)
    zw = zt = zr = None
    if dm == "TS":
        zt = float(min(z_d[groups == "t"]) / noise)
        zr = float(min(z_d[groups == "r"]) / noise)
    else:
        zw = float(z_d.min() / noise)
    return GainSummary(uplink_mode=um, downlink_mode=dm, groups=groups,
                       z_e=z_e, z_u=z_u, cross_u=cross, noise_v=noise_v,
                       sigma_d2=sigma_d2, z_d=z_d, z_worst=zw,
                       z_worst_t=zt, z_worst_r=zr)


def _instances(config, rng):
    i = 0
    while True:
        scen = SCENARIOS[i % len(SCENARIOS)]
        i += 1
        yield scen, sample_gain_summary(config, scen, rng), \
            rs.draw_loads(config, rng)


# -- suites ------------------------------------------------------------------

def budget_suite(config, instances=500, seed=0):
    """Allocate on random networks and bound every schedule residual.

    Tight equalities (energy budget, bit loads, workloads) must hold to
    1e-6 relative; the deadline to the grid step; caps must have
    nonnegative slack.
    """
    rng = np.random.default_rng(seed)
    limits = {"budget_rel": 1e-6, "uplink_bits_rel": 1e-6,
              "workload_rel": 1e-6, "delay_abs": config.eps,
              "downlink_bits_rel": 1e-6}
    report = {"checked": 0, "infeasible": 0, "failures": [],
              "worst": {k: 0.0 for k in limits}}
    gen = _instances(config, rng)
    attempts = 0
    while report["checked"] < instances and attempts < 4 * instances:
        attempts += 1
        scen, gains, loads = next(gen)
        try:
            plan = rs.allocate(gains, loads, scen, config)
        except InfeasibleAllocation:
            report["infeasible"] += 1
            continue
        res = rs.check_plan(plan, gains, loads, config)
        n = report["checked"]
        for key, lim in limits.items():
            report["worst"][key] = max(report["worst"][key], res[key])
            if res[key] > lim:
                report["failures"].append(
                    f"instance {n} ({scen}): {key}={res[key]:.3g} > {lim:g}")
        for key in ("tau_l_minus_tau_e", "p_cap_slack",
                    "downlink_cap_slack"):
            if res[key] < -1e-9:
                report["failures"].append(
                    f"instance {n} ({scen}): {key}={res[key]:.3g} < 0")
        if not res["P_e_is_cap"]:
            report["failures"].append(
                f"instance {n} ({scen}): harvest power below the cap")
        report["checked"] += 1
    if report["checked"] < instances:
        report["failures"].append(
            f"only {report['checked']} feasible draws in {attempts} tries")
    return report


def power_cap_suite(config, instances=20, fractions=(0.25, 0.5, 0.75),
                    seed=1):
    """Energy at P_max must not exceed energy at any throttled power."""
    rng = np.random.default_rng(seed)
    grid = [f * config.P_max for f in fractions]
    report = {"checked": 0, "infeasible": 0, "failures": []}
    gen = _instances(config, rng)
    attempts = 0
    while report["checked"] < instances and attempts < 4 * instances:
        attempts += 1
        scen, gains, loads = next(gen)
        try:
            rs.allocate(gains, loads, scen, config)
        except InfeasibleAllocation:
            report["infeasible"] += 1
            continue
        rep = rs.verify_power_cap(gains, loads, scen, config, grid)
        for v in rep["violations"]:
            report["failures"].append(
                f"instance {report['checked']} ({scen}): {v}")
        report["checked"] += 1
    if report["checked"] < instances:
        report["failures"].append(
            f"only {report['checked']} feasible draws in {attempts} tries")
    return report


# -- kernel oracles ----------------------------------------------------------

def random_hermitian(n, rng):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2.0


def charpoly_eigs(H):
    """Eigenvalues via the Faddeev-LeVerrier characteristic polynomial.

    Independent of any eigensolver: coefficients come from matrix traces,
    roots from the companion matrix.
    """
    n = H.shape[0]
    c = np.zeros(n + 1, dtype=complex)
    c[0] = 1.0
    Mk = np.zeros_like(H)
    for k in range(1, n + 1):
        Mk = H @ Mk + c[k - 1] * np.eye(n)
        c[k] = -np.trace(H @ Mk) / k
    roots = np.roots(c)
    return np.sort(roots.real)


def corr_sdp_max(C, restarts=12, seed=0):
    """Reference optimum of max <C, X> over PSD X with unit diagonal.

    2x2: closed form.  Larger: full-rank factorized ascent (X = L L^H
    with unit-norm rows), which has no spurious local maxima at full
    rank; best of several starts.
    """
    n = C.shape[0]
    if n == 2:
        return float(C[0, 0].real + C[1, 1].real + 2.0 * abs(C[0, 1]))
    rng = np.random.default_rng(seed)

    def unpack(x):
        L = x[:2 * n * n].reshape(2, n, n)
        L = L[0] + 1j * L[1]
        L /= np.linalg.norm(L, axis=1, keepdims=True)
        return L

    def neg(x):
        L = unpack(x)
        return -float(np.real(np.trace(C @ (L @ L.conj().T))))

    best = -np.inf
    for _ in range(restarts):
        x0 = rng.normal(size=2 * n * n)
        out = minimize(neg, x0, method="L-BFGS-B",
                       options={"maxiter": 400, "ftol": 1e-14,
                                "gtol": 1e-12})
        best = max(best, -out.fun)
    return float(best)


def kernel_suite(instances=25, seed=2):
    """Eigensolver, correlation-SDP optimum and duality gap checks."""
    rng = np.random.default_rng(seed)
    report = {"failures": [], "eig_err": 0.0, "sdp_err": 0.0,
              "worst_gap": 0.0}
    for i in range(instances):
        H = random_hermitian(4, rng)
        ref = charpoly_eigs(H)
        lam, u = hermitian_eig_max(H)
        err = max(abs(lam - ref[-1]),
                  float(np.linalg.norm(H @ u - lam * u)))
        report["eig_err"] = max(report["eig_err"], err)
        if err > 1e-8:
            report["failures"].append(f"eig instance {i}: error {err:.3g}")
    for i in range(instances):
        n = 2 if i % 2 == 0 else 3
        C = random_hermitian(n, rng)
        prob = SdpProblem({"X": n}, {"X": C})
        for d in range(n):
            E = np.zeros((n, n))
            E[d, d] = 1.0
            prob.add_eq({"X": E}, 1.0)
        sol = solve_sdp(prob, tol=1e-9)
        ref = corr_sdp_max(C, seed=1000 + i)
        err = abs(sol.objective - ref) / max(1.0, abs(ref))
        report["sdp_err"] = max(report["sdp_err"], err)
        report["worst_gap"] = max(report["worst_gap"], abs(sol.gap))
        if err > 1e-3:
            report["failures"].append(
                f"sdp instance {i} (n={n}): rel error {err:.3g}")
        if abs(sol.gap) > 1e-6:
            report["failures"].append(
                f"sdp instance {i} (n={n}): duality gap {sol.gap:.3g}")
    return report


def run_all(config, quick=False):
    """Every suite; returns (ok, {name: report})."""
    n_budget, n_cap, n_kern = (60, 6, 8) if quick else (500, 20, 25)
    reports = {
        "budget": budget_suite(config, instances=n_budget),
        "power_cap": power_cap_suite(config, instances=n_cap),
        "kernel": kernel_suite(instances=n_kern),
    }
    ok = all(not r["failures"] for r in reports.values())
    return ok, reports
