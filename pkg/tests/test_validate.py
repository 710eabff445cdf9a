import numpy as np

from starwpt import validate as V
from starwpt.resources import SCENARIO_MODES


def test_sampled_gains_are_scenario_consistent(desk):
    rng = np.random.default_rng(0)
    for scen, (um, dm) in SCENARIO_MODES.items():
        g = V.sample_gain_summary(desk, scen, rng)
        assert (g.uplink_mode, g.downlink_mode) == (um, dm)
        assert np.all(g.z_e > 0) and np.all(g.z_u > 0)
        if dm == "TS":
            assert g.z_worst is None
            assert g.z_worst_t > 0 and g.z_worst_r > 0
        else:
            assert g.z_worst > 0


def test_eigenvalue_reference_on_known_matrix():
    # diag(1, 2, 3, 4) straight through the trace-based polynomial
    ref = V.charpoly_eigs(np.diag([1.0, 2.0, 3.0, 4.0]).astype(complex))
    assert np.allclose(ref, [1.0, 2.0, 3.0, 4.0], atol=1e-10)


def test_correlation_bound_references():
    C = np.array([[1.0, 0.5], [0.5, 1.0]], dtype=complex)
    assert V.corr_sdp_max(C) == 3.0
    # identity objective: optimum is n for any size
    got = V.corr_sdp_max(np.eye(3, dtype=complex), seed=1)
    assert abs(got - 3.0) < 1e-6


def test_quick_suites_pass(desk):
    ok, reports = V.run_all(desk, quick=True)
    assert ok, {k: r["failures"] for k, r in reports.items()}
    assert reports["budget"]["checked"] == 60
    assert reports["kernel"]["eig_err"] < 1e-8
