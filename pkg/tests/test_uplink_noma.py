import numpy as np
import pytest

from starwpt import resources as rs
from starwpt.beamopt import GainSummary
from starwpt.validate import sample_gain_summary


def _gains(um, z_u, cross, noise, groups):
    K = len(z_u)
    return GainSummary(uplink_mode=um, downlink_mode="ES",
                       groups=np.asarray(groups),
                       z_e=np.ones(K), z_u=np.asarray(z_u, float),
                       cross_u=np.asarray(cross, float),
                       noise_v=np.asarray(noise, float),
                       sigma_d2=np.ones(K), z_d=np.ones(K), z_worst=1.0)


def test_decode_positions_descending_gain():
    assert list(rs.decode_positions([0.5, 2.0, 1.0])) == [2, 0, 1]


def test_interference_mask_slotted_is_triangular():
    g = _gains("TS", [2.0, 1.0, 3.0, 0.5], np.ones((4, 4)),
               np.ones(4), ["t", "t", "r", "r"])
    mask = rs.interference_mask(g)
    # within a group only later-decoded users interfere
    assert mask[1, 0] and not mask[0, 1]     # z0 > z1, same group
    assert mask[3, 2] and not mask[2, 3]
    # nothing crosses groups in slotted uplink
    assert not mask[2, 0] and not mask[0, 2]


def test_interference_mask_simultaneous_adds_cross_group():
    g = _gains("ES", [2.0, 1.0, 3.0, 0.5], np.ones((4, 4)),
               np.ones(4), ["t", "t", "r", "r"])
    mask = rs.interference_mask(g)
    assert mask[2, 0] and mask[0, 2]
    assert mask[1, 0] and not mask[0, 1]


def test_back_substitution_hand_case(desk):
    # two same-group users, z = [2, 1], unit noise, unit cross gain.
    # last-decoded user: p1 * 1 = gamma1 * 1, pick gamma1 = 1 -> p1 = 1.
    # first-decoded: p0 * 2 = gamma0 * (p1 * 1 + 1), gamma0 = 2 -> p0 = 2.
    cfg = desk.override(K_t=2, K_r=2, p_max_k=4.0)
    g = _gains("TS", [2.0, 1.0], np.ones((2, 2)), np.ones(2), ["t", "t"])
    rates = cfg.B * np.log2(1.0 + np.array([2.0, 1.0]))
    p = rs.solve_uplink_powers(rates, g, cfg)
    assert p == pytest.approx([2.0, 1.0], rel=1e-12)


def test_solved_powers_reproduce_target_rates(desk):
    rng = np.random.default_rng(11)
    for scen in ("ES-ES", "TS-TS", "CONV"):
        solved = 0
        for _ in range(20):
            g = sample_gain_summary(desk, scen, rng)
            tau_u = rng.uniform(1.0, 3.0, desk.K)
            rates = rng.uniform(2e5, 6e5, desk.K) / tau_u
            try:
                p = rs.solve_uplink_powers(rates, g, desk)
            except rs.InfeasibleAllocation:
                continue    # dense cross-interference can be unservable
            got = np.array([rs.uplink_rate(k, p, g, desk)
                            for k in range(desk.K)])
            assert np.max(np.abs(got - rates) / rates) < 1e-10
            solved += 1
        assert solved >= 3


def test_power_cap_enforced(desk):
    g = _gains("TS", [2.0, 1.0], np.ones((2, 2)), np.ones(2), ["t", "t"])
    cfg = desk.override(K_t=2, K_r=2, p_max_k=0.5)
    rates = cfg.B * np.log2(1.0 + np.array([2.0, 1.0]))
    with pytest.raises(rs.InfeasibleAllocation):
        rs.solve_uplink_powers(rates, g, cfg)


def test_nonpositive_rate_rejected(desk):
    g = _gains("TS", [2.0, 1.0], np.ones((2, 2)), np.ones(2), ["t", "t"])
    with pytest.raises(rs.InfeasibleAllocation):
        rs.solve_uplink_powers([0.0, 1e6], g, desk)


def test_energy_product_matches_chain_solve(desk):
    # closed-form p_k tau_k for a decoding chain where each interferer is
    # seen at its own gain and noises are equal
    cfg = desk.override(K_t=3, K_r=1, p_max_k=1e6)
    z = np.array([3.0, 2.0, 1.0, 5.0])
    n = np.full(4, 1e-3)
    cross = np.tile(z[:, None], (1, 4))   # c[m, k] = z_m
    g = _gains("TS", z, cross, n, ["t", "t", "t", "r"])
    tau_u = np.array([2.0, 2.0, 2.0, 2.0])
    rates = cfg.B * np.log2(1.0 + np.array([0.8, 0.5, 0.3, 0.2])) / 1.0
    p = rs.solve_uplink_powers(rates, g, cfg)
    ref = p * tau_u
    got = rs.uplink_energy_product(rates, tau_u, g, cfg)
    assert np.max(np.abs(got - ref) / ref) < 1e-9
