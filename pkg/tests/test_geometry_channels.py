import numpy as np
import pytest

from starwpt.beamopt import PhaseProfile
from starwpt.channels import (PHASES, dump_channels, effective_gain,
                              read_channel_dump, sample_channels, steering)
from starwpt.geometry import (AP_POSITION, USER_RADIUS, fairness_targets,
                              generate_topology)


def test_user_placement_on_circle_and_arcs(desk, rng):
    topo = generate_topology(desk, rng)
    d = topo.ris_user_distances()
    assert np.allclose(d, USER_RADIUS)
    ang = np.arctan2(topo.user_positions[:, 1], topo.user_positions[:, 0])
    ang = np.mod(ang, 2 * np.pi)
    for k in range(topo.K):
        if topo.groups[k] == "t":
            assert 0.0 <= ang[k] <= np.pi / 2
        else:
            assert np.pi <= ang[k] <= 1.5 * np.pi
    assert topo.ap_ris_distance() == pytest.approx(
        np.linalg.norm(AP_POSITION))


def test_fairness_targets_are_distance_ratios(desk, rng):
    topo = generate_topology(desk, rng)
    d = topo.ris_user_distances()
    beta = fairness_targets(topo)
    assert beta[1, 2] == pytest.approx(d[1] / d[2])
    assert np.allclose(np.diag(beta), 1.0)
    assert np.allclose(beta * beta.T, 1.0)  # beta[i,j] beta[j,i] = 1


def test_steering_unit_modulus():
    s = steering(8, 0.7)
    assert np.allclose(np.abs(s), 1.0)
    assert s[0] == pytest.approx(1.0)
    # broadside: all-ones
    assert np.allclose(steering(8, 0.0), np.ones(8))


def test_sample_channels_shapes_and_sides(desk, rng):
    topo = generate_topology(desk, rng)
    ch = sample_channels(topo, desk, rng)
    assert ch.N == desk.N and ch.M == desk.M and ch.K == desk.K
    for phase in PHASES:
        assert ch.G[phase].shape == (desk.N, desk.M)
        for k in range(ch.K):
            far = ch.g_r if topo.groups[k] == "t" else ch.g_t
            near = ch.g_t if topo.groups[k] == "t" else ch.g_r
            assert np.all(far[phase][k] == 0.0)
            assert np.linalg.norm(near[phase][k]) > 0.0


def test_phases_are_independent_draws(desk, rng):
    topo = generate_topology(desk, rng)
    ch = sample_channels(topo, desk, rng)
    assert not np.allclose(ch.G["e"], ch.G["u"])
    assert not np.allclose(ch.G["u"], ch.G["d"])


def test_effective_gain_matches_direct_product(desk, rng):
    topo = generate_topology(desk, rng)
    ch = sample_channels(topo, desk, rng)
    prof = PhaseProfile("ES",
                        np.exp(1j * rng.uniform(0, 2 * np.pi, desk.N)),
                        np.exp(1j * rng.uniform(0, 2 * np.pi, desk.N)))
    V = rng.normal(size=(desk.M, desk.K)) \
        + 1j * rng.normal(size=(desk.M, desk.K))
    k = 1
    z = effective_gain(ch, {"e": prof}, {"e": V}, "e", k)
    side = "t" if topo.groups[k] == "r" else "r"  # far side contributes 0
    phi = prof.phi("t" if topo.groups[k] == "t" else "r")
    g = ch.g_side("e", "t" if topo.groups[k] == "t" else "r")[k]
    ref = abs(phi.conj() @ (g * (ch.G["e"] @ V[:, k]))) ** 2
    assert z == pytest.approx(ref, rel=1e-12)


def test_channel_dump_roundtrip(desk, rng, tmp_path):
    topo = generate_topology(desk, rng)
    ch = sample_channels(topo, desk, rng)
    p = tmp_path / "ch.txt"
    dump_channels(ch, str(p))
    back = read_channel_dump(str(p))
    for phase in PHASES:
        assert np.array_equal(back[f"G_{phase}"], ch.G[phase])
        assert np.array_equal(back[f"g_t_{phase}"], ch.g_t[phase])
        assert np.array_equal(back[f"g_r_{phase}"], ch.g_r[phase])
