"""Rician channel sampling and effective-gain evaluation.

Each link is sqrt(L) * ( sqrt(kap/(kap+1)) LoS + sqrt(1/(kap+1)) NLoS )
with L the linear path loss, LoS built from half-wavelength ULA steering
vectors at the geometric angles, and NLoS i.i.d. CN(0,1).  Channels are
redrawn independently for the harvest (e), uplink (u) and downlink (d)
phases of a round.  A user's side vector on the far side of the surface
is identically zero.
"""

from dataclasses import dataclass

import numpy as np

PHASES = ("e", "u", "d")


@dataclass
class ChannelSet:
    G: dict          # phase -> (N, M) AP->RIS
    g_t: dict        # phase -> (K, N) RIS->user, transmission side
    g_r: dict        # phase -> (K, N) RIS->user, reflection side
    groups: np.ndarray

    @property
    def N(self):
        return self.G["e"].shape[0]

    @property
    def M(self):
        return self.G["e"].shape[1]

    @property
    def K(self):
        return self.g_t["e"].shape[0]

    def g_side(self, phase, side):
        return self.g_t[phase] if side == "t" else self.g_r[phase]


def steering(n, angle):
    """Half-wavelength ULA response, unit-modulus entries."""
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / np.sqrt(2.0)


def _rician(loss, los, kap, rng):
    nlos = _cn(rng, los.shape)
    return np.sqrt(loss) * (np.sqrt(kap / (kap + 1.0)) * los
                            + np.sqrt(1.0 / (kap + 1.0)) * nlos)


def sample_channels(topology, config, rng):
    N, M, K = config.N, config.M, topology.K
    kap = config.rician_K

    d_ap = topology.ap_ris_distance()
    loss_ap = config.path_loss_linear(d_ap, config.rho_ap)
    vec_ap = topology.ap_position - topology.ris_position
    ang_ap = np.arctan2(vec_ap[1], vec_ap[0])
    # rank-1 LoS: RIS array response times AP array response
    los_G = np.outer(steering(N, ang_ap), steering(M, ang_ap).conj())

    d_us = topology.ris_user_distances()
    loss_us = np.array([config.path_loss_linear(d, config.rho_user)
                        for d in d_us])
    ang_us = np.arctan2(topology.user_positions[:, 1],
                        topology.user_positions[:, 0])

    G, g_t, g_r = {}, {}, {}
    for phase in PHASES:
        G[phase] = _rician(loss_ap, los_G, kap, rng)
        gt = np.zeros((K, N), dtype=complex)
        gr = np.zeros((K, N), dtype=complex)
        for k in range(K):
            los = steering(N, ang_us[k])
            gk = _rician(loss_us[k], los, kap, rng)
            if topology.groups[k] == "t":
                gt[k] = gk
            else:
                gr[k] = gk
        g_t[phase], g_r[phase] = gt, gr
    return ChannelSet(G, g_t, g_r, topology.groups.copy())


def effective_gain(channels, profile, beam, phase, k):
    """z_{X,k}: squared cascaded gain summed over both surface sides."""
    v = beam[phase][:, k]
    G = channels.G[phase]
    prof = profile[phase]
    z = 0.0
    for side in ("t", "r"):
        phi = prof.phi(side)
        g = channels.g_side(phase, side)[k]
        z += abs(phi.conj() @ (g * (G @ v))) ** 2
    return float(z)


def dump_channels(channels, path):
    """Self-describing flat text dump: one matrix per record, (re, im) pairs."""
    with open(path, "w") as fh:
        fh.write("# starwpt channel dump v1\n")
        fh.write(f"# dims N={channels.N} M={channels.M} K={channels.K}\n")
        for phase in PHASES:
            _write_mat(fh, f"G_{phase}", channels.G[phase])
            _write_mat(fh, f"g_t_{phase}", channels.g_t[phase])
            _write_mat(fh, f"g_r_{phase}", channels.g_r[phase])


def _write_mat(fh, name, mat):
    r, c = mat.shape
    flat = " ".join(f"{z.real:.17g} {z.imag:.17g}" for z in mat.ravel())
    fh.write(f"{name} {r} {c} {flat}\n")


def read_channel_dump(path):
    mats = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            parts = line.split()
            name, r, c = parts[0], int(parts[1]), int(parts[2])
            vals = np.array(parts[3:], dtype=float)
            mats[name] = (vals[0::2] + 1j * vals[1::2]).reshape(r, c)
    return mats
