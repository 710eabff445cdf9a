"""Network topology: AP, STAR-RIS, and two user groups on a 20 m circle.

The RIS sits at the origin and splits the plane into a transmission
half-space (group A, top-right quadrant arc) and a reflection half-space
(group B, bottom-left quadrant arc).  The AP is fixed at (-20, 20).
"""

from dataclasses import dataclass

import numpy as np

AP_POSITION = np.array([-20.0, 20.0])
RIS_POSITION = np.array([0.0, 0.0])
USER_RADIUS = 20.0


@dataclass
class Topology:
    ap_position: np.ndarray
    ris_position: np.ndarray
    user_positions: np.ndarray    # (K, 2), group A rows first
    groups: np.ndarray            # (K,) of 't' / 'r'

    @property
    def K(self):
        return len(self.groups)

    def ris_user_distances(self):
        return np.linalg.norm(self.user_positions - self.ris_position, axis=1)

    def ap_ris_distance(self):
        return float(np.linalg.norm(self.ap_position - self.ris_position))


def generate_topology(config, rng):
    """Draw user angles uniformly on the group arcs; radius fixed at 20 m."""
    ang_a = rng.uniform(0.0, np.pi / 2, size=config.K_t)
    ang_b = rng.uniform(np.pi, 1.5 * np.pi, size=config.K_r)
    ang = np.concatenate([ang_a, ang_b])
    pos = USER_RADIUS * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    groups = np.array(["t"] * config.K_t + ["r"] * config.K_r)
    return Topology(AP_POSITION.copy(), RIS_POSITION.copy(), pos, groups)


def fairness_targets(topology):
    """beta[i, j] = distance(RIS, user i) / distance(RIS, user j)."""
    d = topology.ris_user_distances()
    return d[:, None] / d[None, :]
