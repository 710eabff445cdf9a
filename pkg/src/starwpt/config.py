"""System configuration: simulation parameters, tolerances, profiles.

Values live in plain key-value text files (``key value`` per line, ``#``
comments).  Unknown keys are rejected so a typo cannot silently fall back
to a default.  Data sizes may be given either as a scalar (all users get
that size) or as a ``lo:hi`` range drawn uniformly per user per trial.
"""

from dataclasses import dataclass, field, fields, replace
from importlib import resources as _res
import math


class ConfigError(ValueError):
    pass


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass
class SystemConfig:
    # network sizes
    K_t: int = 4                 # users in transmission group (A)
    K_r: int = 4                 # users in reflection group (B)
    N: int = 60                  # STAR-RIS elements
    M: int = 4                   # AP antennas

    # powers / delay / bandwidth
    P_max: float = 10.0          # max AP transmit power (W)
    p_max_k: float = 0.1         # per-user max uplink power (W)
    T: float = 10.0              # round delay budget (s)
    B: float = 2e6               # bandwidth (Hz)

    # energy model
    eta: float = 0.8             # harvesting conversion efficiency
    a: float = 1e-28             # CPU energy coefficient (J s^2 / cycle^3)
    C_k: float = 300.0           # cycles per bit

    # propagation
    rho_ap: float = 3.0          # path-loss exponent AP<->RIS
    rho_user: float = 3.5        # path-loss exponent RIS<->user
    L0_dB: float = 30.0          # reference path loss at 1 m (dB)
    rician_K: float = 5.0        # Rician factor (linear)
    sigma0_dBm_per_Hz: float = -174.0

    # data sizes (bits); ranges are uniform per-user draws per trial
    L_local_bits: tuple = (1e5, 1e6)
    L_up_bits: tuple = (1e3, 1e4)
    L_down_bits: float = 1e6

    # numerics
    eps: float = 1e-5            # grid step / termination tolerance
    sdp_tol: float = 1e-8
    bcd_max_iter: int = 50
    bcd_restarts: int = 2
    rand_candidates: int = 200
    trials: int = 1000
    seed: int = 1

    def __post_init__(self):
        self.L_local_bits = _as_range(self.L_local_bits, "L_local_bits")
        self.L_up_bits = _as_range(self.L_up_bits, "L_up_bits")
        self.validate()

    @property
    def K(self):
        return self.K_t + self.K_r

    def validate(self):
        if not (0.0 < self.eta < 1.0):
            raise ConfigError(f"eta must be in (0,1), got {self.eta}")
        for name in ("P_max", "p_max_k", "T", "B", "a", "C_k",
                     "L_down_bits", "eps", "sdp_tol", "rician_K"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("K_t", "K_r", "N", "M", "trials",
                     "bcd_max_iter", "bcd_restarts", "rand_candidates"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("L_local_bits", "L_up_bits"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                raise ConfigError(f"{name} must be a positive range lo<=hi")

    # -- derived quantities ------------------------------------------------

    def noise_power(self):
        """Thermal noise power over the full bandwidth, in watts."""
        return dbm_to_watts(self.sigma0_dBm_per_Hz + 10.0 * math.log10(self.B))

    def path_loss_linear(self, distance_m, rho):
        if distance_m < 1.0:
            raise ConfigError(
                f"distance {distance_m} m below 1 m reference distance")
        return db_to_linear(-self.L0_dB) * distance_m ** (-rho)

    # -- serialization -----------------------------------------------------

    def override(self, **kw):
        return replace(self, **kw)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = f"{v[0]:g}:{v[1]:g}"
            lines.append(f"{f.name} {v}")
        return "\n".join(lines) + "\n"


def _as_range(v, name):
    if isinstance(v, (int, float)):
        return (float(v), float(v))
    lo, hi = v
    return (float(lo), float(hi))


_FIELD_TYPES = {f.name: f.type for f in fields(SystemConfig)}
_INT_KEYS = {"K_t", "K_r", "N", "M", "trials", "seed",
             "bcd_max_iter", "bcd_restarts", "rand_candidates"}
_RANGE_KEYS = {"L_local_bits", "L_up_bits"}


def parse_config(text, base=None):
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"line {lineno}: expected 'key value', got {raw!r}")
        key, val = parts
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in _RANGE_KEYS and ":" in val:
            lo, hi = val.split(":")
            kw[key] = (float(lo), float(hi))
        elif key in _INT_KEYS:
            kw[key] = int(val)
        else:
            kw[key] = float(val)
    if base is not None:
        merged = {f.name: getattr(base, f.name) for f in fields(base)}
        merged.update(kw)
        kw = merged
    return SystemConfig(**kw)


def load_config(path, base=None):
    with open(path) as fh:
        return parse_config(fh.read(), base=base)


def builtin_profile(name):
    """Load a shipped profile by name: 'full' or 'desk'."""
    root = _res.files("starwpt") / "configs"
    ref = root / f"{name}.cfg"
    if not ref.is_file():
        known = sorted(p.name[:-4] for p in root.iterdir()
                       if p.name.endswith(".cfg"))
        raise ConfigError(f"unknown profile {name!r}; "
                          f"shipped profiles: {', '.join(known)}")
    return parse_config(ref.read_text())
