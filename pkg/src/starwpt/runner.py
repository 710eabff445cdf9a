"""Paired-seed trial execution, parameter sweeps and result aggregation.

Every trial index maps to a fixed set of per-stage random streams, so the
five operating scenarios of one trial share the same geometry, channels and
workloads, and a sweep over any parameter reuses the same trial draws at
every value.  Results are therefore paired across both axes.
"""

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import beamopt as bo
from . import resources as rs
from .channels import sample_channels
from .geometry import generate_topology, fairness_targets
from .resources import SCENARIOS, SCENARIO_MODES, InfeasibleAllocation

SWEEP_PARAMS = ("K", "N", "M", "eta", "P_max", "T", "C_k", "L_local")

# parameters that change the optimized phase profiles / beams; everything
# else only moves the resource allocation, so gains can be reused
_GAIN_PARAMS = frozenset({"K", "N", "M"})

CSV_HEADER = ("param,value,scenario,mean_energy_J,stderr_J,"
              "infeasible_rate,trials")

# one independent stream per pipeline stage; skipping a stage never
# perturbs the draws of another
_STAGES = ("scene", "loads", "e-ES", "u-ES", "u-TS", "d-ES", "d-TS",
           "e-CONV", "u-CONV", "d-CONV")


class SweepSpecError(ValueError):
    pass


@dataclasses.dataclass
class SweepSpec:
    """A one-parameter sweep: which knob, which values, which scenarios."""
    param: str
    values: tuple
    scenarios: tuple = SCENARIOS
    trials: int = 20
    base: str = ""

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise SweepSpecError(f"unknown sweep parameter {self.param!r}; "
                                 f"expected one of {', '.join(SWEEP_PARAMS)}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise SweepSpecError("sweep needs at least one value")
        if list(vals) != sorted(vals) or len(set(vals)) != len(vals):
            raise SweepSpecError("sweep values must be strictly increasing")
        self.values = vals
        scens = tuple(self.scenarios)
        for s in scens:
            if s not in SCENARIOS:
                raise SweepSpecError(f"unknown scenario {s!r}")
        if not scens:
            raise SweepSpecError("sweep needs at least one scenario")
        self.scenarios = scens
        self.trials = int(self.trials)
        if self.trials < 1:
            raise SweepSpecError("trials must be >= 1")


def parse_sweep_spec(text, base=""):
    """Parse the `key value...` sweep file format.

    Recognized keys: param, values, scenarios, trials.
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.replace(",", " ").split()
        if key == "param":
            if len(rest) != 1:
                raise SweepSpecError(f"line {lineno}: param takes one name")
            fields["param"] = rest[0]
        elif key == "values":
            fields["values"] = tuple(rest)
        elif key == "scenarios":
            fields["scenarios"] = tuple(rest)
        elif key == "trials":
            if len(rest) != 1:
                raise SweepSpecError(f"line {lineno}: trials takes one int")
            fields["trials"] = rest[0]
        else:
            raise SweepSpecError(f"line {lineno}: unknown key {key!r}")
    if "param" not in fields or "values" not in fields:
        raise SweepSpecError("sweep file must set `param` and `values`")
    return SweepSpec(base=base, **fields)


def load_sweep_spec(path, base=""):
    with open(path) as fh:
        return parse_sweep_spec(fh.read(), base=base)


def apply_sweep_value(config, param, value):
    """Return a config with one swept parameter overridden."""
    if param == "K":
        k = int(round(value))
        if k < 2 or k % 2:
            raise SweepSpecError("K values must be even and >= 2")
        return config.override(K_t=k // 2, K_r=k // 2)
    if param in ("N", "M"):
        return config.override(**{param: int(round(value))})
    if param == "L_local":
        return config.override(L_local_bits=(float(value), float(value)))
    return config.override(**{param: float(value)})


# -- one trial ---------------------------------------------------------------

def trial_streams(config, trial_index):
    ss = np.random.SeedSequence([int(config.seed), int(trial_index)])
    return dict(zip(_STAGES, (np.random.default_rng(c)
                              for c in ss.spawn(len(_STAGES)))))


def _needed_modes(scenarios):
    ups = {SCENARIO_MODES[s][0] for s in scenarios}
    downs = {SCENARIO_MODES[s][1] for s in scenarios}
    energies = {"CONV" if u == "CONV" else "ES" for u in ups}
    return energies, ups, downs


def compute_gains(config, trial_index, scenarios=SCENARIOS, traces=None):
    """Optimize phases/beams once per mode and summarize per scenario.

    Returns (gains, iters): scenario -> GainSummary and stage -> accepted
    BCD iteration count.  `traces` may map stage names to BcdTrace lists.
    """
    streams = trial_streams(config, trial_index)
    topo = generate_topology(config, streams["scene"])
    beta = fairness_targets(topo)
    channels = sample_channels(topo, config, streams["scene"])

    energies, ups, downs = _needed_modes(scenarios)
    iters = {}
    profs, beams = {}, {}

    def stage(name, fn, *args, **kw):
        tr = bo.BcdTrace() if traces is None else traces.setdefault(
            name, bo.BcdTrace())
        out = fn(*args, rng=streams[name], trace=tr, **kw)
        iters[name] = len(tr)
        return out

    for m in ("ES", "CONV"):
        if m in energies:
            p, v, _, _ = stage(f"e-{m}", bo.optimize_energy_phase,
                               channels, beta, config, mode=m)
            profs[f"e-{m}"], beams[f"e-{m}"] = p, v
    for m in ("ES", "TS", "CONV"):
        if m in ups:
            p, v, _ = stage(f"u-{m}", bo.optimize_uplink,
                            channels, beta, config, mode=m)
            profs[f"u-{m}"], beams[f"u-{m}"] = p, v
        if m in downs:
            p, v, _ = stage(f"d-{m}", bo.optimize_downlink,
                            channels, beta, config, mode=m)
            profs[f"d-{m}"], beams[f"d-{m}"] = p, v

    gains = {}
    for scen in scenarios:
        um, dm = SCENARIO_MODES[scen]
        em = "CONV" if um == "CONV" else "ES"
        gains[scen] = bo.summarize_gains(
            channels,
            {"e": profs[f"e-{em}"], "u": profs[f"u-{um}"],
             "d": profs[f"d-{dm}"]},
            {"e": beams[f"e-{em}"], "u": beams[f"u-{um}"],
             "d": beams[f"d-{dm}"]},
            config, um, dm)
    return gains, iters


def draw_trial_loads(config, trial_index):
    streams = trial_streams(config, trial_index)
    return rs.draw_loads(config, streams["loads"])


@dataclasses.dataclass
class TrialResult:
    """Outcome of one scenario on one trial draw.

    When `feasible` is False the energy and plan fields stay None.
    """
    scenario: str
    seed: int
    trial: int
    feasible: bool
    energy: object = None      # EnergyBreakdown when feasible
    plan: object = None        # ResourcePlan when feasible
    bcd_iters: dict = dataclasses.field(default_factory=dict)
    wall_s: float = 0.0

    def to_dict(self):
        d = {"scenario": self.scenario, "seed": self.seed,
             "trial": self.trial, "feasible": self.feasible,
             "bcd_iters": dict(self.bcd_iters),
             "wall_s": self.wall_s}
        if self.feasible:
            d["energy_J"] = self.energy.total_J
            d["harvest_J"] = self.energy.harvest_J
            d["downlink_J"] = self.energy.downlink_J
            d["per_user_J"] = list(self.energy.per_user_J)
            d["plan"] = rs.plan_to_text(self.plan)
        return d


def run_trial(config, scenario, trial_index=0):
    """Run one full trial of one scenario; never raises on infeasibility."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    t0 = time.perf_counter()
    gains, iters = compute_gains(config, trial_index, scenarios=(scenario,))
    loads = draw_trial_loads(config, trial_index)
    try:
        plan = rs.allocate(gains[scenario], loads, scenario, config)
        energy = rs.total_energy(plan, gains[scenario], config)
        feasible, payload = True, (energy, plan)
    except InfeasibleAllocation:
        feasible, payload = False, (None, None)
    return TrialResult(scenario=scenario, seed=int(config.seed),
                       trial=int(trial_index), feasible=feasible,
                       energy=payload[0], plan=payload[1],
                       bcd_iters=iters,
                       wall_s=time.perf_counter() - t0)


# -- sweeps ------------------------------------------------------------------

def _sweep_trial(config, spec, trial_index):
    """All (value, scenario) records for one trial index."""
    records = []
    gains = iters = None
    if spec.param not in _GAIN_PARAMS:
        gains, iters = compute_gains(config, trial_index, spec.scenarios)
    for value in spec.values:
        cfg = apply_sweep_value(config, spec.param, value)
        if spec.param in _GAIN_PARAMS:
            gains, iters = compute_gains(cfg, trial_index, spec.scenarios)
        loads = draw_trial_loads(cfg, trial_index)
        for scen in spec.scenarios:
            rec = {"param": spec.param, "value": value, "scenario": scen,
                   "trial": trial_index, "feasible": False,
                   "energy_J": None, "bcd_iters": dict(iters)}
            try:
                plan = rs.allocate(gains[scen], loads, scen, cfg)
                rec["feasible"] = True
                rec["energy_J"] = rs.total_energy(plan, gains[scen],
                                                  cfg).total_J
            except InfeasibleAllocation:
                pass
            records.append(rec)
    return records


def _worker_count(trials):
    env = os.environ.get("STARWPT_WORKERS", "")
    n = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n, trials))


def run_sweep(config, spec):
    """Execute a sweep; returns (aggregate rows, per-trial records).

    Trials run on a bounded process pool (STARWPT_WORKERS overrides the
    size); output order does not depend on scheduling.
    """
    workers = _worker_count(spec.trials)
    idx = range(spec.trials)
    if workers == 1:
        per_trial = [_sweep_trial(config, spec, t) for t in idx]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_sweep_trial, [config] * spec.trials,
                                      [spec] * spec.trials, idx))
    records = [r for chunk in per_trial for r in chunk]
    return aggregate_records(records, spec), records


def aggregate_records(records, spec):
    """Mean/stderr over feasible trials per (value, scenario) cell."""
    cells = {}
    for r in records:
        cells.setdefault((r["value"], r["scenario"]), []).append(r)
    rows = []
    for value in spec.values:
        for scen in spec.scenarios:
            cell = cells.get((value, scen), [])
            es = np.array([r["energy_J"] for r in cell if r["feasible"]])
            n = len(es)
            mean = float(es.mean()) if n else math.nan
            stderr = float(es.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            rows.append({"param": spec.param, "value": value,
                         "scenario": scen, "mean_energy_J": mean,
                         "stderr_J": stderr,
                         "infeasible_rate": 1.0 - n / max(1, len(cell)),
                         "trials": len(cell)})
    return rows


def sweep_rows_to_csv(rows):
    lines = [CSV_HEADER]
    for r in rows:
        lines.append("%s,%.10g,%s,%.10g,%.10g,%.10g,%d" % (
            r["param"], r["value"], r["scenario"], r["mean_energy_J"],
            r["stderr_J"], r["infeasible_rate"], r["trials"]))
    return "\n".join(lines) + "\n"


def write_sweep_outputs(out_path, rows, records):
    """Write the aggregate CSV and a sidecar JSON with per-trial records."""
    with open(out_path, "w") as fh:
        fh.write(sweep_rows_to_csv(rows))
    side = os.path.splitext(out_path)[0] + ".json"
    with open(side, "w") as fh:
        json.dump(records, fh, indent=1)
    return side
