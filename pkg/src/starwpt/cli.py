"""Command line front end: trial, sweep, validate, convergence."""

import argparse
import json
import os
import sys

from . import runner
from . import validate as validation
from .config import ConfigError, builtin_profile, load_config
from .kernel import SdpError
from .resources import SCENARIOS

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _load_config(path, seed=None):
    if path is None:
        cfg = builtin_profile("desk")
    elif os.path.exists(path):
        try:
            cfg = load_config(path)
        except ConfigError as exc:
            raise UsageError(f"bad config {path}: {exc}")
    else:
        # not a file on disk: try it as a shipped profile name
        try:
            cfg = builtin_profile(path)
        except ConfigError:
            raise UsageError(f"config file not found: {path}")
    if seed is not None:
        cfg = cfg.override(seed=int(seed))
    return cfg


def _build_parser():
    top = argparse.ArgumentParser(
        prog="starwpt",
        description="Energy-minimizing scheduler for a wireless-powered "
                    "federated round behind a dual-sided reflecting surface.")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, scenario_default=None):
        p.add_argument("--config", metavar="PATH",
                       help="system profile (default: built-in desk profile)")
        p.add_argument("--out", metavar="PATH", help="output file")
        p.add_argument("--seed", type=int, help="override the profile seed")
        p.add_argument("--scenario", default=scenario_default,
                       choices=SCENARIOS, help="operating scenario")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("trial", help="run one scenario on one random draw")
    common(p, scenario_default="ES-ES")
    p.add_argument("--trial-index", type=int, default=0)

    p = sub.add_parser("sweep", help="sweep one parameter over paired trials")
    p.add_argument("spec", metavar="SPEC", help="sweep description file")
    common(p)

    p = sub.add_parser("validate", help="run the property and oracle suites")
    common(p)
    p.add_argument("--quick", action="store_true",
                   help="reduced instance counts")

    p = sub.add_parser("convergence",
                       help="dump per-iteration optimizer objectives")
    common(p, scenario_default="ES-ES")
    p.add_argument("--trial-index", type=int, default=0)
    return top


# -- subcommands -------------------------------------------------------------

def _cmd_trial(args):
    cfg = _load_config(args.config, args.seed)
    res = runner.run_trial(cfg, args.scenario, args.trial_index)
    if res.feasible:
        print(f"{args.scenario}: E = {res.energy.total_J:.6g} J "
              f"(harvest {res.energy.harvest_J:.6g}, "
              f"downlink {res.energy.downlink_J:.6g}) "
              f"in {res.wall_s:.2f} s")
        if args.verbose:
            from .resources import plan_to_text
            print(plan_to_text(res.plan))
            print("bcd iterations:", res.bcd_iters)
    else:
        print(f"{args.scenario}: infeasible draw "
              f"(trial {res.trial}, seed {res.seed})")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(res.to_dict(), fh, indent=1)
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def _cmd_sweep(args):
    if not os.path.exists(args.spec):
        raise UsageError(f"sweep spec not found: {args.spec}")
    try:
        spec, base_ref = _read_spec(args.spec)
    except runner.SweepSpecError as exc:
        raise UsageError(f"bad sweep spec {args.spec}: {exc}")
    cfg = _load_config(args.config or base_ref, args.seed)
    if args.scenario:
        spec.scenarios = (args.scenario,)
    rows, records = runner.run_sweep(cfg, spec)
    if args.out:
        side = runner.write_sweep_outputs(args.out, rows, records)
        if args.verbose:
            print(f"wrote {args.out} and {side}")
    else:
        sys.stdout.write(runner.sweep_rows_to_csv(rows))
    all_infeasible = all(r["infeasible_rate"] >= 1.0 for r in rows)
    return EXIT_INFEASIBLE if all_infeasible else EXIT_OK


def _read_spec(path):
    """Parse a sweep file; a `config` line names the base profile."""
    base_ref = None
    kept = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line.startswith("config "):
                rel = line.split(None, 1)[1]
                base_ref = os.path.join(os.path.dirname(path), rel)
            else:
                kept.append(raw)
    spec = runner.parse_sweep_spec("\n".join(kept), base=base_ref or "")
    return spec, base_ref


def _cmd_validate(args):
    cfg = _load_config(args.config, args.seed)
    ok, reports = validation.run_all(cfg, quick=args.quick)
    for name, rep in reports.items():
        status = "ok" if not rep["failures"] else "FAIL"
        extra = ""
        if "checked" in rep:
            extra = f" ({rep['checked']} instances, " \
                    f"{rep['infeasible']} infeasible draws)"
        print(f"{name}: {status}{extra}")
        shown = rep["failures"] if args.verbose else rep["failures"][:5]
        for msg in shown:
            print(f"  {msg}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(reports, fh, indent=1, default=float)
    return EXIT_OK if ok else EXIT_NUMERIC


def _cmd_convergence(args):
    cfg = _load_config(args.config, args.seed)
    traces = {}
    runner.compute_gains(cfg, args.trial_index,
                         scenarios=(args.scenario,), traces=traces)
    lines = ["stage,restart,iteration,objective"]
    for stage in sorted(traces):
        restart, prev = 0, 0
        for it, obj in traces[stage]:
            if it <= prev:
                restart += 1
            prev = it
            lines.append(f"{stage},{restart},{it},{obj:.12g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        if args.verbose:
            print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {"trial": _cmd_trial, "sweep": _cmd_sweep,
             "validate": _cmd_validate, "convergence": _cmd_convergence}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SdpError, FloatingPointError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
