"""Command-line front end: ``ndsim <command> [options]``.

Data goes to ``--out`` (or stdout) as CSV with a header row; progress and
errors go to stderr.  Every row carries the tool version, the seed and the
resolved parameters, so identical invocations give byte-identical files
regardless of ``--workers``.

``--config FILE`` reads a JSON object whose keys are the long option names
(``ta0_grid`` or ``ta0-grid``); command-line flags override it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from decimal import Decimal, InvalidOperation
from typing import Dict, List, Optional, Sequence

from . import __version__
from .anchors import verify_anchors
from .bounds import optimal_latency_exact, solve_equal_duty, worst_case_latency_approx
from .core import (
    AdvertiserConfig,
    ConfigError,
    DeviceConfig,
    catalog_ta0_values,
    ms,
    validate_preset_catalog,
)
from .crowd import CrowdScenario, generic_crowd, rescaled_pi_config, simulate_crowd
from .discovery import DEFAULT_HORIZON, sweep_latency
from .distance import PathLossModel, classify_contact, path_loss, shadow_factor, shadowed_estimate
from .energy import PROFILES, battery_impact, get_profile, mean_current, wearable_runtime
from .schedules import gen_optimal_pi_schedule

# options that never change results and are therefore left out of the records
_NOT_PARAMS = {"out", "config", "workers", "func", "quiet"}


class CliError(Exception):
    pass


def _log(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr, flush=True)


# -- argument parsing helpers ---------------------------------------------------

def parse_ms_grid(text: str) -> List[int]:
    """``"a:b:step"`` (inclusive, ms) or ``"a,b,c"`` (ms) -> sorted µs values.

    A trailing ``ms`` on either form is accepted.
    """
    text = str(text).strip()
    if text.endswith("ms"):
        text = text[:-2]
    if not text:
        raise CliError("T_a0 grid is empty")
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise CliError(f"grid {text!r} must look like start:stop:step")
            start, stop, step = (Decimal(p) for p in parts)
            if step <= 0 or stop < start:
                raise CliError(f"grid {text!r} has a non-positive step or stop < start")
            n = int((stop - start) / step) + 1
            values = [ms(start + i * step) for i in range(n)]
        else:
            values = [ms(Decimal(p)) for p in text.split(",") if p.strip()]
    except (InvalidOperation, ValueError) as exc:
        raise CliError(f"cannot parse grid {text!r}: {exc}") from None
    if not values:
        raise CliError("T_a0 grid is empty")
    return sorted(set(values))


def _resolved(args) -> Dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_PARAMS}


def _write_rows(args, header: Sequence[str], rows: List[Sequence]) -> None:
    params = json.dumps(_resolved(args), sort_keys=True, separators=(",", ":"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header) + ["tool_version", "seed", "params"])
    for row in rows:
        w.writerow(list(row) + [__version__, args.seed, params])
    _emit(args, buf.getvalue())


def _emit(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror}") from None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(round(x, 9))
    return str(x)


def _ta0_list(args) -> List[int]:
    if args.ta0:
        return parse_ms_grid(args.ta0)
    return catalog_ta0_values()


# -- commands ------------------------------------------------------------------

def cmd_sweep_latency(args) -> None:
    grid = parse_ms_grid(args.ta0_grid)
    scanner = validate_preset_catalog().scanner(args.scan_mode)
    rows = []
    for i, ta0 in enumerate(grid):
        _log(args, f"sweep-latency {i + 1}/{len(grid)}: T_a0={ta0} us")
        r = sweep_latency(
            [ta0], scanner, args.trials, args.horizon_s * 1_000_000, args.seed,
            workers=args.workers, keep_every=args.keep_every, bidirectional=args.bidirectional,
        )[0]
        rows.append([r.T_a0, r.trials, r.censored_count, _fmt(r.censored_fraction),
                     _fmt(r.max_latency), _fmt(r.mean_latency), _fmt(r.max_latency_from_t0)])
    _write_rows(args, ["T_a0_us", "trials", "censored", "censored_fraction", "max_latency_us",
                       "mean_latency_us", "max_latency_from_t0_us"], rows)


def cmd_crowd(args) -> None:
    header = ["config", "T_a0_us", "n_devices", "deadline_us", "trials", "successes",
              "success_probability", "ci95_low", "ci95_high"]
    rows = []
    if args.pi_latency_ms is not None:
        pi = gen_optimal_pi_schedule(ms(args.pi_latency_ms), args.omega_us)
        if args.rescale != 1:
            pi = rescaled_pi_config(pi, args.rescale)
        _log(args, f"crowd: periodic-interval schedule T_a={pi.advertiser.T_a0} us, {args.devices} devices")
        deadline = ms(args.deadline_ms) if args.deadline_ms is not None else None
        est = generic_crowd(args.devices, pi, deadline, args.trials, args.seed, args.workers)
        rows.append([f"pi-k{args.rescale}", pi.advertiser.T_a0, args.devices,
                     deadline if deadline is not None else pi.scanner.T_s, est.trials, est.successes,
                     _fmt(est.success_probability), _fmt(est.wilson_ci_95[0]), _fmt(est.wilson_ci_95[1])])
    else:
        scanner = validate_preset_catalog().scanner(args.scan_mode)
        deadline = ms(args.deadline_ms if args.deadline_ms is not None else 10_000)
        for ta0 in _ta0_list(args):
            _log(args, f"crowd: T_a0={ta0} us, {args.devices} devices")
            dev = DeviceConfig(advertiser=AdvertiserConfig(T_a0=ta0), scanner=scanner)
            sc = CrowdScenario(args.devices, dev, deadline, args.trials, deadline_from=args.deadline_from)
            est = simulate_crowd(sc, args.seed, args.workers)
            rows.append([args.scan_mode, ta0, args.devices, deadline, est.trials, est.successes,
                         _fmt(est.success_probability), _fmt(est.wilson_ci_95[0]), _fmt(est.wilson_ci_95[1])])
    _write_rows(args, header, rows)


def _wearable_rows(args, profile) -> List[list]:
    dev = gen_optimal_pi_schedule(ms(args.latency_ms), args.omega_us, wake_overhead=profile.ramp_overhead)
    current = mean_current(dev, profile)
    days = wearable_runtime(dev, profile, args.battery_mah, args.active_fraction)
    cfg = f"pi:T_a={dev.advertiser.T_a0}us,d_s={dev.scanner.d_s}us,T_s={dev.scanner.T_s}us"
    return [[cfg, profile.name, _fmt(current), _fmt(days)]]


def cmd_energy(args) -> None:
    profile = get_profile(args.profile)
    if args.wearable:
        _write_rows(args, ["config", "profile", "I_BLE_mA", "runtime_days"], _wearable_rows(args, profile))
        return
    scanner = validate_preset_catalog().scanner(args.scan_mode)
    rows = []
    for ta0 in _ta0_list(args):
        dev = DeviceConfig(advertiser=AdvertiserConfig(T_a0=ta0), scanner=scanner)
        current = mean_current(dev, profile)
        rows.append([f"{args.scan_mode}:T_a0={ta0}us", profile.name, _fmt(current),
                     _fmt(100 * battery_impact(current))])
    _write_rows(args, ["config", "profile", "I_BLE_mA", "impact_pct"], rows)


def cmd_wearable(args) -> None:
    args.wearable = True
    cmd_energy(args)


def cmd_bounds(args) -> None:
    rows = []
    if args.latency_ms is not None:
        beta = solve_equal_duty(ms(args.latency_ms), args.omega_us)
        rows.append(["equal_duty_beta", _fmt(beta), "fraction"])
    if args.beta is not None or args.gamma is not None:
        if args.beta is None or args.gamma is None:
            raise CliError("--beta and --gamma go together")
        L = optimal_latency_exact(args.beta, args.gamma, args.omega_us)
        rows.append(["optimal_latency", _fmt(float(L)), "us"])
    if args.scan_mode is not None:
        scanner = validate_preset_catalog().scanner(args.scan_mode)
        for ta0 in _ta0_list(args):
            adv = AdvertiserConfig(T_a0=ta0)
            L = worst_case_latency_approx(adv.T_a0, adv.rho_max, scanner.T_s, scanner.d_s)
            rows.append([f"worst_case_latency:{args.scan_mode}:T_a0={ta0}us", L, "us"])
    if not rows:
        raise CliError("bounds needs --latency-ms, --beta/--gamma or --scan-mode")
    _write_rows(args, ["quantity", "value", "unit"], rows)


def cmd_distance(args) -> None:
    if args.true_m is None:
        raise CliError("distance needs --true-m")
    model = PathLossModel(args.ref_loss_db, args.exponent, args.body_db)
    est = shadowed_estimate(args.true_m, model)
    rows = [[_fmt(args.true_m), _fmt(path_loss(args.true_m, model, shadowed=True)), _fmt(est),
             _fmt(shadow_factor(model)), classify_contact(est, args.threshold_m).value]]
    _write_rows(args, ["true_m", "loss_db", "estimate_m", "shadow_factor", "classification"], rows)


def cmd_verify(args) -> None:
    only = [s for s in args.only.split(",") if s] if args.only else None
    report = verify_anchors(args.seed, args.workers, only=only, log=lambda m: _log(args, m))
    _emit(args, json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    if args.strict and not report["all_passed"]:
        raise SystemExit(1)


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--config", default=None, help="JSON file with option values")
    common.add_argument("--quiet", action="store_true", help="no progress on stderr")

    p = argparse.ArgumentParser(prog="ndsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ndsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    scan_modes = ["SCAN_MODE_LOW_POWER", "SCAN_MODE_BALANCED", "SCAN_MODE_LOW_LATENCY"]

    s = sub.add_parser("sweep-latency", parents=[common], help="max/mean latency per T_a0")
    s.add_argument("--scan-mode", choices=scan_modes, default="SCAN_MODE_LOW_POWER")
    s.add_argument("--ta0-grid", default="20:1300:0.625ms", help="start:stop:step or a,b,c in ms")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--horizon-s", type=int, default=DEFAULT_HORIZON // 1_000_000)
    s.add_argument("--keep-every", type=int, default=1, help="only every k-th advertising event goes on air")
    s.add_argument("--bidirectional", action="store_true", help="scanner also advertises")
    s.set_defaults(func=cmd_sweep_latency)

    c = sub.add_parser("crowd", parents=[common], help="success probability among many devices")
    c.add_argument("--scan-mode", choices=scan_modes, default="SCAN_MODE_LOW_POWER")
    c.add_argument("--ta0", default=None, help="T_a0 list/grid in ms (default: all catalog values)")
    c.add_argument("--devices", type=int, default=100)
    c.add_argument("--deadline-ms", type=float, default=None, help="default 10000, or T_s for --pi-latency-ms")
    c.add_argument("--deadline-from", choices=["t0", "first_beacon"], default="t0")
    c.add_argument("--trials", type=int, default=10_000)
    c.add_argument("--pi-latency-ms", type=float, default=None, help="use a single-channel periodic schedule instead")
    c.add_argument("--omega-us", type=int, default=40)
    c.add_argument("--rescale", type=int, default=1, help="channel-utilisation reduction factor k")
    c.set_defaults(func=cmd_crowd)

    for name, func, default_profile in (("energy", cmd_energy, "nrf52832"),
                                        ("wearable", cmd_wearable, "nrf52832-wearable")):
        e = sub.add_parser(name, parents=[common], help="battery impact" if name == "energy" else "wearable runtime")
        e.add_argument("--profile", choices=sorted(PROFILES), default=default_profile)
        if name == "energy":
            e.add_argument("--scan-mode", choices=scan_modes, default="SCAN_MODE_LOW_POWER")
            e.add_argument("--ta0", default=None, help="T_a0 list/grid in ms (default: all catalog values)")
            e.add_argument("--wearable", action="store_true")
        e.add_argument("--battery-mah", type=float, default=200.0)
        e.add_argument("--active-fraction", type=float, default=1.0)
        e.add_argument("--latency-ms", type=float, default=5000.0)
        e.add_argument("--omega-us", type=int, default=40)
        e.set_defaults(func=func)

    b = sub.add_parser("bounds", parents=[common], help="closed-form latency and duty cycles")
    b.add_argument("--latency-ms", type=float, default=None, help="solve beta=gamma for this latency")
    b.add_argument("--beta", type=float, default=None)
    b.add_argument("--gamma", type=float, default=None)
    b.add_argument("--omega-us", type=int, default=40)
    b.add_argument("--scan-mode", choices=scan_modes, default=None, help="worst-case latency for BLE presets")
    b.add_argument("--ta0", default=None)
    b.set_defaults(func=cmd_bounds)

    d = sub.add_parser("distance", parents=[common], help="distance estimate behind a body")
    d.add_argument("--true-m", type=float, default=None, help="true distance in metres (required)")
    d.add_argument("--body-db", type=float, default=19.2)
    d.add_argument("--exponent", type=float, default=2.0)
    d.add_argument("--threshold-m", type=float, default=1.5)
    d.add_argument("--ref-loss-db", type=float, default=40.0)
    d.set_defaults(func=cmd_distance)

    v = sub.add_parser("verify", parents=[common], help="check published reference values")
    v.add_argument("--only", default=None, help="comma-separated anchor ids")
    v.add_argument("--strict", action="store_true", help="exit 1 if any anchor fails")
    v.set_defaults(func=cmd_verify)
    return p


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _apply_config(parser, argv: List[str], path: str) -> argparse.Namespace:
    """Re-parse ``argv`` with defaults taken from the JSON file at ``path``."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(cfg, dict):
        raise CliError(f"config {path}: top level must be an object")
    first = parser.parse_args(argv)
    sub = _subparser(parser, first.command)
    known = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest == "command":
            if value != first.command:
                raise CliError(f"config $.command: {value!r} does not match command {first.command!r}")
            continue
        if dest not in known:
            raise CliError(f"config $.{key}: unknown option for {first.command}")
        action = known[dest]
        if action.type is not None and value is not None:
            try:
                value = action.type(value)
            except (TypeError, ValueError):
                raise CliError(f"config $.{key}: expected {action.type.__name__}, got {value!r}") from None
        if action.choices is not None and value not in action.choices:
            raise CliError(f"config $.{key}: {value!r} not one of {list(action.choices)}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, args.config)
        if args.workers < 1:
            raise CliError("--workers must be >= 1")
        args.func(args)
    except (CliError, ConfigError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"ndsim: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
