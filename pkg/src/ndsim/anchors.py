"""Reference checks of the simulator against published numbers.

Each anchor is a function of an :class:`AnchorContext` returning an
:class:`AnchorResult`; :func:`verify_anchors` runs them all and returns a
JSON-serialisable report.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from . import __version__
from .bounds import solve_equal_duty, worst_case_latency_approx
from .core import (
    ANDROID_ADVERTISE_MODES,
    ANDROID_SCAN_MODES,
    IOS_ADVERTISE_MODES,
    AdvertiserConfig,
    DeviceConfig,
    PresetCatalog,
    catalog_ta0_values,
    ms,
    validate_preset_catalog,
)
from .crowd import (
    CrowdScenario,
    conditional_collision_probability,
    generic_crowd,
    rescaled_pi_config,
    simulate_crowd,
)
from .discovery import run_trials, sweep_latency
from .distance import (
    BEYOND_THRESHOLD,
    TISSUE_TABLE,
    Contact,
    PathLossModel,
    classify_contact,
    estimate_distance,
    path_loss,
    shadow_factor,
    shadowed_estimate,
)
from .energy import PROFILES, battery_impact, mean_current, wearable_runtime
from .schedules import gen_optimal_pi_schedule

LOW_POWER, BALANCED, LOW_LATENCY = "SCAN_MODE_LOW_POWER", "SCAN_MODE_BALANCED", "SCAN_MODE_LOW_LATENCY"

# published battery-impact ranges in percent: scan mode -> (low, high)
PUBLISHED_IMPACT_PCT = {
    "nrf52832": {LOW_POWER: (0.52, 0.57), BALANCED: (1.30, 1.35), LOW_LATENCY: (5.20, 5.25)},
    "ble112": {LOW_POWER: (2.13, 2.34), BALANCED: (5.30, 5.51), LOW_LATENCY: (21.14, 21.35)},
}


@dataclass
class AnchorContext:
    seed: int = 0
    workers: int = 1
    catalog: PresetCatalog = field(default_factory=validate_preset_catalog)
    log: Optional[Callable[[str], None]] = None

    def progress(self, msg: str) -> None:
        if self.log is not None:
            self.log(msg)


@dataclass
class AnchorResult:
    id: str
    passed: bool
    measured: Dict
    expected: str
    checks: Dict[str, bool] = field(default_factory=dict)

    def line(self) -> str:
        parts = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in self.checks.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.id}: {parts}".rstrip()


def _result(id_: str, checks: Dict[str, bool], measured: Dict, expected: str) -> AnchorResult:
    return AnchorResult(id_, all(checks.values()), measured, expected, checks)


def _within(x, target, tol) -> bool:
    return abs(x - target) <= tol + 1e-12


# -- individual anchors -------------------------------------------------------

def anchor_catalog(ctx: AnchorContext) -> AnchorResult:
    cat = ctx.catalog
    checks = {}
    for name, ta0 in {**ANDROID_ADVERTISE_MODES, **IOS_ADVERTISE_MODES}.items():
        try:
            checks[name] = cat.advertiser(name).T_a0 == ta0
        except KeyError:
            checks[name] = False
    for name, (d_s, T_s) in ANDROID_SCAN_MODES.items():
        try:
            s = cat.scanner(name)
            checks[name] = (s.d_s, s.T_s) == (d_s, T_s)
        except KeyError:
            checks[name] = False
    bad = [k for k, v in checks.items() if not v]
    return AnchorResult("catalog", not bad, {"mismatched": bad}, "presets equal the published Android/iOS values")


def anchor_equal_duty(ctx: AnchorContext) -> AnchorResult:
    beta = solve_equal_duty(5_000_000, 40)
    pct = beta * 100
    return _result("1-equal-duty", {"beta": _within(pct, 0.28, 0.01)}, {"beta_pct": pct}, "0.28 % +- 0.01 pp")


def anchor_worst_case(ctx: AnchorContext) -> AnchorResult:
    s = ctx.catalog.scanner(LOW_POWER)
    a = ctx.catalog.advertiser("ADVERTISE_MODE_LOW_LATENCY")
    L = worst_case_latency_approx(a.T_a0, a.rho_max, s.T_s, s.d_s)
    return _result("2-worst-case", {"L": L == 4_718_000}, {"L_us": L}, "4718 ms exactly")


def anchor_latency_sweep(ctx: AnchorContext) -> AnchorResult:
    low = [ms(v) for v in ("100", "152.5", "211.25", "250", "318.75", "417.5")]
    ctx.progress("latency sweep: short intervals")
    res = sweep_latency(low, ctx.catalog.scanner(LOW_POWER), 1000, rng_seed=ctx.seed, workers=ctx.workers)
    maxima = {r.T_a0: r.max_latency for r in res}
    ok_low = all(m is not None and 4_000_000 <= m <= 5_000_000 for m in maxima.values())
    ctx.progress("latency sweep: 1022.5 ms and 1018.8 ms")
    r1, r2 = sweep_latency([ms("1022.5"), ms("1018.8")], ctx.catalog.scanner(LOW_POWER), 1000,
                           rng_seed=ctx.seed, workers=ctx.workers)
    ok_1022 = r1.max_latency is not None and abs(r1.max_latency - 172_500_000) <= 0.05 * 172_500_000
    ok_1018 = r2.censored_fraction > 0.5
    return _result(
        "3-latency-sweep",
        {"short-intervals": ok_low, "1022.5ms-max": ok_1022, "1018.8ms-censored": ok_1018},
        {"max_latency_us": maxima, "max_1022_5_us": r1.max_latency, "censored_1018_8": r2.censored_fraction},
        "max in [4.0, 5.0] s; 172.5 s +- 5 %; > 50 % censored",
    )


def anchor_low_latency_bound(ctx: AnchorContext) -> AnchorResult:
    a = ctx.catalog.advertiser("ADVERTISE_MODE_LOW_LATENCY")
    s = ctx.catalog.scanner(LOW_LATENCY)
    out = run_trials(DeviceConfig(advertiser=a), DeviceConfig(scanner=s), 1000, rng_seed=ctx.seed, workers=ctx.workers)
    limit = 110_000 + a.omega
    worst = max((o.latency_from_t0 for o in out if not o.censored), default=None)
    ok = worst is not None and not any(o.censored for o in out) and worst <= limit
    return _result("4-low-latency-bound", {"all-trials": ok}, {"max_latency_from_t0_us": worst}, f"<= {limit} us")


def anchor_crowd(ctx: AnchorContext) -> AnchorResult:
    vals = catalog_ta0_values(ctx.catalog)
    probs: Dict[str, Dict[int, float]] = {}
    for mode in (LOW_POWER, BALANCED, LOW_LATENCY):
        ctx.progress(f"crowd: {mode}")
        scan = ctx.catalog.scanner(mode)
        probs[mode] = {}
        for ta0 in vals:
            dev = DeviceConfig(advertiser=AdvertiserConfig(T_a0=ta0), scanner=scan)
            est = simulate_crowd(CrowdScenario(100, dev, 10_000_000, 10_000), ctx.seed, ctx.workers)
            probs[mode][ta0] = est.success_probability
    bal_1285 = probs[BALANCED][ms(1285)]
    others = [p for m in (BALANCED, LOW_LATENCY) for t, p in probs[m].items() if t != ms(1285)]
    lp = list(probs[LOW_POWER].values())
    checks = {
        "balanced-1285": _within(bal_1285, 0.964, 0.01),
        "others>=99.9%": min(others) >= 0.999,
        "low-power-min": _within(min(lp), 0.391, 0.02),
        "low-power-max": _within(max(lp), 0.994, 0.02),
    }
    measured = {
        "balanced_1285": bal_1285, "min_other": min(others),
        "low_power_min": min(lp), "low_power_max": max(lp),
        "success": {m: {str(t): p for t, p in d.items()} for m, d in probs.items()},
    }
    return _result("5-crowd", checks, measured, "96.4 % +- 1 pp; >= 99.9 %; 39.1 % / 99.4 % +- 2 pp")


def anchor_generic_crowd(ctx: AnchorContext) -> AnchorResult:
    ctx.progress("generic crowd")
    pi = gen_optimal_pi_schedule(5_000_000, 40)
    f1 = generic_crowd(75, pi, rng_seed=ctx.seed, workers=ctx.workers).failure_probability
    f4 = generic_crowd(75, rescaled_pi_config(pi, 4), rng_seed=ctx.seed, workers=ctx.workers).failure_probability
    return _result(
        "6-generic-crowd",
        {"k=1": _within(f1, 0.35, 0.05), "k=4": _within(f4, 0.10, 0.05)},
        {"failure_k1": f1, "failure_k4": f4},
        "35 % +- 5 pp; 10 % +- 5 pp (approximate)",
    )


def table2_ranges(catalog: PresetCatalog, profile_name: str) -> Dict[str, tuple]:
    prof = PROFILES[profile_name]
    out = {}
    for mode in ANDROID_SCAN_MODES:
        scan = catalog.scanner(mode)
        v = [
            100 * battery_impact(mean_current(DeviceConfig(advertiser=AdvertiserConfig(T_a0=t), scanner=scan), prof))
            for t in catalog_ta0_values(catalog)
        ]
        out[mode] = (min(v), max(v))
    return out


def anchor_energy(ctx: AnchorContext) -> AnchorResult:
    nrf = table2_ranges(ctx.catalog, "nrf52832")
    ble = table2_ranges(ctx.catalog, "ble112")
    checks = {}
    for mode, (lo, hi) in PUBLISHED_IMPACT_PCT["nrf52832"].items():
        checks[f"nrf:{mode}"] = _within(nrf[mode][0], lo, 0.1) and _within(nrf[mode][1], hi, 0.1)
    for mode, (lo, hi) in PUBLISHED_IMPACT_PCT["ble112"].items():
        checks[f"ble112:{mode}"] = _within(ble[mode][0], lo, 0.15 * lo) and _within(ble[mode][1], hi, 0.15 * hi)
    return _result("7-energy", checks, {"nrf52832": nrf, "ble112": ble}, "nRF +- 0.1 pp; BLE112 +- 15 %")


def anchor_wearable(ctx: AnchorContext) -> AnchorResult:
    prof = PROFILES["nrf52832-wearable"]
    dev = gen_optimal_pi_schedule(5_000_000, 40, wake_overhead=prof.ramp_overhead)
    days = wearable_runtime(dev, prof, 200.0)
    half = wearable_runtime(dev, prof, 200.0, active_fraction=0.5)
    return _result(
        "8-wearable",
        {"runtime": 50 <= days <= 90, "active-fraction": half >= 150},
        {"days": days, "days_half_active": half},
        "[50, 90] days; >= 150 days at active_fraction 0.5",
    )


def anchor_distance(ctx: AnchorContext) -> AnchorResult:
    model = PathLossModel()
    f = shadow_factor(model)
    est = shadowed_estimate(0.5, model)
    table_ok = (
        classify_contact(TISSUE_TABLE[0][1]) is Contact.RELEVANT
        and classify_contact(TISSUE_TABLE[1][1]) is Contact.RELEVANT
        and TISSUE_TABLE[2][1] is BEYOND_THRESHOLD
        and classify_contact(TISSUE_TABLE[2][1]) is Contact.NOT_RELEVANT
        and classify_contact(1.5) is Contact.RELEVANT
    )
    return _result(
        "9-distance",
        {"shadow-factor": _within(f, 9.12, 0.01), "0.5m-estimate": _within(est, 4.56, 0.05), "tissue-table": table_ok},
        {"shadow_factor": f, "estimate_m": est},
        "9.12 +- 0.01; 4.56 m +- 0.05; table rows classify as published",
    )


def anchor_properties(ctx: AnchorContext) -> AnchorResult:
    ctx.progress("property suite")
    cat = ctx.catalog
    a = cat.advertiser("ADVERTISE_MODE_BALANCED")
    s = cat.scanner(BALANCED)
    adv_dev, scan_dev = DeviceConfig(advertiser=a), DeviceConfig(scanner=s)
    one = run_trials(adv_dev, scan_dev, 400, rng_seed=ctx.seed, workers=1, chunk=50)
    many = run_trials(adv_dev, scan_dev, 400, rng_seed=ctx.seed, workers=max(ctx.workers, 2), chunk=50)
    determinism = one == many

    worst_excess = -math.inf
    scan = cat.scanner(LOW_POWER)
    for ta0 in (ms(100), ms(250), ms(417.5)):
        adv = AdvertiserConfig(T_a0=ta0)
        bound = worst_case_latency_approx(adv.T_a0, adv.rho_max, scan.T_s, scan.d_s) + adv.event_span
        out = run_trials(DeviceConfig(advertiser=adv), DeviceConfig(scanner=scan), 300, rng_seed=ctx.seed, workers=ctx.workers)
        worst = max(o.latency_from_first_beacon for o in out)
        worst_excess = max(worst_excess, worst - bound)
    conformance = worst_excess <= 0

    p_corr, _ = conditional_collision_probability(AdvertiserConfig(T_a0=ms(100), rho_max=0), trials=2000, rng_seed=ctx.seed)
    p_dec, _ = conditional_collision_probability(AdvertiserConfig(T_a0=ms(100)), trials=2000, rng_seed=ctx.seed)

    rt_err = 0.0
    for n in (1.5, 2.0, 3.3):
        m = PathLossModel(exponent=n)
        for d in (0.1, 0.5, 1.0, 2.7, 40.0):
            rt_err = max(rt_err, abs(estimate_distance(path_loss(d, m), m) - d) / d)
    return _result(
        "10-properties",
        {
            "determinism": determinism,
            "bound-conformance": conformance,
            "correlated-collisions": p_corr == 1.0,
            "decorrelated-collisions": p_dec < 0.1,
            "distance-round-trip": rt_err < 1e-9,
        },
        {"bound_slack_us": -worst_excess, "p_next_collides_rho0": p_corr,
         "p_next_collides_rho10ms": p_dec, "round_trip_rel_err": rt_err},
        "identical outputs; no latency above the bound; P=1 at rho_max=0; P<0.1 at rho_max=10 ms",
    )


ANCHORS: List[Tuple[str, Callable[[AnchorContext], AnchorResult]]] = [
    ("catalog", anchor_catalog),
    ("1-equal-duty", anchor_equal_duty),
    ("2-worst-case", anchor_worst_case),
    ("3-latency-sweep", anchor_latency_sweep),
    ("4-low-latency-bound", anchor_low_latency_bound),
    ("5-crowd", anchor_crowd),
    ("6-generic-crowd", anchor_generic_crowd),
    ("7-energy", anchor_energy),
    ("8-wearable", anchor_wearable),
    ("9-distance", anchor_distance),
    ("10-properties", anchor_properties),
]


def run_anchor(anchor_id: str, ctx: AnchorContext) -> AnchorResult:
    """Run one anchor; exceptions become a failed result instead of propagating."""
    fn = dict(ANCHORS)[anchor_id]
    try:
        return fn(ctx)
    except Exception as exc:  # a broken catalog must show up as a failed anchor
        return AnchorResult(anchor_id, False, {"error": f"{type(exc).__name__}: {exc}"}, "no error")


def verify_anchors(
    seed: int = 0,
    workers: int = 1,
    catalog: Optional[PresetCatalog] = None,
    only: Optional[List[str]] = None,
    log: Optional[Callable[[str], None]] = None,
) -> Dict:
    """Run every anchor (or just the ids in ``only``) and return a JSON-ready report."""
    ctx = AnchorContext(seed, workers, catalog or validate_preset_catalog(), log)
    known = [a for a, _ in ANCHORS]
    if only:
        unknown = sorted(set(only) - set(known))
        if unknown:
            raise KeyError(f"unknown anchors {unknown}; known: {known}")
    results = []
    for anchor_id in known:
        if only and anchor_id not in only:
            continue
        res = run_anchor(anchor_id, ctx)
        ctx.progress(res.line())
        results.append(res)
    return {
        "version": __version__,
        "seed": seed,
        "all_passed": all(r.passed for r in results),
        "anchors": [asdict(r) for r in results],
    }
