import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ndsim.bounds import worst_case_latency_approx
from ndsim.core import AdvertiserConfig, DeviceConfig, ScannerConfig, ms, validate_preset_catalog
from ndsim.discovery import (
    degraded_beacon_drop,
    run_trials,
    simulate_pair,
    summarize,
    sweep_latency,
)
from ndsim.rng import trial_rng

from oracles import pair_first_reception

CAT = validate_preset_catalog()
LOW_POWER = CAT.scanner("SCAN_MODE_LOW_POWER")
BALANCED = CAT.scanner("SCAN_MODE_BALANCED")


@pytest.mark.parametrize(
    "ta0, scan, bidirectional",
    [
        (ms(100), LOW_POWER, False),
        (ms(417.5), BALANCED, False),
        (ms(852.5), LOW_POWER, False),
        (ms(100), BALANCED, True),
        (ms(20), ScannerConfig(T_s=ms(30), d_s=ms(3), channel_rotation=(38, 37)), True),
    ],
)
def test_engine_matches_timeline_oracle(ta0, scan, bidirectional):
    adv = AdvertiserConfig(T_a0=ta0)
    adv_dev = DeviceConfig(advertiser=adv)
    scan_dev = DeviceConfig(advertiser=adv if bidirectional else None, scanner=scan)
    horizon = 60_000_000
    for i in range(40):
        phase = int(trial_rng(7, 1, i).integers(0, scan.T_s))
        got = simulate_pair(adv_dev, scan_dev, phase, horizon, trial_rng(7, 2, i))
        want = pair_first_reception(adv_dev, scan_dev, phase, horizon, trial_rng(7, 2, i))
        assert got.latency_from_first_beacon == want, (i, phase)


def test_jammed_channels_oracle_and_monotonicity():
    adv = AdvertiserConfig(T_a0=ms(250))
    adv_dev, scan_dev = DeviceConfig(advertiser=adv), DeviceConfig(scanner=BALANCED)
    for i in range(30):
        phase = int(trial_rng(3, 0, i).integers(0, BALANCED.T_s))
        prev = -1
        for jam in ((), (37,), (37, 38), (37, 38, 39)):
            lat = simulate_pair(adv_dev, scan_dev, phase, 40_000_000, trial_rng(3, 1, i), jammed_channels=jam)
            lat = lat.latency_from_first_beacon
            assert lat == pair_first_reception(adv_dev, scan_dev, phase, 40_000_000, trial_rng(3, 1, i), jam)
            val = np.inf if lat is None else lat
            assert val >= prev
            prev = val
        assert lat is None


def test_phase_validation():
    dev = DeviceConfig(advertiser=AdvertiserConfig(T_a0=ms(100)))
    with pytest.raises(ValueError):
        simulate_pair(dev, DeviceConfig(scanner=LOW_POWER), LOW_POWER.T_s)
    with pytest.raises(ValueError):
        simulate_pair(DeviceConfig(scanner=LOW_POWER), DeviceConfig(scanner=LOW_POWER), 0)


def test_same_seed_same_outcomes_and_worker_independence():
    adv = DeviceConfig(advertiser=AdvertiserConfig(T_a0=ms(211.25)))
    scan = DeviceConfig(scanner=LOW_POWER)
    a = run_trials(adv, scan, 120, rng_seed=5, chunk=25)
    b = run_trials(adv, scan, 120, rng_seed=5, chunk=25, workers=3)
    c = run_trials(adv, scan, 120, rng_seed=5, chunk=120)
    assert a == b == c
    assert a != run_trials(adv, scan, 120, rng_seed=6)


def test_longer_horizon_only_resolves_censored_trials():
    adv = DeviceConfig(advertiser=AdvertiserConfig(T_a0=ms(1018.8)))
    scan = DeviceConfig(scanner=LOW_POWER)
    for i in range(30):
        phase = int(trial_rng(9, 0, i).integers(0, LOW_POWER.T_s))
        short = simulate_pair(adv, scan, phase, 20_000_000, trial_rng(9, 1, i))
        long = simulate_pair(adv, scan, phase, 200_000_000, trial_rng(9, 1, i))
        if not short.censored:
            assert long.latency_from_first_beacon == short.latency_from_first_beacon
        assert short.censored or not long.censored


@settings(max_examples=15, deadline=None)
@given(
    ta0=st.integers(20_000, 400_000),
    scan_mode=st.sampled_from(["SCAN_MODE_LOW_POWER", "SCAN_MODE_BALANCED"]),
    seed=st.integers(0, 2**32),
)
def test_latency_never_exceeds_bound(ta0, scan_mode, seed):
    scan = CAT.scanner(scan_mode)
    adv = AdvertiserConfig(T_a0=ta0)
    bound = worst_case_latency_approx(adv.T_a0, adv.rho_max, scan.T_s, scan.d_s)
    out = run_trials(DeviceConfig(advertiser=adv), DeviceConfig(scanner=scan), 40, rng_seed=seed)
    for o in out:
        assert not o.censored
        # measured to the start of the received beacon, so one event span of slack
        assert o.latency_from_first_beacon <= bound + adv.event_span


def test_latency_from_t0_can_exceed_the_approximation():
    adv = AdvertiserConfig(T_a0=ms(100), rho_max=0)
    scan = ScannerConfig(T_s=ms(5120), d_s=ms(512))
    bound = worst_case_latency_approx(adv.T_a0, adv.rho_max, scan.T_s, scan.d_s)
    phase = scan.d_s - adv.omega + 1
    o = simulate_pair(DeviceConfig(advertiser=adv), DeviceConfig(scanner=scan), phase, rng_seed=0, t0_lead=ms(99))
    assert o.latency_from_first_beacon <= bound + adv.event_span
    assert o.latency_from_t0 > bound


def test_summarize_and_censoring():
    adv = AdvertiserConfig(T_a0=ms(100))
    r = degraded_beacon_drop(adv, "SCAN_MODE_LOW_POWER", k=10**6, trials=20, horizon=30_000_000)
    # only the very first event ever goes on air
    assert 0 < r.censored_count < r.trials
    s = summarize(1, [])
    assert s.max_latency is None
    with pytest.raises(ValueError):
        degraded_beacon_drop(adv, "SCAN_MODE_LOW_POWER", k=0)


def test_dropping_events_slows_discovery():
    adv = AdvertiserConfig(T_a0=ms(211.25))
    full = degraded_beacon_drop(adv, "SCAN_MODE_LOW_POWER", 1, trials=300)
    half = degraded_beacon_drop(adv, "SCAN_MODE_LOW_POWER", 2, trials=300)
    assert full == sweep_latency([adv.T_a0], "SCAN_MODE_LOW_POWER", 300)[0]
    assert half.mean_latency > full.mean_latency


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError):
        sweep_latency([], "SCAN_MODE_LOW_POWER")


def test_bidirectional_self_blocking_costs_latency():
    one = sweep_latency([ms(100)], "SCAN_MODE_BALANCED", 400, rng_seed=1)[0]
    two = sweep_latency([ms(100)], "SCAN_MODE_BALANCED", 400, rng_seed=1, bidirectional=True)[0]
    assert two.mean_latency >= one.mean_latency * 0.98


def test_1022_5_maximum_is_robust_across_seeds():
    # the max of 1000 trials is an extreme-value statistic; its median over seeds is stable
    maxima = [sweep_latency([ms(1022.5)], "SCAN_MODE_LOW_POWER", 1000, rng_seed=s)[0].max_latency for s in range(9)]
    assert abs(statistics.median(maxima) - 172_500_000) <= 0.05 * 172_500_000
