import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ndsim.bounds import InfeasibleError, optimal_latency_exact
from ndsim.core import AdvertiserConfig, ScannerConfig, duty_cycles, ms
from ndsim.schedules import (
    BeaconEvent,
    ScanWindow,
    advertising_event_starts,
    gen_beacons,
    gen_optimal_pi_schedule,
    gen_scan_windows,
    read_timeline_csv,
    timeline_csv,
)


def test_beacon_trains():
    a = AdvertiserConfig(T_a0=ms(100))
    beacons = gen_beacons(a, 1000, ms(1000), rng_seed=1)
    assert [b.channel for b in beacons[:3]] == [37, 38, 39]
    assert [b.start for b in beacons[:3]] == [1000, 1278, 1556]
    assert all(b.duration == 128 for b in beacons)
    assert all(b.start + b.duration <= ms(1000) for b in beacons)
    starts = np.array([b.start for b in beacons[::3]])
    gaps = np.diff(starts)
    assert gaps.min() >= ms(100) and gaps.max() <= ms(110)


def test_event_starts_without_jitter_are_periodic():
    a = AdvertiserConfig(T_a0=ms(100), rho_max=0)
    s = advertising_event_starts(a, 5, ms(1000))
    assert s.tolist() == [5 + k * ms(100) for k in range(10)]
    assert advertising_event_starts(a, 5, ms(1000), keep_every=3).tolist() == [5, 300_005, 600_005, 900_005]
    assert advertising_event_starts(a, ms(2000), ms(1000)).size == 0
    with pytest.raises(ValueError):
        advertising_event_starts(a, 0, 0)


def test_scan_windows_rotate_channels():
    s = ScannerConfig(T_s=ms(5120), d_s=ms(512))
    w = gen_scan_windows(s, 0, ms(5120) * 4)
    assert [x.channel for x in w] == [37, 38, 39, 37]
    assert [x.start for x in w] == [0, ms(5120), ms(10240), ms(15360)]
    assert len(gen_scan_windows(s, 0, ms(5120) * 3 + ms(511))) == 3


@settings(max_examples=50)
@given(
    st.lists(st.tuples(st.integers(0, 10**9), st.integers(1, 10**6), st.sampled_from([0, 37, 38, 39]),
                       st.integers(0, 200)), max_size=20),
    st.lists(st.tuples(st.integers(0, 10**9), st.integers(1, 10**6), st.sampled_from([0, 37, 38, 39]),
                       st.integers(0, 200)), max_size=20),
)
def test_timeline_csv_round_trip(bs, ws):
    beacons = [BeaconEvent(a, b, c, d) for a, b, c, d in bs]
    windows = [ScanWindow(a, b, c, d) for a, b, c, d in ws]
    text = timeline_csv(beacons, windows)
    assert text.splitlines()[0] == "device_id,kind,start_us,duration_us,channel"
    b2, w2 = read_timeline_csv(text)
    assert sorted(b2, key=repr) == sorted(beacons, key=repr)
    assert sorted(w2, key=repr) == sorted(windows, key=repr)


def test_timeline_csv_rejects_unknown_kind():
    with pytest.raises(ValueError):
        read_timeline_csv("device_id,kind,start_us,duration_us,channel\n0,blip,1,2,37\n")


def test_optimal_pi_schedule_meets_target():
    dev = gen_optimal_pi_schedule(5_000_000, 40)
    a, s = dev.advertiser, dev.scanner
    assert a.is_generic and a.rho_max == 0 and a.omega == 40
    assert s.d_s == a.T_a0 + a.omega
    beta, gamma = duty_cycles(dev)
    assert abs(float(beta) - float(gamma)) < 1e-4
    assert abs(float(beta) * 100 - 0.28) < 0.01
    # every window holds a beacon, so the worst case is one scan interval
    assert s.T_s <= 5_000_000


def test_optimal_pi_schedule_with_wake_overhead():
    dev = gen_optimal_pi_schedule(5_000_000, 40, wake_overhead=280)
    a, s = dev.advertiser, dev.scanner
    assert s.T_s % a.T_a0 == 0 and s.T_s + a.omega <= 5_000_000
    cost = lambda ta: (40 + 280) / ta + (ta + 40 + 280) / (((5_000_000 - 40) // ta) * ta)
    for other in (a.T_a0 // 2, a.T_a0 * 2, 1000, 200_000):
        assert cost(a.T_a0) <= cost(other)


def test_optimal_pi_schedule_infeasible():
    with pytest.raises(InfeasibleError):
        gen_optimal_pi_schedule(40, 40)
    with pytest.raises(InfeasibleError):
        gen_optimal_pi_schedule(100, 40, wake_overhead=10)


@pytest.mark.parametrize("L", [200_000, 1_000_000, 5_000_000, 60_000_000])
def test_pi_schedule_brute_force_latency(L):
    # worst case over all phases, checked on an explicit grid of offsets
    dev = gen_optimal_pi_schedule(L, 40)
    a, s = dev.advertiser, dev.scanner
    assert optimal_latency_exact(*map(float, duty_cycles(dev)), 40) <= L * 1.001
    worst = 0
    for phase in np.linspace(0, s.T_s - 1, 257).astype(int):
        t = int(phase)
        while True:
            off = t % s.T_s
            if off + a.omega <= s.d_s:
                break
            t += a.T_a0
        worst = max(worst, t - int(phase) + a.omega)
    assert worst <= s.T_s + a.omega
