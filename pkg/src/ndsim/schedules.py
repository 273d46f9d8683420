"""Concrete beacon and scan-window timelines."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Union

import numpy as np

from .bounds import InfeasibleError, solve_equal_duty
from .core import (
    GENERIC_CHANNEL,
    US_PER_BYTE,
    AdvertiserConfig,
    ConfigError,
    DeviceConfig,
    ScannerConfig,
    TimeMicros,
)
from .rng import sample_rho

SeedLike = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class BeaconEvent:
    start: TimeMicros
    duration: TimeMicros
    channel: int
    device_id: int = 0


@dataclass(frozen=True)
class ScanWindow:
    start: TimeMicros
    duration: TimeMicros
    channel: int
    device_id: int = 0


def _as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def advertising_event_starts(
    config: AdvertiserConfig,
    phase: TimeMicros,
    horizon: TimeMicros,
    rng: SeedLike = None,
    keep_every: int = 1,
) -> np.ndarray:
    """Start times of advertising events in ``[phase, horizon)`` as int64.

    Event ``i+1`` starts ``T_a0 + rho_i`` after event ``i``.  With
    ``keep_every=k`` only events ``0, k, 2k, ...`` survive; delays are drawn
    for all events first, so survivors keep their original timing.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = _as_rng(rng)
    if phase >= horizon:
        return np.empty(0, dtype=np.int64)
    min_gap = config.T_a0
    n = (horizon - phase) // min_gap + 1
    gaps = config.T_a0 + sample_rho(rng, config.rho_max, n - 1)
    starts = phase + np.concatenate(([0], np.cumsum(gaps, dtype=np.int64)))
    starts = starts[starts < horizon]
    if keep_every > 1:
        starts = starts[np.arange(starts.size) % keep_every == 0]
    return starts


def gen_beacons(
    config: AdvertiserConfig,
    phase: TimeMicros,
    horizon: TimeMicros,
    rng_seed: SeedLike = None,
    device_id: int = 0,
) -> List[BeaconEvent]:
    """All beacons (one per channel per event) lying fully inside ``[0, horizon]``."""
    starts = advertising_event_starts(config, phase, horizon, rng_seed)
    out = []
    w = config.omega
    for e in starts.tolist():
        for j, ch in enumerate(config.channels):
            s = e + j * config.beacon_stride
            if s + w > horizon:
                break
            out.append(BeaconEvent(s, w, ch, device_id))
    return out


def gen_scan_windows(
    config: ScannerConfig,
    phase: TimeMicros,
    horizon: TimeMicros,
    device_id: int = 0,
) -> List[ScanWindow]:
    """Windows ``phase + k*T_s`` that end no later than ``horizon``.

    Window ``k`` listens on ``channel_rotation[k % len]``.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rot = config.channel_rotation
    out = []
    k = 0
    while True:
        start = phase + k * config.T_s
        if start + config.d_s > horizon:
            break
        out.append(ScanWindow(start, config.d_s, rot[k % len(rot)], device_id))
        k += 1
    return out


def timeline_csv(beacons: Iterable[BeaconEvent], windows: Iterable[ScanWindow]) -> str:
    """Dump a timeline as CSV (device_id, kind, start_us, duration_us, channel)."""
    rows = [(b.device_id, "beacon", b.start, b.duration, b.channel) for b in beacons]
    rows += [(w.device_id, "scan", w.start, w.duration, w.channel) for w in windows]
    rows.sort(key=lambda r: (r[2], r[0], r[1]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["device_id", "kind", "start_us", "duration_us", "channel"])
    writer.writerows(rows)
    return buf.getvalue()


def read_timeline_csv(text: str):
    """Inverse of :func:`timeline_csv`; returns ``(beacons, windows)``."""
    beacons, windows = [], []
    for row in csv.DictReader(io.StringIO(text)):
        args = (int(row["start_us"]), int(row["duration_us"]), int(row["channel"]), int(row["device_id"]))
        if row["kind"] == "beacon":
            beacons.append(BeaconEvent(*args))
        elif row["kind"] == "scan":
            windows.append(ScanWindow(*args))
        else:
            raise ValueError(f"unknown timeline row kind {row['kind']!r}")
    return beacons, windows


def _generic_packet_bytes(omega: TimeMicros) -> int:
    if omega <= 0 or omega % US_PER_BYTE:
        raise ConfigError(f"omega={omega} us is not a whole number of bytes at 1 Mbit/s")
    return omega // US_PER_BYTE


def _pi_device(T_a: int, omega: int, T_s: int) -> DeviceConfig:
    adv = AdvertiserConfig(
        T_a0=T_a,
        rho_max=0,
        packet_bytes=_generic_packet_bytes(omega),
        channels=(GENERIC_CHANNEL,),
        inter_beacon_gap=0,
    )
    scan = ScannerConfig(T_s=T_s, d_s=T_a + omega, channel_rotation=(GENERIC_CHANNEL,))
    return DeviceConfig(advertiser=adv, scanner=scan)


def gen_optimal_pi_schedule(
    target_L: TimeMicros, omega: TimeMicros, wake_overhead: TimeMicros = 0
) -> DeviceConfig:
    """Periodic-interval schedule with ``T_a = d_s - omega`` meeting ``target_L``.

    Without wake-up overhead the duty cycles are split evenly (``beta ==
    gamma``), which minimises latency for a fixed budget when TX and RX
    draw the same current.  With ``wake_overhead > 0`` each beacon and each
    window costs an extra ``wake_overhead`` of radio-on time; ``T_a`` is
    then chosen to minimise total radio-on time per unit time with
    ``T_s = k * T_a`` (``k`` as large as the latency target allows).
    """
    if target_L <= omega:
        raise InfeasibleError(f"target latency {target_L} us must exceed omega={omega} us")
    if wake_overhead == 0:
        beta = Fraction(solve_equal_duty(target_L, omega)).limit_denominator(10**9)
        if beta > 1:
            raise InfeasibleError("required duty cycle exceeds 1")
        T_a = round(Fraction(omega) / beta)
        d_s = T_a + omega
        T_s = max(round(Fraction(d_s) / beta), d_s)
        return _pi_device(T_a, omega, T_s)

    T_a = np.arange(omega + 1, (target_L - omega) // 2 + 1, dtype=np.int64)
    if T_a.size == 0:
        raise InfeasibleError("latency target too small for a periodic-interval schedule")
    k = (target_L - omega) // T_a
    T_s = k * T_a
    on_time = (omega + wake_overhead) / T_a + (T_a + omega + wake_overhead) / T_s
    best = int(np.argmin(on_time))
    return _pi_device(int(T_a[best]), omega, int(T_s[best]))
