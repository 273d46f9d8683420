"""Pairwise discovery simulation and latency sweeps.

One device advertises, the other scans.  Time zero is the start of the
scan interval into which the advertiser's first in-range beacon falls,
``phase`` (Φ) µs later.  The devices came into range ``t0_lead`` µs before
that first beacon, drawn uniformly over the preceding advertising
interval unless given.

A beacon is received when it lies entirely inside a scan window on its own
channel, is not on a jammed channel, and does not touch the scanner's own
transmissions padded by the RX/TX turnaround on both sides.  Latency is
measured from the start of the first beacon to the start of the received
beacon.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from .core import (
    AdvertiserConfig,
    DeviceConfig,
    ScannerConfig,
    TimeMicros,
    validate_preset_catalog,
)
from .parallel import chunk_ranges, run_chunks
from .rng import sample_rho, scenario_key, trial_rng

DEFAULT_HORIZON = 300_000_000
_BLOCK = 256


@dataclass(frozen=True)
class TrialOutcome:
    """Result of one pairwise trial; ``None`` latencies mean censored at ``horizon``."""

    latency_from_first_beacon: Optional[TimeMicros]
    latency_from_t0: Optional[TimeMicros]
    phase_offset: TimeMicros
    t0_lead: TimeMicros
    horizon: TimeMicros

    @property
    def censored(self) -> bool:
        return self.latency_from_first_beacon is None


@dataclass(frozen=True)
class SweepResult:
    T_a0: TimeMicros
    max_latency: Optional[TimeMicros]
    mean_latency: Optional[float]
    censored_count: int
    trials: int
    max_latency_from_t0: Optional[TimeMicros] = None

    @property
    def censored_fraction(self) -> float:
        return self.censored_count / self.trials


class _Stream:
    """Lazily extends an advertising event train block by block."""

    def __init__(self, adv: AdvertiserConfig, first: int, rng: np.random.Generator, keep_every: int = 1):
        self.adv = adv
        self.rng = rng
        self.next_start = first
        self.keep_every = keep_every
        self.count = 0

    def block(self, n: int = _BLOCK) -> np.ndarray:
        gaps = self.adv.T_a0 + sample_rho(self.rng, self.adv.rho_max, n)
        starts = self.next_start + np.concatenate(([0], np.cumsum(gaps[:-1], dtype=np.int64)))
        self.next_start = int(starts[-1] + gaps[-1])
        idx = self.count + np.arange(n)
        self.count += n
        if self.keep_every > 1:
            starts = starts[idx % self.keep_every == 0]
        return starts


def _blocked(starts: np.ndarray, own: np.ndarray, span: int, turnaround: int, width: int) -> np.ndarray:
    """Mask of beacons ``[s, s+width)`` that touch any ``[o - ta, o + span + ta)``."""
    if own.size == 0:
        return np.zeros(starts.shape, dtype=bool)
    idx = np.searchsorted(own, starts + width + turnaround, side="left") - 1
    ok = idx >= 0
    hit = np.zeros(starts.shape, dtype=bool)
    hit[ok] = own[idx[ok]] + span + turnaround > starts[ok]
    return hit


def simulate_pair(
    adv: DeviceConfig,
    scan: DeviceConfig,
    phase: TimeMicros,
    horizon: TimeMicros = DEFAULT_HORIZON,
    rng_seed: Union[int, np.random.Generator, None] = None,
    *,
    t0_lead: Optional[TimeMicros] = None,
    keep_every: int = 1,
    jammed_channels: Iterable[int] = (),
) -> TrialOutcome:
    """Simulate one discovery of ``adv`` by ``scan``; ``phase`` must lie in ``[0, T_s)``.

    ``keep_every=k`` keeps only every k-th advertising event (the first one
    included), emulating controllers that skip events.  Beacons on
    ``jammed_channels`` are never received.
    """
    a = adv.advertiser
    s = scan.scanner
    if a is None or s is None:
        raise ValueError("adv needs an advertiser and scan needs a scanner")
    if not 0 <= phase < s.T_s:
        raise ValueError(f"phase {phase} outside [0, {s.T_s})")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    adv_rng, own_rng, misc_rng = rng.spawn(3)

    if t0_lead is None:
        prev_gap = a.T_a0 + int(sample_rho(misc_rng, a.rho_max, 1)[0])
        t0_lead = int(misc_rng.integers(0, prev_gap))

    own_adv = scan.advertiser
    own = np.empty(0, dtype=np.int64)
    own_stream = None
    if own_adv is not None:
        own_period = own_adv.T_a0 + own_adv.rho_max
        own_first = int(misc_rng.integers(0, own_period)) - own_period
        own_stream = _Stream(own_adv, own_first, own_rng)
        own = own_stream.block()

    stream = _Stream(a, phase, adv_rng, keep_every)
    end = phase + horizon
    jammed = set(jammed_channels)
    rot = np.asarray(s.channel_rotation)
    width = a.omega
    found = None
    while stream.next_start < end or stream.count == 0:
        ev = stream.block()
        ev = ev[ev < end]
        if ev.size == 0:
            continue
        if own_stream is not None:
            while own[-1] < ev[-1] + a.event_span + scan.turnaround:
                own = np.concatenate((own, own_stream.block()))
        best = np.full(ev.shape, np.iinfo(np.int64).max, dtype=np.int64)
        for j, ch in enumerate(a.channels):
            if ch in jammed:
                continue
            b = ev + j * a.beacon_stride
            w = b // s.T_s
            off = b - w * s.T_s
            ok = (off + width <= s.d_s) & (rot[w % rot.size] == ch) & (b + width <= end)
            if own_adv is not None:
                ok &= ~_blocked(b, own, own_adv.event_span, scan.turnaround, width)
            best = np.where(ok & (b < best), b, best)
        hits = np.flatnonzero(best != np.iinfo(np.int64).max)
        if hits.size:
            found = int(best[hits[0]])
            break
    if found is None:
        return TrialOutcome(None, None, phase, t0_lead, horizon)
    lat = found - phase
    return TrialOutcome(lat, lat + t0_lead, phase, t0_lead, horizon)


def _scanner_of(scan_preset) -> ScannerConfig:
    if isinstance(scan_preset, ScannerConfig):
        return scan_preset
    return validate_preset_catalog().scanner(scan_preset)


def _sweep_chunk(indices, *, adv_dev, scan_dev, horizon, seed, key, keep_every):
    T_s = scan_dev.scanner.T_s
    out = []
    for i in indices:
        rng = trial_rng(seed, key, i)
        phase = int(rng.integers(0, T_s))
        out.append(simulate_pair(adv_dev, scan_dev, phase, horizon, rng, keep_every=keep_every))
    return out


def run_trials(
    adv_dev: DeviceConfig,
    scan_dev: DeviceConfig,
    trials: int,
    horizon: TimeMicros = DEFAULT_HORIZON,
    rng_seed: int = 0,
    keep_every: int = 1,
    workers: int = 1,
    chunk: int = 250,
) -> List[TrialOutcome]:
    """Independent trials with ``phase ~ U[0, T_s)``; trial ``i`` uses stream ``(seed, scenario, i)``."""
    keep_every = max(int(keep_every), 1)
    key = scenario_key("pair", adv_dev, scan_dev, horizon, keep_every)
    fn = functools.partial(
        _sweep_chunk, adv_dev=adv_dev, scan_dev=scan_dev, horizon=horizon,
        seed=rng_seed, key=key, keep_every=keep_every,
    )
    parts = run_chunks(fn, chunk_ranges(trials, chunk), workers)
    return [o for part in parts for o in part]


def summarize(T_a0: TimeMicros, outcomes: Sequence[TrialOutcome]) -> SweepResult:
    done = [o for o in outcomes if not o.censored]
    if done:
        lat = [o.latency_from_first_beacon for o in done]
        mx, mean = max(lat), math.fsum(lat) / len(lat)
        mx_t0 = max(o.latency_from_t0 for o in done)
    else:
        mx = mean = mx_t0 = None
    return SweepResult(T_a0, mx, mean, len(outcomes) - len(done), len(outcomes), mx_t0)


def sweep_latency(
    T_a0_grid: Sequence[TimeMicros],
    scan_preset="SCAN_MODE_LOW_POWER",
    trials: int = 1000,
    horizon: TimeMicros = DEFAULT_HORIZON,
    rng_seed: int = 0,
    *,
    workers: int = 1,
    keep_every: int = 1,
    bidirectional: bool = False,
    adv_template: Optional[AdvertiserConfig] = None,
) -> List[SweepResult]:
    """Max/mean latency per ``T_a0`` for a one-way BLE discovery.

    With ``bidirectional=True`` the scanner advertises with the same
    ``T_a0`` and its own beacons punch holes in its scan windows.
    """
    if len(T_a0_grid) == 0:
        raise ValueError("T_a0 grid is empty")
    scanner = _scanner_of(scan_preset)
    template = adv_template or AdvertiserConfig(T_a0=100_000)
    results = []
    for ta0 in T_a0_grid:
        a = AdvertiserConfig(
            T_a0=int(ta0), rho_max=template.rho_max, packet_bytes=template.packet_bytes,
            channels=template.channels, inter_beacon_gap=template.inter_beacon_gap,
        )
        adv_dev = DeviceConfig(advertiser=a)
        scan_dev = DeviceConfig(advertiser=a if bidirectional else None, scanner=scanner)
        outcomes = run_trials(adv_dev, scan_dev, trials, horizon, rng_seed, keep_every, workers)
        results.append(summarize(int(ta0), outcomes))
    return results


def degraded_beacon_drop(
    adv: AdvertiserConfig,
    scan_preset,
    k: int,
    trials: int = 1000,
    horizon: TimeMicros = DEFAULT_HORIZON,
    rng_seed: int = 0,
    workers: int = 1,
) -> SweepResult:
    """Latency statistics when only every k-th advertising event goes on air.

    ``k=1`` is the undisturbed sweep; ``k=2`` drops every second event.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return sweep_latency(
        [adv.T_a0], scan_preset, trials, horizon, rng_seed,
        workers=workers, keep_every=k, adv_template=adv,
    )[0]
