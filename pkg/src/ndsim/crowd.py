"""Discovery success in a crowd of identically configured devices.

Device 0 is the target advertiser and device 1 the target scanner; every
device advertises with the shared configuration and the scanner also
punches self-blocking holes into its windows.  Two beacons on the same
channel that overlap in time are both lost (no capture effect).  Because
all devices send the same channel train with the same intra-event spacing,
two events collide on every channel iff their start times differ by less
than one beacon airtime.

Times inside a trial are relative to ``t0``, the moment all devices are in
range; schedules that began before ``t0`` appear as negative times.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import AdvertiserConfig, DeviceConfig, ScannerConfig, TimeMicros, validate_preset_catalog
from .parallel import chunk_ranges, run_chunks
from .rng import sample_rho, scenario_key, trial_rng

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> Tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class SuccessEstimate:
    success_probability: float
    wilson_ci_95: Tuple[float, float]
    trials: int
    successes: int

    @classmethod
    def from_counts(cls, successes: int, trials: int) -> "SuccessEstimate":
        return cls(successes / trials, wilson_interval(successes, trials), trials, successes)

    @property
    def failure_probability(self) -> float:
        return 1.0 - self.success_probability


@dataclass(frozen=True)
class CrowdScenario:
    n_devices: int
    config: DeviceConfig
    deadline: TimeMicros = 10_000_000
    trials: int = 10_000
    target_pair: Tuple[int, int] = (0, 1)
    # "t0": deadline counts from entering range; "first_beacon": from the
    # target advertiser's first beacon after t0
    deadline_from: str = "t0"

    def __post_init__(self):
        if self.n_devices < 2:
            raise ValueError("a crowd needs at least two devices")
        if self.config.advertiser is None or self.config.scanner is None:
            raise ValueError("crowd devices must both advertise and scan")
        if self.deadline < 0:
            raise ValueError("deadline must be non-negative")
        if self.deadline_from not in ("t0", "first_beacon"):
            raise ValueError(f"unknown deadline reference {self.deadline_from!r}")
        a, b = self.target_pair
        if a == b or not (0 <= a < self.n_devices and 0 <= b < self.n_devices):
            raise ValueError(f"bad target pair {self.target_pair}")

    @property
    def events_per_device(self) -> int:
        adv = self.config.advertiser
        lead = adv.T_a0 + adv.rho_max
        span = self.deadline + 2 * lead + adv.event_span
        return span // adv.T_a0 + 2


@dataclass
class CrowdTrial:
    """Random draws of one trial: event starts per device, scanner phase and first channel."""

    events: np.ndarray  # (n_devices, n_events), rows sorted
    scan_phase: int  # the window in progress (or last ended) at t0 began scan_phase µs before t0
    first_channel_index: int


def draw_crowd_trial(scenario: CrowdScenario, rng: np.random.Generator) -> CrowdTrial:
    adv = scenario.config.advertiser
    scan = scenario.config.scanner
    n, m = scenario.n_devices, scenario.events_per_device
    lead = adv.T_a0 + adv.rho_max
    first = -rng.integers(0, lead, size=n)
    gaps = adv.T_a0 + sample_rho(rng, adv.rho_max, (n, m - 1))
    events = np.empty((n, m), dtype=np.int64)
    events[:, 0] = first
    np.cumsum(gaps, axis=1, out=events[:, 1:])
    events[:, 1:] += first[:, None]
    psi = int(rng.integers(0, scan.T_s))
    c0 = int(rng.integers(0, len(scan.channel_rotation)))
    return CrowdTrial(events, psi, c0)


def _reorder(events: np.ndarray, target_pair) -> np.ndarray:
    a, b = target_pair
    if (a, b) == (0, 1):
        return events
    rest = [i for i in range(events.shape[0]) if i not in (a, b)]
    return events[[a, b] + rest]


def _decide(batch: List[CrowdTrial], scenario: CrowdScenario) -> np.ndarray:
    """Vectorised success flags for a batch of trials."""
    adv: AdvertiserConfig = scenario.config.advertiser
    scan: ScannerConfig = scenario.config.scanner
    ta = scenario.config.turnaround
    w = adv.omega
    ev = np.stack([_reorder(t.events, scenario.target_pair) for t in batch])  # (B, n, m)
    B, n, m = ev.shape
    psi = np.array([t.scan_phase for t in batch], dtype=np.int64)[:, None]
    c0 = np.array([t.first_channel_index for t in batch], dtype=np.int64)[:, None]
    rot = np.asarray(scan.channel_rotation)

    target = ev[:, 0, :]  # (B, m)
    if scenario.deadline_from == "t0":
        ref = np.zeros((B, 1), dtype=np.int64)
    else:
        masked = np.where(target >= 0, target, np.iinfo(np.int64).max)
        ref = masked.min(axis=1, keepdims=True)
    end = ref + scenario.deadline

    # collision partners: every other device's event starts, sorted per trial
    others = np.sort(ev[:, 1:, :].reshape(B, -1), axis=1)
    span = int(others.max() - others.min()) + 4 * w + 1
    offs = (np.arange(B, dtype=np.int64) * span)[:, None]
    flat = (others - others.min() + offs).ravel()
    base = others.min()

    # self-blocking holes of the scanner device
    own = ev[:, 1, :]
    own_flat = (own - base + offs).ravel()
    hole_lo = ta
    hole_hi = adv.event_span + ta

    ok_any = np.zeros(B, dtype=bool)
    for j, ch in enumerate(adv.channels):
        b = target + j * adv.beacon_stride
        k = (b + psi) // scan.T_s
        off = b + psi - k * scan.T_s
        cand = (b >= ref) & (b + w <= end) & (k >= 0) & (off + w <= scan.d_s)
        cand &= rot[(c0 + k) % rot.size] == ch
        if not cand.any():
            continue
        # nearest other event start around each target event start
        key = target - base + offs
        i = np.searchsorted(flat, key.ravel()).reshape(B, m)
        lo = np.take(flat, np.clip(i - 1, 0, flat.size - 1))
        hi = np.take(flat, np.clip(i, 0, flat.size - 1))
        collide = ((i > 0) & (key - lo < w)) | ((i < flat.size) & (hi - key < w))
        # own event whose hole could cover this beacon: last one starting before b + w + ta
        bk = b - base + offs
        io = np.searchsorted(own_flat, (bk + w + hole_lo).ravel(), side="left").reshape(B, m) - 1
        own_start = np.take(own_flat, np.clip(io, 0, own_flat.size - 1))
        same_trial = (io >= 0) & (own_start >= offs)
        blocked = same_trial & (own_start + hole_hi > bk)
        ok_any |= (cand & ~collide & ~blocked).any(axis=1)
    return ok_any


def _crowd_chunk(indices, *, scenario, seed, key):
    batch = [draw_crowd_trial(scenario, trial_rng(seed, key, i)) for i in indices]
    return int(_decide(batch, scenario).sum())


def simulate_crowd(
    scenario: CrowdScenario, rng_seed: int = 0, workers: int = 1, chunk: int = 200
) -> SuccessEstimate:
    """Fraction of trials in which the target scanner receives a clean target beacon in time."""
    key = scenario_key("crowd", scenario)
    if scenario.deadline == 0:
        return SuccessEstimate.from_counts(0, scenario.trials)
    fn = functools.partial(_crowd_chunk, scenario=scenario, seed=rng_seed, key=key)
    wins = sum(run_chunks(fn, chunk_ranges(scenario.trials, chunk), workers))
    return SuccessEstimate.from_counts(wins, scenario.trials)


def trial_success(scenario: CrowdScenario, trial: CrowdTrial) -> bool:
    return bool(_decide([trial], scenario)[0])


def crowd_sweep(
    scan_preset,
    T_a0_list: Sequence[TimeMicros],
    n_devices: int = 100,
    deadline: TimeMicros = 10_000_000,
    trials: int = 10_000,
    rng_seed: int = 0,
    workers: int = 1,
    deadline_from: str = "t0",
) -> List[Tuple[TimeMicros, SuccessEstimate]]:
    """Crowd success probability per advertising interval for one scan mode."""
    if len(T_a0_list) == 0:
        raise ValueError("T_a0 list is empty")
    scanner = scan_preset if isinstance(scan_preset, ScannerConfig) else validate_preset_catalog().scanner(scan_preset)
    out = []
    for ta0 in T_a0_list:
        dev = DeviceConfig(advertiser=AdvertiserConfig(T_a0=int(ta0)), scanner=scanner)
        sc = CrowdScenario(n_devices, dev, deadline, trials, deadline_from=deadline_from)
        out.append((int(ta0), simulate_crowd(sc, rng_seed, workers)))
    return out


def generic_crowd(
    n_devices: int,
    pi_config: DeviceConfig,
    deadline: Optional[TimeMicros] = None,
    trials: int = 10_000,
    rng_seed: int = 0,
    workers: int = 1,
) -> SuccessEstimate:
    """Crowd success for a single-channel periodic-interval schedule.

    ``deadline`` defaults to the schedule's scan interval, which is its
    worst-case one-way latency when ``T_a = d_s - omega``.
    """
    adv = pi_config.advertiser
    if adv is None or not adv.is_generic or adv.rho_max != 0:
        raise ValueError("generic_crowd expects a single-channel schedule without random delay")
    if deadline is None:
        deadline = pi_config.scanner.T_s
    return simulate_crowd(CrowdScenario(n_devices, pi_config, deadline, trials), rng_seed, workers)


def rescaled_pi_config(pi_config: DeviceConfig, k: int) -> DeviceConfig:
    """Apply the ``(beta/k, gamma*k)`` trade to a ``T_a = d_s - omega`` schedule.

    Beacons become ``k`` times sparser and windows stretch to keep one beacon
    per window; the scan interval is kept, so the latency target is unchanged.
    """
    adv, scan = pi_config.advertiser, pi_config.scanner
    T_a = adv.T_a0 * k
    new_adv = AdvertiserConfig(
        T_a0=T_a, rho_max=0, packet_bytes=adv.packet_bytes,
        channels=adv.channels, inter_beacon_gap=adv.inter_beacon_gap,
    )
    new_scan = ScannerConfig(T_s=scan.T_s, d_s=T_a + adv.omega, channel_rotation=scan.channel_rotation)
    return DeviceConfig(advertiser=new_adv, scanner=new_scan, turnaround=pi_config.turnaround)


# -- timeline-level collision helpers -----------------------------------------

def events_collide(e1: TimeMicros, e2: TimeMicros, omega: TimeMicros) -> bool:
    """Two identical channel trains overlap on some channel iff their starts are < omega apart."""
    return abs(e1 - e2) < omega


def pairwise_collision_sequence(
    adv: AdvertiserConfig, rng: np.random.Generator, n_events: int
) -> np.ndarray:
    """Collision flag of the k-th event pair of two devices with independent phases.

    Event ``k`` of one device is paired with the nearest event of the other.
    """
    lead = adv.T_a0 + adv.rho_max
    a = rng.integers(0, lead) + np.concatenate(([0], np.cumsum(adv.T_a0 + sample_rho(rng, adv.rho_max, n_events - 1))))
    b = rng.integers(0, lead) + np.concatenate(([0], np.cumsum(adv.T_a0 + sample_rho(rng, adv.rho_max, n_events + 1))))
    i = np.clip(np.searchsorted(b, a), 1, b.size - 1)
    nearest = np.minimum(np.abs(b[i] - a), np.abs(b[i - 1] - a))
    return nearest < adv.omega


def conditional_collision_probability(
    adv: AdvertiserConfig, n_events: int = 200, trials: int = 20_000, rng_seed: int = 0
) -> Tuple[float, int]:
    """Estimate P(pair k+1 collides | pair k collided); returns ``(estimate, conditioning count)``.

    Trials are seeded so the first pair always collides (phases drawn within
    ``omega`` of each other), which makes the conditioning event common.
    """
    rng = np.random.default_rng(rng_seed)
    hits = total = 0
    for _ in range(trials):
        start = int(rng.integers(0, adv.T_a0))
        delta = int(rng.integers(-adv.omega + 1, adv.omega))
        ga = adv.T_a0 + sample_rho(rng, adv.rho_max, n_events - 1)
        gb = adv.T_a0 + sample_rho(rng, adv.rho_max, n_events - 1)
        a = start + np.concatenate(([0], np.cumsum(ga)))
        b = start + delta + np.concatenate(([0], np.cumsum(gb)))
        col = np.abs(a - b) < adv.omega
        prev, nxt = col[:-1], col[1:]
        total += int(prev.sum())
        hits += int((prev & nxt).sum())
    return (hits / total if total else float("nan")), total
