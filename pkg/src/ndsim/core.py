"""Domain types, the Android/iOS preset catalog and duty-cycle helpers.

All time quantities are integer microseconds (``TimeMicros``).  Helpers
``ms`` and ``us_to_ms`` convert at the edges only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Dict, Mapping, Optional, Tuple

TimeMicros = int

BLE_ADV_CHANNELS: Tuple[int, ...] = (37, 38, 39)
GENERIC_CHANNEL = 0

US_PER_BYTE = 8  # 1 Mbit/s PHY
BLE_MIN_PACKET_BYTES = 16
BLE_MIN_TA0 = 20_000
BLE_MAX_TA0 = 10_240_000
DEFAULT_RHO_MAX = 10_000
DEFAULT_INTER_BEACON_GAP = 150
DEFAULT_TURNAROUND = 150


class ConfigError(ValueError):
    """Raised for configurations that violate a domain invariant."""


def ms(value) -> TimeMicros:
    """Convert milliseconds to integer microseconds, exactly.

    Accepts ints, decimal strings and floats; ``ms(211.25) == 211250``.
    Raises :class:`ConfigError` if the value is not a whole number of µs.
    """
    us = Decimal(str(value)) * 1000
    if us != us.to_integral_value():
        raise ConfigError(f"{value} ms is not a whole number of microseconds")
    return int(us)


def us_to_ms(value: TimeMicros) -> float:
    return value / 1000.0


def _check_channels(channels: Tuple[int, ...]) -> None:
    if not channels:
        raise ConfigError("channel list must be non-empty")
    if tuple(channels) == (GENERIC_CHANNEL,):
        return
    if len(set(channels)) != len(channels):
        raise ConfigError(f"duplicate channels in {channels}")
    bad = [c for c in channels if c not in BLE_ADV_CHANNELS]
    if bad:
        raise ConfigError(f"channels {bad} are not BLE advertising channels")


@dataclass(frozen=True)
class AdvertiserConfig:
    """Advertising schedule: one event every ``T_a0 + rho`` with ``rho ~ U[0, rho_max]``.

    Each event is a train of one beacon per channel, separated by
    ``inter_beacon_gap``.  A channel plan of ``(0,)`` selects the generic
    single-channel protocol, which lifts the BLE range limits.
    """

    T_a0: TimeMicros
    rho_max: TimeMicros = DEFAULT_RHO_MAX
    packet_bytes: int = BLE_MIN_PACKET_BYTES
    channels: Tuple[int, ...] = BLE_ADV_CHANNELS
    inter_beacon_gap: TimeMicros = DEFAULT_INTER_BEACON_GAP

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        _check_channels(self.channels)
        if self.rho_max < 0 or self.inter_beacon_gap < 0:
            raise ConfigError("rho_max and inter_beacon_gap must be non-negative")
        if self.is_generic:
            if self.T_a0 <= 0:
                raise ConfigError("T_a0 must be positive")
            if self.packet_bytes < 1:
                raise ConfigError("packet_bytes must be >= 1")
        else:
            if not BLE_MIN_TA0 <= self.T_a0 <= BLE_MAX_TA0:
                raise ConfigError(
                    f"BLE T_a0 must lie in [{BLE_MIN_TA0}, {BLE_MAX_TA0}] us, got {self.T_a0}"
                )
            if self.packet_bytes < BLE_MIN_PACKET_BYTES:
                raise ConfigError(f"BLE beacons carry at least {BLE_MIN_PACKET_BYTES} bytes")

    @property
    def is_generic(self) -> bool:
        return self.channels == (GENERIC_CHANNEL,)

    @property
    def omega(self) -> TimeMicros:
        """Airtime of one beacon."""
        return self.packet_bytes * US_PER_BYTE

    @property
    def beacon_stride(self) -> TimeMicros:
        """Offset between consecutive beacon starts inside one event."""
        return self.omega + self.inter_beacon_gap

    @property
    def event_span(self) -> TimeMicros:
        """Time from the first beacon start to the last beacon end of an event."""
        return len(self.channels) * self.omega + (len(self.channels) - 1) * self.inter_beacon_gap

    @property
    def mean_period(self) -> Fraction:
        return Fraction(self.T_a0) + Fraction(self.rho_max, 2)


@dataclass(frozen=True)
class ScannerConfig:
    T_s: TimeMicros
    d_s: TimeMicros
    channel_rotation: Tuple[int, ...] = BLE_ADV_CHANNELS

    def __post_init__(self):
        object.__setattr__(self, "channel_rotation", tuple(self.channel_rotation))
        _check_channels(self.channel_rotation)
        if not 0 < self.d_s <= self.T_s:
            raise ConfigError(f"need 0 < d_s <= T_s, got d_s={self.d_s}, T_s={self.T_s}")


@dataclass(frozen=True)
class DeviceConfig:
    advertiser: Optional[AdvertiserConfig] = None
    scanner: Optional[ScannerConfig] = None
    turnaround: TimeMicros = DEFAULT_TURNAROUND

    def __post_init__(self):
        if self.advertiser is None and self.scanner is None:
            raise ConfigError("a device needs an advertiser, a scanner, or both")
        if self.turnaround < 0:
            raise ConfigError("turnaround must be non-negative")


def duty_cycles(config: DeviceConfig) -> Tuple[Fraction, Fraction]:
    """Return ``(beta, gamma)`` as exact fractions.

    ``beta`` is total beacon airtime per mean advertising period,
    ``gamma`` is ``d_s / T_s``.
    """
    beta = Fraction(0)
    gamma = Fraction(0)
    adv = config.advertiser
    if adv is not None:
        beta = Fraction(len(adv.channels) * adv.omega) / adv.mean_period
    if config.scanner is not None:
        gamma = Fraction(config.scanner.d_s, config.scanner.T_s)
    return beta, gamma


# -- presets -----------------------------------------------------------------

ANDROID_ADVERTISE_MODES: Dict[str, TimeMicros] = {
    "ADVERTISE_MODE_LOW_LATENCY": ms(100),
    "ADVERTISE_MODE_BALANCED": ms(250),
    "ADVERTISE_MODE_LOW_POWER": ms(1000),
}

# name -> (d_s, T_s)
ANDROID_SCAN_MODES: Dict[str, Tuple[TimeMicros, TimeMicros]] = {
    "SCAN_MODE_LOW_POWER": (ms(512), ms(5120)),
    "SCAN_MODE_BALANCED": (ms(1024), ms(4096)),
    "SCAN_MODE_LOW_LATENCY": (ms(4096), ms(4096)),
}

IOS_ADVERTISING_INTERVALS_MS = (
    "152.5", "211.25", "318.75", "417.5", "546.25", "760", "852.5", "1022.5", "1285.0",
)
IOS_ADVERTISE_MODES: Dict[str, TimeMicros] = {
    f"IOS_{i}": ms(v) for i, v in enumerate(IOS_ADVERTISING_INTERVALS_MS, start=1)
}


@dataclass(frozen=True)
class ModePreset:
    name: str
    advertiser: Optional[AdvertiserConfig] = None
    scanner: Optional[ScannerConfig] = None

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.advertiser is not None:
            out["advertiser"] = advertiser_to_dict(self.advertiser)
        if self.scanner is not None:
            out["scanner"] = scanner_to_dict(self.scanner)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModePreset":
        adv = data.get("advertiser")
        scan = data.get("scanner")
        return cls(
            name=data["name"],
            advertiser=advertiser_from_dict(adv) if adv is not None else None,
            scanner=scanner_from_dict(scan) if scan is not None else None,
        )


@dataclass
class PresetCatalog:
    """Named advertiser/scanner presets.  Ships the Android modes and the iOS interval list."""

    presets: Dict[str, ModePreset] = field(default_factory=dict)

    def add(self, preset: ModePreset) -> None:
        self.presets[preset.name] = preset

    def lookup(self, name: str) -> ModePreset:
        try:
            return self.presets[name]
        except KeyError:
            raise KeyError(f"unknown preset {name!r}; known: {sorted(self.presets)}") from None

    def advertiser(self, name: str) -> AdvertiserConfig:
        adv = self.lookup(name).advertiser
        if adv is None:
            raise KeyError(f"preset {name!r} has no advertiser part")
        return adv

    def scanner(self, name: str) -> ScannerConfig:
        scan = self.lookup(name).scanner
        if scan is None:
            raise KeyError(f"preset {name!r} has no scanner part")
        return scan

    def advertiser_names(self):
        return [n for n, p in self.presets.items() if p.advertiser is not None]

    def scanner_names(self):
        return [n for n, p in self.presets.items() if p.scanner is not None]

    def combinations(self):
        """Every Android (advertise mode, scan mode) pair as ``(name, DeviceConfig)``."""
        out = []
        for a in ANDROID_ADVERTISE_MODES:
            for s in ANDROID_SCAN_MODES:
                dev = DeviceConfig(advertiser=self.advertiser(a), scanner=self.scanner(s))
                out.append((f"{a}+{s}", dev))
        return out

    def to_json(self) -> str:
        return json.dumps([p.to_dict() for p in self.presets.values()], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PresetCatalog":
        cat = cls()
        for item in json.loads(text):
            cat.add(ModePreset.from_dict(item))
        return cat


def validate_preset_catalog() -> PresetCatalog:
    """Build the shipped catalog: 3 Android advertise modes, 3 scan modes, 9 iOS intervals."""
    cat = PresetCatalog()
    for name, ta0 in ANDROID_ADVERTISE_MODES.items():
        cat.add(ModePreset(name, advertiser=AdvertiserConfig(T_a0=ta0)))
    for name, (d_s, T_s) in ANDROID_SCAN_MODES.items():
        cat.add(ModePreset(name, scanner=ScannerConfig(T_s=T_s, d_s=d_s)))
    for name, ta0 in IOS_ADVERTISE_MODES.items():
        cat.add(ModePreset(name, advertiser=AdvertiserConfig(T_a0=ta0)))
    return cat


def catalog_ta0_values(catalog: Optional[PresetCatalog] = None) -> list:
    """Sorted distinct T_a0 values of all advertiser presets (Android + iOS)."""
    cat = catalog or validate_preset_catalog()
    return sorted({cat.advertiser(n).T_a0 for n in cat.advertiser_names()})


# -- (de)serialization ---------------------------------------------------------

def advertiser_to_dict(adv: AdvertiserConfig) -> dict:
    return {
        "T_a0": adv.T_a0,
        "rho_max": adv.rho_max,
        "packet_bytes": adv.packet_bytes,
        "channels": list(adv.channels),
        "inter_beacon_gap": adv.inter_beacon_gap,
    }


def advertiser_from_dict(data: Mapping) -> AdvertiserConfig:
    kwargs = dict(data)
    if "channels" in kwargs:
        kwargs["channels"] = tuple(kwargs["channels"])
    return AdvertiserConfig(**kwargs)


def scanner_to_dict(scan: ScannerConfig) -> dict:
    return {"T_s": scan.T_s, "d_s": scan.d_s, "channel_rotation": list(scan.channel_rotation)}


def scanner_from_dict(data: Mapping) -> ScannerConfig:
    kwargs = dict(data)
    if "channel_rotation" in kwargs:
        kwargs["channel_rotation"] = tuple(kwargs["channel_rotation"])
    return ScannerConfig(**kwargs)


def device_to_dict(dev: DeviceConfig) -> dict:
    return {
        "advertiser": advertiser_to_dict(dev.advertiser) if dev.advertiser else None,
        "scanner": scanner_to_dict(dev.scanner) if dev.scanner else None,
        "turnaround": dev.turnaround,
    }


def device_from_dict(data: Mapping) -> DeviceConfig:
    adv = data.get("advertiser")
    scan = data.get("scanner")
    return DeviceConfig(
        advertiser=advertiser_from_dict(adv) if adv else None,
        scanner=scanner_from_dict(scan) if scan else None,
        turnaround=data.get("turnaround", DEFAULT_TURNAROUND),
    )
