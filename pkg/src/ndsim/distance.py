"""Log-distance path loss, distance estimates and the effect of body shadowing."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Tuple, Union

DEFAULT_REF_LOSS_DB = 40.0  # free-space loss at 1 m, 2.4 GHz
DEFAULT_BODY_ATTENUATION_DB = 19.2  # chest to back
CONTACT_THRESHOLD_M = 1.5


@dataclass(frozen=True)
class PathLossModel:
    ref_loss_db_at_1m: float = DEFAULT_REF_LOSS_DB
    exponent: float = 2.0
    body_attenuation_db: float = DEFAULT_BODY_ATTENUATION_DB

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError("path-loss exponent must be positive")
        if self.ref_loss_db_at_1m < 0 or self.body_attenuation_db < 0:
            raise ValueError("attenuations must be non-negative")


def path_loss(distance_m: float, model: PathLossModel = PathLossModel(), shadowed: bool = False) -> float:
    """Attenuation in dB at ``distance_m``; adds the body term when ``shadowed``."""
    if not distance_m > 0:
        raise ValueError("distance must be positive")
    loss = model.ref_loss_db_at_1m + 10.0 * model.exponent * math.log10(distance_m)
    return loss + (model.body_attenuation_db if shadowed else 0.0)


def estimate_distance(observed_loss_db: float, model: PathLossModel = PathLossModel()) -> float:
    """Free-space distance that explains ``observed_loss_db``."""
    if observed_loss_db < 0:
        raise ValueError("observed loss must be non-negative")
    return 10.0 ** ((observed_loss_db - model.ref_loss_db_at_1m) / (10.0 * model.exponent))


def shadow_factor(model: PathLossModel = PathLossModel()) -> float:
    """Multiplicative inflation of the estimate caused by the body term."""
    return 10.0 ** (model.body_attenuation_db / (10.0 * model.exponent))


class Contact(str, enum.Enum):
    RELEVANT = "relevant"
    NOT_RELEVANT = "not_relevant"


class _BeyondThreshold:
    """Distance known only to be far larger than any contact threshold."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BEYOND_THRESHOLD"

    def __str__(self):
        return ">>1 m"


BEYOND_THRESHOLD = _BeyondThreshold()
Distance = Union[float, _BeyondThreshold]


def classify_contact(estimated_distance: Distance, threshold: float = CONTACT_THRESHOLD_M) -> Contact:
    """``RELEVANT`` iff the estimate is at most ``threshold`` metres (inclusive)."""
    if estimated_distance is BEYOND_THRESHOLD:
        return Contact.NOT_RELEVANT
    if estimated_distance < 0:
        raise ValueError("distance must be non-negative")
    return Contact.RELEVANT if estimated_distance <= threshold else Contact.NOT_RELEVANT


# (distance through tissue in cm, equivalent free-space distance in m)
TISSUE_TABLE: Tuple[Tuple[int, Distance], ...] = (
    (20, 0.6),
    (25, 1.0),
    (32, BEYOND_THRESHOLD),
)


def tissue_equivalent(tissue_cm: int) -> Distance:
    """Look up an encoded row; there is no interpolation between rows."""
    for cm, eq in TISSUE_TABLE:
        if cm == tissue_cm:
            return eq
    raise KeyError(f"no tissue row for {tissue_cm} cm; encoded rows: {[r[0] for r in TISSUE_TABLE]}")


def shadowed_estimate(true_m: float, model: PathLossModel = PathLossModel()) -> float:
    """Distance estimate for a true distance ``true_m`` with the body in the path."""
    return estimate_distance(path_loss(true_m, model, shadowed=True), model)
