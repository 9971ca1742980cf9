"""GPS handling: local tangent-plane conversion, UE-BS angles, calibration.

Coordinates are converted with an equirectangular approximation (UE-BS
distances here are well under a kilometer, where the error is far below one
beam width).  Angles are degrees wrapped to (-180, 180]; each scenario has a
calibration angle that rotates the UE azimuth so the camera's central pixel
maps to roughly zero degrees, i.e. the middle of the beam codebook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_378_137.0
_DEG_TO_M = EARTH_RADIUS_M * math.pi / 180.0

# Calibration angles (degrees) of the four measured roadside scenarios.
# Synthetic scenarios carry their own angle computed from world geometry.
DEFAULT_CALIBRATIONS = {31: -50.52, 32: 44.8, 33: 55.6, 34: -60.0}


def wrap_degrees(angle: float) -> float:
    """Wrap an angle in degrees into (-180, 180].

    Uses fmod plus one conditional step so that in-range angles pass through
    bit-exactly and wrapping is an exact operation (fmod is exact, and the
    final +-360 adjustment is exact by Sterbenz's lemma).
    """
    r = math.fmod(angle, 360.0)
    if r > 180.0:
        r -= 360.0
    elif r <= -180.0:
        r += 360.0
    return r


@dataclass(frozen=True)
class GpsFix:
    """WGS84 position in decimal degrees."""

    latitude: float
    longitude: float

    def __post_init__(self):
        if not abs(self.latitude) <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not abs(self.longitude) <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")


@dataclass(frozen=True)
class CalibratedAngle:
    """Azimuth in degrees, wrapped to (-180, 180]."""

    angle: float

    def __post_init__(self):
        if not -180.0 < self.angle <= 180.0:
            raise ValueError(f"angle {self.angle} not wrapped to (-180, 180]")


@dataclass(frozen=True)
class ScenarioCalibration:
    """Per-scenario rotation aligning the central pixel to ~0 degrees."""

    scenario_id: int
    theta: float

    def __post_init__(self):
        if self.scenario_id <= 0:
            raise ValueError(f"scenario id must be positive, got {self.scenario_id}")


def to_local_xy(ue: GpsFix, bs: GpsFix) -> tuple[float, float]:
    """Local tangent-plane offsets (east, north) of UE relative to BS, meters."""
    x = (ue.longitude - bs.longitude) * math.cos(math.radians(bs.latitude)) * _DEG_TO_M
    y = (ue.latitude - bs.latitude) * _DEG_TO_M
    return x, y


def relative_angle(ue: GpsFix, bs: GpsFix) -> CalibratedAngle:
    """Four-quadrant azimuth of the UE as seen from the BS, degrees."""
    dx, dy = to_local_xy(ue, bs)
    if dx == 0.0 and dy == 0.0:
        raise ValueError("UE and BS coincide; relative angle undefined")
    return CalibratedAngle(math.degrees(math.atan2(dy, dx)))


def calibrate(raw: CalibratedAngle, cal: ScenarioCalibration) -> CalibratedAngle:
    """Rotate a raw azimuth by the scenario angle, wrapped to (-180, 180]."""
    return CalibratedAngle(wrap_degrees(raw.angle - cal.theta))


def uncalibrate(calibrated: CalibratedAngle, cal: ScenarioCalibration) -> CalibratedAngle:
    """Inverse of :func:`calibrate`."""
    return CalibratedAngle(wrap_degrees(calibrated.angle + cal.theta))


def flip_angle(a: CalibratedAngle) -> CalibratedAngle:
    """Negate an azimuth (horizontal mirror).

    Involution everywhere except the wrap fixed point: 180 maps to 180.
    """
    return CalibratedAngle(wrap_degrees(-a.angle))


def ue_bs_distance(ue: GpsFix, bs: GpsFix) -> float:
    """Euclidean UE-BS distance on the local tangent plane, meters."""
    x, y = to_local_xy(ue, bs)
    return math.hypot(x, y)
