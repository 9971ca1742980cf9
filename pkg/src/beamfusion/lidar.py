"""Point-cloud handling: BEV rasterization, background handling, augmentation.

Point clouds are (N, 4) float arrays of x, y, z, intensity in the BS frame
(x forward-ish, y lateral, z up).  The bird's-eye view packs per-cell height,
intensity, and density into three [0, 1] planes, which downstream code treats
like an RGB image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import derive_rng

# Density saturates once a cell holds DENSITY_CAP points: ln(N+1)/ln(cap).
DENSITY_CAP = 64.0


@dataclass(frozen=True)
class BevRoi:
    """Axis-aligned region of interest in meters."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max and self.z_min < self.z_max):
            raise ValueError(f"degenerate roi {self}")


# Default desk-scale grid: 64 x 64 cells covering the road area in front of
# the sensor, symmetric in y so a horizontal flip mirrors rows exactly.
DEFAULT_ROI = BevRoi(0.0, 64.0, -32.0, 32.0, -1.0, 4.0)
DEFAULT_CELL_SIZE = 1.0


@dataclass
class BevImage:
    """planes: (3, H, W) float32 in [0, 1] -- height, intensity, density."""

    planes: np.ndarray
    roi: BevRoi
    cell_size: float


@dataclass
class BackgroundModel:
    """Per-cell fraction of frames containing at least one point."""

    occupancy: np.ndarray  # (H, W) in [0, 1]
    n_frames: int
    roi: BevRoi
    cell_size: float
    intensity_ref: float  # normalizer for the BEV intensity channel


def _grid_shape(roi: BevRoi, cell_size: float) -> tuple[int, int]:
    h = math.ceil((roi.y_max - roi.y_min) / cell_size)
    w = math.ceil((roi.x_max - roi.x_min) / cell_size)
    return h, w


def _cell_indices(points: np.ndarray, roi: BevRoi, cell_size: float):
    """Row/col indices of in-roi points plus the inclusion mask."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    inside = (
        (x >= roi.x_min) & (x < roi.x_max)
        & (y >= roi.y_min) & (y < roi.y_max)
        & (z >= roi.z_min) & (z <= roi.z_max)
    )
    rows = np.floor((y[inside] - roi.y_min) / cell_size).astype(np.int64)
    cols = np.floor((x[inside] - roi.x_min) / cell_size).astype(np.int64)
    return rows, cols, inside


def to_bev(
    points: np.ndarray,
    roi: BevRoi = DEFAULT_ROI,
    cell_size: float = DEFAULT_CELL_SIZE,
    intensity_ref: float = 1.0,
) -> BevImage:
    """Rasterize a point cloud to a 3-plane bird's-eye view.

    Per cell: height = (max z - z_min)/(z_max - z_min), intensity =
    max intensity / intensity_ref clipped to 1, density =
    min(1, ln(N+1)/ln(DENSITY_CAP)).  Cells without points are 0 everywhere.
    """
    if cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    h, w = _grid_shape(roi, cell_size)
    planes = np.zeros((3, h, w), dtype=np.float32)
    if len(points) == 0:
        return BevImage(planes, roi, cell_size)

    rows, cols, inside = _cell_indices(points, roi, cell_size)
    if len(rows) == 0:
        return BevImage(planes, roi, cell_size)
    z = points[inside, 2]
    intensity = points[inside, 3]
    flat = rows * w + cols

    z_plane = np.full(h * w, -np.inf)
    np.maximum.at(z_plane, flat, z)
    i_plane = np.full(h * w, -np.inf)
    np.maximum.at(i_plane, flat, intensity)
    counts = np.bincount(flat, minlength=h * w).astype(np.float64)

    occupied = counts > 0
    height = np.zeros(h * w)
    height[occupied] = (z_plane[occupied] - roi.z_min) / (roi.z_max - roi.z_min)
    intens = np.zeros(h * w)
    intens[occupied] = np.clip(i_plane[occupied] / intensity_ref, 0.0, 1.0)
    density = np.minimum(1.0, np.log1p(counts) / math.log(DENSITY_CAP))

    planes[0] = height.reshape(h, w)
    planes[1] = intens.reshape(h, w)
    planes[2] = density.reshape(h, w)
    return BevImage(planes, roi, cell_size)


def build_background(
    frames: list[np.ndarray],
    roi: BevRoi = DEFAULT_ROI,
    cell_size: float = DEFAULT_CELL_SIZE,
) -> BackgroundModel:
    """Occupancy-frequency background over a scenario's frames.

    Also caches the 99th-percentile intensity as the scenario's BEV
    intensity normalizer (robust to outliers).
    """
    if len(frames) == 0:
        raise ValueError("need at least one frame to build a background model")
    h, w = _grid_shape(roi, cell_size)
    hits = np.zeros((h, w), dtype=np.float64)
    all_intensities = []
    for frame in frames:
        frame = np.asarray(frame, dtype=np.float64).reshape(-1, 4)
        occupied = np.zeros(h * w, dtype=bool)
        if len(frame):
            rows, cols, inside = _cell_indices(frame, roi, cell_size)
            occupied[rows * w + cols] = True
            all_intensities.append(frame[:, 3])
        hits += occupied.reshape(h, w)
    intensities = np.concatenate(all_intensities) if all_intensities else np.array([1.0])
    i_ref = float(np.percentile(intensities, 99.0))
    if i_ref <= 0:
        i_ref = 1.0
    return BackgroundModel(hits / len(frames), len(frames), roi, cell_size, i_ref)


def filter_background(points: np.ndarray, bg: BackgroundModel, threshold: float = 0.8) -> np.ndarray:
    """Drop points whose cell occupancy is >= threshold, keeping input order.

    Points outside the background roi are kept (no occupancy evidence).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    if len(points) == 0:
        return points.copy()
    rows, cols, inside = _cell_indices(points, bg.roi, bg.cell_size)
    keep = np.ones(len(points), dtype=bool)
    occ = bg.occupancy[rows, cols]
    inside_idx = np.flatnonzero(inside)
    keep[inside_idx[occ >= threshold]] = False
    return points[keep]


def crop_fov(points: np.ndarray, azimuth_min: float, azimuth_max: float) -> np.ndarray:
    """Keep points whose azimuth atan2(y, x) in degrees lies in the interval.

    The interval is half-open (min, max]; (-180, 180] is the identity.
    """
    if not azimuth_min < azimuth_max:
        raise ValueError(f"empty azimuth interval ({azimuth_min}, {azimuth_max})")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    if len(points) == 0:
        return points.copy()
    az = np.degrees(np.arctan2(points[:, 1], points[:, 0]))
    return points[(az > azimuth_min) & (az <= azimuth_max)]


def augment_pointcloud(
    points: np.ndarray,
    drop_fraction: float = 0.1,
    jitter_sigma: float = 0.02,
    rng_seed: int = 0,
) -> np.ndarray:
    """Random down-sampling plus small Gaussian position jitter.

    Drops floor(drop_fraction * N) points uniformly (order of survivors
    preserved) and perturbs each surviving x, y, z by N(0, jitter_sigma).
    Intensities are untouched.  Deterministic given the seed.
    """
    if not 0.0 <= drop_fraction < 1.0:
        raise ValueError(f"drop_fraction must be in [0, 1), got {drop_fraction}")
    if jitter_sigma < 0:
        raise ValueError(f"jitter_sigma must be >= 0, got {jitter_sigma}")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    n = len(points)
    rng = derive_rng(rng_seed, "pointcloud-augment")
    n_drop = int(drop_fraction * n)
    if n_drop > 0:
        dropped = rng.choice(n, size=n_drop, replace=False)
        keep = np.ones(n, dtype=bool)
        keep[dropped] = False
        points = points[keep]
    else:
        points = points.copy()
    if jitter_sigma > 0 and len(points):
        points[:, :3] += rng.normal(0.0, jitter_sigma, size=(len(points), 3))
    return points


def flip_pointcloud(points: np.ndarray) -> np.ndarray:
    """Mirror the lateral axis (y -> -y).  Involution; order preserved."""
    points = np.asarray(points).reshape(-1, 4)
    out = points.copy()
    out[:, 1] = -out[:, 1]
    return out
