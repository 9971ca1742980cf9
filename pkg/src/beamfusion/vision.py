"""Camera-image operations: enhancement, masking, photometric augmentation.

Images are (3, H, W) float arrays with values in [0, 1] (RGB).  Every
operation maps [0, 1] images to [0, 1] images and never moves pixels:
geometry-preserving ("safe") transforms only, since beam selection depends
on where things are, not what color they are.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .seeding import derive_rng


def enhance_brightness(image: np.ndarray, gamma: float, gain: float = 1.0) -> np.ndarray:
    """Parametric brightness lift: p -> clip(gain * p**gamma).

    gamma < 1 brightens dark regions (the night-scenario use case).
    """
    if gamma <= 0 or gain <= 0:
        raise ValueError(f"gamma and gain must be positive, got {gamma}, {gain}")
    return np.clip(gain * np.power(image, gamma), 0.0, 1.0)


def apply_mask(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero out background pixels: each channel is multiplied by the mask."""
    image = np.asarray(image)
    mask = np.asarray(mask)
    if image.shape[-2:] != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {image.shape}")
    return image * mask[None, :, :]


def flip_image(image: np.ndarray) -> np.ndarray:
    """Reverse the width axis.  Involution."""
    return np.asarray(image)[..., ::-1].copy()


@dataclass(frozen=True)
class PhotometricParams:
    """Half-widths of the random photometric perturbations.

    Each field bounds a uniform draw around the identity; all-zero params
    make the augmentation a no-op regardless of seed.  Caps keep every
    transform mild enough to preserve scene content.
    """

    brightness: float = 0.0  # additive shift in [-b, b]
    contrast: float = 0.0    # scale about 0.5 by 1 + u, u in [-c, c]
    gamma: float = 0.0       # exponent 1 + u, u in [-g, g]
    hue_shift: float = 0.0   # hue rotation in degrees, u in [-h, h]
    saturation: float = 0.0  # saturation scale 1 + u, u in [-s, s]
    sharpness: float = 0.0   # unsharp-mask amount in [0, s]
    blur_sigma: float = 0.0  # Gaussian blur sigma in [0, b] pixels

    _CAPS = {
        "brightness": 0.5,
        "contrast": 0.9,
        "gamma": 0.9,
        "hue_shift": 90.0,
        "saturation": 0.9,
        "sharpness": 2.0,
        "blur_sigma": 3.0,
    }

    def __post_init__(self):
        for name, cap in self._CAPS.items():
            value = getattr(self, name)
            if not 0.0 <= value <= cap:
                raise ValueError(f"{name}={value} outside [0, {cap}]")


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[0], rgb[1], rgb[2]
    maxc = np.max(rgb, axis=0)
    minc = np.min(rgb, axis=0)
    v = maxc
    spread = maxc - minc
    s = np.where(maxc > 0, spread / np.where(maxc > 0, maxc, 1.0), 0.0)
    safe = np.where(spread > 0, spread, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(spread > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v])


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[0], hsv[1], hsv[2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b])


def augment_photometric(image: np.ndarray, params: PhotometricParams, rng_seed: int = 0) -> np.ndarray:
    """Randomized photometric chain, applied in a fixed order.

    Order: brightness, contrast, gamma, hue, saturation, sharpness, blur.
    Deterministic given (params, rng_seed); pixel positions never change.
    """
    rng = derive_rng(rng_seed, "photometric")
    out = np.asarray(image, dtype=np.float64)

    shift = rng.uniform(-params.brightness, params.brightness)
    out = np.clip(out + shift, 0.0, 1.0)

    scale = 1.0 + rng.uniform(-params.contrast, params.contrast)
    out = np.clip((out - 0.5) * scale + 0.5, 0.0, 1.0)

    exponent = 1.0 + rng.uniform(-params.gamma, params.gamma)
    out = np.power(out, exponent)

    hue_deg = rng.uniform(-params.hue_shift, params.hue_shift)
    sat_scale = 1.0 + rng.uniform(-params.saturation, params.saturation)
    if hue_deg != 0.0 or sat_scale != 1.0:
        hsv = _rgb_to_hsv(out)
        hsv[0] = (hsv[0] + hue_deg / 360.0) % 1.0
        hsv[1] = np.clip(hsv[1] * sat_scale, 0.0, 1.0)
        out = np.clip(_hsv_to_rgb(hsv), 0.0, 1.0)

    amount = rng.uniform(0.0, params.sharpness)
    if amount > 0.0:
        smoothed = np.stack([ndimage.gaussian_filter(c, sigma=1.0, mode="nearest") for c in out])
        out = np.clip(out + amount * (out - smoothed), 0.0, 1.0)

    sigma = rng.uniform(0.0, params.blur_sigma)
    if sigma > 0.0:
        out = np.stack([ndimage.gaussian_filter(c, sigma=sigma, mode="nearest") for c in out])
        out = np.clip(out, 0.0, 1.0)

    return out


def build_scene_mask(frames: list[np.ndarray], diff_threshold: float = 0.1) -> np.ndarray:
    """Street-region mask from temporal motion against the median background.

    The camera is static, so the per-pixel temporal median is background;
    a pixel is masked 1 where any frame deviates from the median by more
    than the threshold (in any channel), dilated by one cell.
    """
    if len(frames) < 3:
        raise ValueError(f"need at least 3 frames for a scene mask, got {len(frames)}")
    if not 0.0 < diff_threshold < 1.0:
        raise ValueError(f"diff_threshold must be in (0, 1), got {diff_threshold}")
    stack = np.stack([np.asarray(f, dtype=np.float64) for f in frames])  # (F, 3, H, W)
    median = np.median(stack, axis=0)
    deviation = np.abs(stack - median).max(axis=1)  # (F, H, W)
    moving = (deviation > diff_threshold).any(axis=0)
    dilated = ndimage.binary_dilation(moving, structure=np.ones((3, 3), dtype=bool))
    return dilated.astype(np.float64)


def polygon_mask(vertices: list[tuple[float, float]], shape: tuple[int, int]) -> np.ndarray:
    """Binary mask from a polygon given as (x, y) pixel-coordinate vertices.

    Even-odd rule evaluated at integer pixel positions.
    """
    if len(vertices) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w]
    inside = np.zeros((h, w), dtype=bool)
    j = len(vertices) - 1
    for i in range(len(vertices)):
        xi, yi = vertices[i]
        xj, yj = vertices[j]
        crosses = (yi > ys) != (yj > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = (xj - xi) * (ys - yi) / (yj - yi) + xi
        inside ^= crosses & (xs < x_at)
        j = i
    return inside.astype(np.float64)
