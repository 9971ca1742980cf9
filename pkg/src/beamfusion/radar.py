"""Radar IQ cube to range-angle / range-velocity magnitude maps.

A cube is a complex (A, S, C) array: antennas x samples-per-chirp x chirps.
The range axis is the unnormalized FFT over samples.  The velocity axis is
the FFT over chirps with a standard center shift (zero Doppler lands exactly
on column C/2).  The angle axis is a zero-padded FFT over antennas evaluated
on a half-bin-offset grid: after centering, column j corresponds to sine-
space direction (2j - a_bins + 1) / a_bins.  That grid is symmetric under
negation, so a horizontal scene mirror is an exact column reversal, and with
a_bins = 64 the columns coincide with the 64-beam codebook directions
(column j <-> beam j + 1).

Maps are max-normalized to [0, 1] (an all-zero map stays zero), so the FFT
scale convention cancels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import derive_rng

DEFAULT_ANGLE_BINS = 64

# Desk-scale cube: 8 antennas, 64 samples per chirp, 16 chirps.
DESK_ANTENNAS = 8
DESK_SAMPLES = 64
DESK_CHIRPS = 16


@dataclass
class RadarMaps:
    """Range-angle and range-velocity magnitude maps plus their concat.

    h_ra: (S, a_bins), h_rv: (S, C), concat: (S, a_bins + C), all in [0, 1].
    """

    h_ra: np.ndarray
    h_rv: np.ndarray

    @property
    def concat(self) -> np.ndarray:
        return np.concatenate([self.h_ra, self.h_rv], axis=1)


def _max_normalize(plane: np.ndarray) -> np.ndarray:
    peak = plane.max() if plane.size else 0.0
    if peak > 0:
        return plane / peak
    return plane


def _range_fft(cube: np.ndarray) -> np.ndarray:
    return np.fft.fft(cube, axis=1)


def angle_bin_sine(j: np.ndarray | int, a_bins: int = DEFAULT_ANGLE_BINS):
    """Sine-space direction of angle-map column j (0-based)."""
    return (2 * np.asarray(j) - a_bins + 1) / a_bins


def range_angle_map(cube: np.ndarray, a_bins: int = DEFAULT_ANGLE_BINS, reduce: str = "mean") -> np.ndarray:
    """(S, a_bins) magnitude map: range FFT then centered angle FFT.

    The cube is modulated by a half-bin phase ramp before the zero-padded
    antenna FFT, which shifts the analysis frequencies onto the symmetric
    grid described in the module docstring.
    """
    cube = np.asarray(cube)
    n_antennas = cube.shape[0]
    if a_bins < n_antennas:
        raise ValueError(f"a_bins={a_bins} smaller than antenna count {n_antennas}")
    ranged = _range_fft(cube)
    ramp = np.exp(-1j * np.pi * np.arange(n_antennas) / a_bins)
    shifted = ranged * ramp[:, None, None]
    spectrum = np.fft.fftshift(np.fft.fft(shifted, n=a_bins, axis=0), axes=0)
    mags = np.abs(spectrum)
    if reduce == "mean":
        collapsed = mags.mean(axis=2)
    elif reduce == "max":
        collapsed = mags.max(axis=2)
    else:
        raise ValueError(f"unknown reduce mode {reduce!r}")
    return collapsed.T  # (S, a_bins)


def range_velocity_map(cube: np.ndarray, reduce: str = "mean") -> np.ndarray:
    """(S, C) magnitude map: range FFT then centered Doppler FFT."""
    cube = np.asarray(cube)
    ranged = _range_fft(cube)
    spectrum = np.fft.fftshift(np.fft.fft(ranged, axis=2), axes=2)
    mags = np.abs(spectrum)
    if reduce == "mean":
        collapsed = mags.mean(axis=0)
    elif reduce == "max":
        collapsed = mags.max(axis=0)
    else:
        raise ValueError(f"unknown reduce mode {reduce!r}")
    return collapsed  # (S, C)


def make_maps(cube: np.ndarray, a_bins: int = DEFAULT_ANGLE_BINS, reduce: str = "mean") -> RadarMaps:
    """Both maps, each max-normalized so a nonzero map peaks at 1."""
    return RadarMaps(
        h_ra=_max_normalize(range_angle_map(cube, a_bins, reduce)),
        h_rv=_max_normalize(range_velocity_map(cube, reduce)),
    )


def augment_radar(
    maps: RadarMaps,
    noise_fraction: float = 0.1,
    rng_seed: int = 0,
    cap: float = 0.1,
) -> RadarMaps:
    """Multiplicative spectral noise: m -> clip(m * (1 + u), 0, 1).

    u is uniform in [-noise_fraction, +noise_fraction]; the fraction is
    capped (default 10%) so the spectrum shape is conserved.
    """
    if noise_fraction < 0:
        raise ValueError(f"noise_fraction must be >= 0, got {noise_fraction}")
    if noise_fraction > cap:
        raise ValueError(f"noise_fraction {noise_fraction} exceeds cap {cap}")
    rng = derive_rng(rng_seed, "radar-augment")
    out = []
    for plane in (maps.h_ra, maps.h_rv):
        u = rng.uniform(-noise_fraction, noise_fraction, size=plane.shape)
        out.append(np.clip(plane * (1.0 + u), 0.0, 1.0))
    return RadarMaps(h_ra=out[0], h_rv=out[1])


def flip_radar(maps: RadarMaps) -> RadarMaps:
    """Mirror a scene horizontally: reverse the angle axis of the RA map and
    the velocity axis of the RV map (lateral velocity changes sign)."""
    return RadarMaps(h_ra=maps.h_ra[:, ::-1].copy(), h_rv=maps.h_rv[:, ::-1].copy())


def synthetic_target_cube(
    mu_range: float,
    mu_doppler: float,
    mu_angle: float,
    n_antennas: int = DESK_ANTENNAS,
    n_samples: int = DESK_SAMPLES,
    n_chirps: int = DESK_CHIRPS,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Single-target cube e^{j 2 pi (mu_R s + mu_D c + mu_A a)}.

    The normalized frequencies are cycles per sample along each axis; a
    half-wavelength array sees mu_angle = 0.5 sin(azimuth).
    """
    a = np.arange(n_antennas)[:, None, None]
    s = np.arange(n_samples)[None, :, None]
    c = np.arange(n_chirps)[None, None, :]
    phase = 2.0 * np.pi * (mu_range * s + mu_doppler * c + mu_angle * a)
    return amplitude * np.exp(1j * phase)
