"""Deterministic synthetic test images.

Stand-ins for photographs that cannot ship with the package: ramps,
checkerboards and a fractal-noise "natural" texture that is dimmed,
brightened or split into a dark object on a bright background.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .image import PlanarImage, dequantize, quantize


def _as_8bit(data: np.ndarray) -> PlanarImage:
    return dequantize(quantize(np.clip(data, 0.0, 1.0), 8))


def gradient_ramp(height: int = 64, width: int = 256) -> PlanarImage:
    ramp = np.linspace(0.0, 1.0, width)
    return _as_8bit(np.broadcast_to(ramp, (1, height, width)))


def checkerboard(height: int = 64, width: int = 64, cell: int = 8) -> PlanarImage:
    yy, xx = np.mgrid[0:height, 0:width]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return _as_8bit(board[np.newaxis])


def natural_texture(height: int = 256, width: int = 256, channels: int = 3, seed: int = 7) -> np.ndarray:
    """Fractal noise in [0, 1] with 1/f-like spectrum and correlated channels."""
    rng = np.random.default_rng(seed)
    lum = np.zeros((height, width))
    for sigma in (32.0, 16.0, 8.0, 4.0, 2.0, 1.0):
        lum += gaussian_filter(rng.standard_normal((height, width)), sigma) * sigma**0.8
    lum = (lum - lum.min()) / (lum.max() - lum.min())
    if channels == 1:
        return lum[np.newaxis]
    planes = []
    for _ in range(channels):
        tint = gaussian_filter(rng.standard_normal((height, width)), 12.0)
        tint /= np.abs(tint).max() + 1e-12
        planes.append(np.clip(lum + 0.12 * tint, 0.0, 1.0))
    return np.stack(planes)


def underexposed(height: int = 240, width: int = 240, seed: int = 7) -> PlanarImage:
    """Dim RGB scene: every sample squeezed into the darkest ~12 % of range."""
    return _as_8bit(0.12 * natural_texture(height, width, 3, seed))


def overexposed(height: int = 240, width: int = 240, seed: int = 11) -> PlanarImage:
    """Bright RGB scene with clipped highlights."""
    return _as_8bit(0.8 + 0.3 * natural_texture(height, width, 3, seed))


def mixed_exposure(height: int = 240, width: int = 320, seed: int = 13) -> PlanarImage:
    """Dark elliptical subject in front of a bright background."""
    tex = natural_texture(height, width, 3, seed)
    yy, xx = np.mgrid[0:height, 0:width]
    cy, cx = height * 0.55, width * 0.45
    inside = ((yy - cy) / (0.3 * height)) ** 2 + ((xx - cx) / (0.2 * width)) ** 2 <= 1.0
    background = 0.72 + 0.25 * tex
    subject = 0.03 + 0.2 * tex
    return _as_8bit(np.where(inside, subject, background))


ALL_FIXTURES = {
    "ramp": gradient_ramp,
    "checkerboard": checkerboard,
    "underexposed": underexposed,
    "overexposed": overexposed,
    "mixed": mixed_exposure,
}
