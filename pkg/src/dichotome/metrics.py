"""Quantitative evaluation: patch entropy, PSNR, SSIM and gamma sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .core import check_gamma
from .errors import GeometryMismatch, ImageTooSmall
from .image import dequantize, enhance, quantize

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


# --------------------------------------------------------------------------
# patch entropy
# --------------------------------------------------------------------------


@dataclass
class EntropyGrid:
    """Shannon entropy (bits) of each patch of a rows x cols mesh."""

    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def mean(self) -> float:
        return float(self.values.mean())


def _edges(n: int, parts: int) -> np.ndarray:
    step = n // parts
    edges = np.arange(parts + 1) * step
    edges[-1] = n  # remainder goes to the last patch
    return edges


def shannon_entropy(values: np.ndarray, levels: int = 256) -> float:
    counts = np.bincount(np.asarray(values).ravel(), minlength=levels)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def patch_entropy(raster: np.ndarray, mesh: tuple[int, int] = (30, 30)) -> EntropyGrid:
    """Per-patch gray-level entropy of an 8-bit single-channel raster.

    Patch size is ``height // rows`` by ``width // cols``; leftover pixels
    are absorbed by the last row and column of patches.
    """
    raster = np.asarray(raster)
    if raster.ndim == 3 and raster.shape[0] == 1:
        raster = raster[0]
    if raster.ndim != 2:
        raise ValueError(f"expected a single-channel raster, got shape {raster.shape}")
    rows, cols = mesh
    if rows < 1 or cols < 1:
        raise ValueError(f"mesh must be positive, got {mesh}")
    h, w = raster.shape
    if h < rows or w < cols:
        raise ImageTooSmall(f"{h}x{w} image cannot hold a {rows}x{cols} mesh")
    ys, xs = _edges(h, rows), _edges(w, cols)
    values = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            values[i, j] = shannon_entropy(raster[ys[i] : ys[i + 1], xs[j] : xs[j + 1]])
    return EntropyGrid(values)


def entropy_histogram(grid: EntropyGrid, bins: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Counts of patch entropies over equal-width bins on [0, 8]."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    return np.histogram(grid.values, bins=bins, range=(0.0, 8.0))


# --------------------------------------------------------------------------
# full-reference quality metrics
# --------------------------------------------------------------------------


def _as_planes(raster: np.ndarray) -> np.ndarray:
    raster = np.asarray(raster)
    return raster[np.newaxis] if raster.ndim == 2 else raster


def _bit_depth(raster: np.ndarray) -> int:
    return 16 if np.asarray(raster).dtype == np.uint16 else 8


def psnr(reference: np.ndarray, candidate: np.ndarray, bit_depth: int | None = None) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    ref, cand = np.asarray(reference), np.asarray(candidate)
    if ref.shape != cand.shape:
        raise GeometryMismatch(f"shapes differ: {ref.shape} vs {cand.shape}")
    peak = 2 ** (bit_depth or _bit_depth(ref)) - 1
    mse = np.mean((ref.astype(np.float64) - cand.astype(np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(peak * peak / mse))


def _ssim_window() -> np.ndarray:
    x = np.arange(SSIM_WINDOW, dtype=np.float64) - (SSIM_WINDOW - 1) / 2
    g = np.exp(-(x * x) / (2 * SSIM_SIGMA**2))
    return g / g.sum()


def _valid_filter(plane: np.ndarray, window: np.ndarray) -> np.ndarray:
    out = correlate1d(plane, window, axis=0, mode="constant")
    out = correlate1d(out, window, axis=1, mode="constant")
    r = SSIM_WINDOW // 2
    return out[r:-r, r:-r]


def ssim_map(reference: np.ndarray, candidate: np.ndarray, data_range: float = 255.0) -> np.ndarray:
    """Local SSIM of two single-channel planes over the fully covered region."""
    x = np.asarray(reference, dtype=np.float64)
    y = np.asarray(candidate, dtype=np.float64)
    window = _ssim_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_x = _valid_filter(x, window)
    mu_y = _valid_filter(y, window)
    sxx = _valid_filter(x * x, window) - mu_x * mu_x
    syy = _valid_filter(y * y, window) - mu_y * mu_y
    sxy = _valid_filter(x * y, window) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim(reference: np.ndarray, candidate: np.ndarray, data_range: float | None = None) -> float:
    """Mean structural similarity (11x11 Gaussian window, sigma 1.5).

    Multi-channel rasters score as the mean of the per-channel values.
    """
    ref, cand = _as_planes(reference), _as_planes(candidate)
    if ref.shape != cand.shape:
        raise GeometryMismatch(f"shapes differ: {ref.shape} vs {cand.shape}")
    if ref.shape[-1] < SSIM_WINDOW or ref.shape[-2] < SSIM_WINDOW:
        raise ImageTooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    if data_range is None:
        data_range = float(2 ** _bit_depth(reference) - 1)
    scores = [ssim_map(r, c, data_range).mean() for r, c in zip(ref, cand)]
    return float(np.mean(scores))


# --------------------------------------------------------------------------
# gamma sweep
# --------------------------------------------------------------------------


@dataclass
class BenchmarkRecord:
    gamma: float
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float
    psnr_scores: dict[str, float] = field(default_factory=dict)
    ssim_scores: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "psnr_mean": self.psnr_mean,
            "psnr_std": self.psnr_std,
            "ssim_mean": self.ssim_mean,
            "ssim_std": self.ssim_std,
            "psnr_scores": {k: (None if math.isinf(v) else v) for k, v in self.psnr_scores.items()},
            "ssim_scores": dict(self.ssim_scores),
            "errors": dict(self.errors),
        }


def _score_pair(low: np.ndarray, normal: np.ndarray, gamma: float) -> tuple[float, float]:
    if np.shape(low) != np.shape(normal):
        raise GeometryMismatch(f"pair shapes differ: {np.shape(low)} vs {np.shape(normal)}")
    enhanced, _ = enhance(dequantize(_as_planes(low)), gamma)
    out = quantize(enhanced, 8)
    ref = _as_planes(normal)
    if ref.dtype != np.uint8:
        ref = quantize(dequantize(ref).data, 8)
    return psnr(ref, out, 8), ssim(ref, out, 255.0)


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std())


def gamma_sweep(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    gammas: Sequence[float],
    names: Sequence[str] | None = None,
    threads: int | None = None,
) -> list[BenchmarkRecord]:
    """Enhance every low-light image at each gamma and score it.

    Each enhanced image is quantised to 8 bits and compared with its
    normal-light mate. Pairs that fail are logged and recorded in
    ``BenchmarkRecord.errors``; infinite PSNRs are left out of the mean.
    """
    if not pairs:
        raise ValueError("need at least one image pair")
    names = list(names) if names is not None else [f"{i:04d}" for i in range(len(pairs))]
    if len(names) != len(pairs):
        raise ValueError("names and pairs differ in length")
    order = sorted(range(len(pairs)), key=lambda i: names[i])
    records = []
    for gamma in gammas:
        gamma = check_gamma(gamma)

        def job(i: int) -> tuple[float, float] | Exception:
            try:
                return _score_pair(pairs[i][0], pairs[i][1], gamma)
            except Exception as exc:  # noqa: BLE001 - collected per pair
                return exc

        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(job, order))
        else:
            results = [job(i) for i in order]

        rec = BenchmarkRecord(gamma, math.nan, math.nan, math.nan, math.nan)
        for i, res in zip(order, results):
            if isinstance(res, Exception):
                log.warning("pair %s failed at gamma=%g: %s", names[i], gamma, res)
                rec.errors[names[i]] = str(res)
                continue
            rec.psnr_scores[names[i]], rec.ssim_scores[names[i]] = res
        finite = [v for v in rec.psnr_scores.values() if math.isfinite(v)]
        if len(finite) < len(rec.psnr_scores):
            log.warning(
                "gamma=%g: %d identical pair(s) give infinite PSNR; excluded from the mean",
                gamma,
                len(rec.psnr_scores) - len(finite),
            )
        rec.psnr_mean, rec.psnr_std = _mean_std(finite)
        rec.ssim_mean, rec.ssim_std = _mean_std(list(rec.ssim_scores.values()))
        records.append(rec)
    return records


def best_records(records: Sequence[BenchmarkRecord]) -> tuple[BenchmarkRecord, BenchmarkRecord]:
    """Records with the highest mean PSNR and the highest mean SSIM."""
    if not records:
        raise ValueError("no records")

    def key(attr: str):
        return lambda r: -math.inf if math.isnan(getattr(r, attr)) else getattr(r, attr)

    return max(records, key=key("psnr_mean")), max(records, key=key("ssim_mean"))
