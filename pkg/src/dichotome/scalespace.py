"""Gaussian scale space, difference-of-Gaussians responses and the
gamma-indexed "dichotomy space" built on top of them."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .core import check_gamma, compute_params
from .errors import ConfigError, GeometryMismatch, ImageTooSmall
from .image import PlanarImage, to_grayscale

MIN_LEVEL_SIZE = 8

DEFAULT_SIGMA2 = (1.0, 2.0, 3.0, 4.0)
DEFAULT_GAMMAS = (0.25, 0.38, 0.5, 1.2, 1.8, 2.0, 2.4, 4.0)

# one colour per gamma of the default set; additive blends of two entries
# are distinguishable from every single entry
DEFAULT_PALETTE = (
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (1.0, 0.5, 0.0),
    (0.5, 0.0, 1.0),
    (0.0, 0.5, 0.5),
    (0.5, 0.5, 0.0),
    (0.5, 0.0, 0.5),
)


@dataclass(frozen=True)
class ScaleSpaceConfig:
    """Parameters of a dichotomy-space run.

    ``t`` at level ``sigma2`` is ``t_numerator / sigma2``. ``delta_t`` is used
    as is when set; otherwise it follows the self-similar sampling rule
    ``delta_t = (s**2 - 1) * t``.
    """

    sigma2_levels: tuple[float, ...] = DEFAULT_SIGMA2
    gamma_set: tuple[float, ...] = DEFAULT_GAMMAS
    subsample_factors: tuple[int, ...] = (1, 2, 3, 4)
    t_numerator: float = 8.192
    delta_t: float | None = 1.0
    s: float | None = None
    thr_plus: float = 0.2
    thr_minus: float = -0.2
    palette: tuple[tuple[float, float, float], ...] = DEFAULT_PALETTE

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma2_levels", tuple(float(v) for v in self.sigma2_levels))
        object.__setattr__(self, "gamma_set", tuple(float(v) for v in self.gamma_set))
        object.__setattr__(self, "subsample_factors", tuple(int(v) for v in self.subsample_factors))
        object.__setattr__(self, "palette", tuple(tuple(float(c) for c in p) for p in self.palette))
        if not self.sigma2_levels:
            raise ConfigError("sigma2_levels must not be empty")
        if any(not v > 0 for v in self.sigma2_levels):
            raise ConfigError("every sigma2 level must be positive")
        if len(self.subsample_factors) < len(self.sigma2_levels):
            raise ConfigError("need one subsample factor per sigma2 level")
        if any(f < 1 for f in self.subsample_factors):
            raise ConfigError("subsample factors must be >= 1")
        if not self.gamma_set:
            raise ConfigError("gamma_set must not be empty")
        for g in self.gamma_set:
            try:
                check_gamma(g)
            except ValueError as exc:
                raise ConfigError(f"invalid gamma {g}: {exc}") from None
        if not self.t_numerator > 0:
            raise ConfigError("t_numerator must be positive")
        if self.delta_t is None:
            if self.s is None or not self.s > 1:
                raise ConfigError("either delta_t or a scale factor s > 1 is required")
        elif not self.delta_t > 0:
            raise ConfigError("delta_t must be positive")
        if not (self.thr_plus > 0 > self.thr_minus):
            raise ConfigError("thresholds must satisfy thr_plus > 0 > thr_minus")
        if len(self.palette) < len(self.gamma_set):
            raise ConfigError("palette needs one colour per gamma")
        if any(len(p) != 3 for p in self.palette):
            raise ConfigError("palette entries must be RGB triples")

    def t_of_level(self, sigma2: float) -> float:
        return self.t_numerator / sigma2

    def delta_t_for(self, t: float) -> float:
        if self.delta_t is not None:
            return self.delta_t
        assert self.s is not None
        return (self.s**2 - 1.0) * t


def _planes(image: PlanarImage | np.ndarray) -> np.ndarray:
    if isinstance(image, PlanarImage):
        return image.data
    return np.asarray(image, dtype=np.float64)


# --------------------------------------------------------------------------
# smoothing and pyramid
# --------------------------------------------------------------------------


def gaussian_kernel(t: float) -> np.ndarray:
    """Sampled 1-D Gaussian of variance ``t``, radius ``ceil(4*sqrt(t))``,
    renormalised to unit sum."""
    if not t > 0:
        raise ValueError(f"variance must be positive, got {t!r}")
    radius = math.ceil(4.0 * math.sqrt(t))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * t))
    return g / g.sum()


def _smooth(data: np.ndarray, t: float) -> np.ndarray:
    kernel = gaussian_kernel(t)
    # half-sample symmetric border (edge pixel repeated, then mirrored):
    # keeps smooth(smooth(I, a), b) == smooth(I, a + b) up to the border
    out = correlate1d(data, kernel, axis=-1, mode="reflect")
    return correlate1d(out, kernel, axis=-2, mode="reflect")


def gaussian_smooth(image: PlanarImage | np.ndarray, t: float) -> PlanarImage | np.ndarray:
    """Separable Gaussian blur of variance ``t`` with mirrored borders.

    Returns the same kind of object it was given.
    """
    out = _smooth(_planes(image), t)
    if isinstance(image, PlanarImage):
        return image.with_data(np.clip(out, 0.0, 1.0))
    return out


def _downsample(data: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return data
    h = data.shape[-2] // factor * factor
    w = data.shape[-1] // factor * factor
    cropped = data[..., :h, :w]
    blocks = cropped.reshape(cropped.shape[:-2] + (h // factor, factor, w // factor, factor))
    return blocks.mean(axis=(-3, -1))


def pyramid_shapes(height: int, width: int, cfg: ScaleSpaceConfig) -> list[tuple[int, int]]:
    """(height, width) of every pyramid level; raises if any is too small."""
    shapes = []
    for level, factor in enumerate(cfg.subsample_factors[: len(cfg.sigma2_levels)]):
        h, w = height // factor, width // factor
        if h < MIN_LEVEL_SIZE or w < MIN_LEVEL_SIZE:
            raise ImageTooSmall(
                f"level {level} (factor {factor}) of a {height}x{width} image would be "
                f"{h}x{w}, below {MIN_LEVEL_SIZE}x{MIN_LEVEL_SIZE}"
            )
        shapes.append((h, w))
    return shapes


def build_pyramid(image: PlanarImage, cfg: ScaleSpaceConfig) -> list[PlanarImage]:
    """Smooth with each sigma2 and block-average down by the level's factor."""
    pyramid_shapes(image.height, image.width, cfg)
    levels = []
    for sigma2, factor in zip(cfg.sigma2_levels, cfg.subsample_factors):
        smoothed = _smooth(image.data, sigma2)
        levels.append(image.with_data(np.clip(_downsample(smoothed, factor), 0.0, 1.0)))
    return levels


# --------------------------------------------------------------------------
# DoG responses
# --------------------------------------------------------------------------


def _pair(data: np.ndarray, t: float, delta_t: float) -> tuple[np.ndarray, np.ndarray]:
    if not t > 0 or not delta_t > 0:
        raise ValueError("t and delta_t must be positive")
    lo = np.clip(_smooth(data, t), 0.0, 1.0)
    hi = np.clip(_smooth(data, t + delta_t), 0.0, 1.0)
    return lo, hi


def _dog_plain(lo: np.ndarray, hi: np.ndarray, delta_t: float) -> np.ndarray:
    return (hi - lo) / delta_t


def _dog_gamma(lo: np.ndarray, hi: np.ndarray, gamma: float, delta_t: float) -> np.ndarray:
    return (np.power(hi, gamma) - np.power(lo, gamma)) / delta_t


def _dog_dichotomy(lo: np.ndarray, hi: np.ndarray, k: float, gamma: float, delta_t: float) -> np.ndarray:
    f_hi = np.abs(np.power(hi, gamma) - hi)
    f_lo = np.abs(np.power(lo, gamma) - lo)
    return k * (f_hi - f_lo) / delta_t


def dog(image: PlanarImage | np.ndarray, t: float, delta_t: float) -> np.ndarray:
    """``(L(t + delta_t) - L(t)) / delta_t``."""
    lo, hi = _pair(_planes(image), t, delta_t)
    return _dog_plain(lo, hi, delta_t)


def dog_gamma(image: PlanarImage | np.ndarray, gamma: float, t: float, delta_t: float) -> np.ndarray:
    """DoG of the gamma-corrected scale space; smoothing happens first."""
    if not gamma >= 0:
        raise ValueError(f"gamma must be non-negative, got {gamma!r}")
    lo, hi = _pair(_planes(image), t, delta_t)
    return _dog_gamma(lo, hi, gamma, delta_t)


def dog_dichotomy(image: PlanarImage | np.ndarray, gamma: float, t: float, delta_t: float) -> np.ndarray:
    """DoG of the normalised dichotomy transform of the scale space.

    On the descending branch the transform reverses intensity order, so
    extrema there come out with the opposite sign to :func:`dog_gamma`.
    """
    params = compute_params(check_gamma(gamma))
    lo, hi = _pair(_planes(image), t, delta_t)
    return _dog_dichotomy(lo, hi, params.k, params.gamma, delta_t)


def threshold_extrema(response: np.ndarray, thr_plus: float = 0.2, thr_minus: float = -0.2) -> np.ndarray:
    """+1 where ``response >= thr_plus``, -1 where ``<= thr_minus``, else 0."""
    if not (thr_plus > 0 > thr_minus):
        raise ValueError("thresholds must satisfy thr_plus > 0 > thr_minus")
    response = np.asarray(response)
    mask = np.zeros(response.shape, dtype=np.int8)
    mask[response >= thr_plus] = 1
    mask[response <= thr_minus] = -1
    return mask


def aggregate_over_gamma(responses: Sequence[np.ndarray], mode: str = "max") -> np.ndarray:
    """Pixelwise ``max`` over gamma, or ``neg_min`` (minus the minimum)."""
    if not responses:
        raise ValueError("need at least one response")
    shape = np.shape(responses[0])
    if any(np.shape(r) != shape for r in responses):
        raise GeometryMismatch("responses differ in shape")
    stack = np.stack([np.asarray(r, dtype=np.float64) for r in responses])
    if mode == "max":
        return stack.max(axis=0)
    if mode == "neg_min":
        return -stack.min(axis=0)
    raise ValueError(f"unknown aggregation mode {mode!r}")


def compose_gamma_overlay(
    masks: Sequence[np.ndarray], palette: Sequence[Sequence[float]] | None = None
) -> PlanarImage:
    """Additively blend the palette colour of every gamma whose mask fires.

    Masks may be ``(H, W)`` or ``(1, H, W)``; the result is clipped to
    ``[0, 1]`` so overlapping detections drift toward composite hues.
    """
    if not masks:
        raise ValueError("need at least one mask")
    palette = DEFAULT_PALETTE if palette is None else palette
    if len(palette) < len(masks):
        raise ValueError("palette needs one colour per mask")
    planes = [np.asarray(m).reshape(np.shape(m)[-2:]) for m in masks]
    shape = planes[0].shape
    if any(p.shape != shape for p in planes):
        raise GeometryMismatch("masks differ in shape")
    rgb = np.zeros((3,) + shape)
    for plane, colour in zip(planes, palette):
        hit = plane != 0
        for c in range(3):
            rgb[c][hit] += colour[c]
    return PlanarImage(np.clip(rgb, 0.0, 1.0), source_bit_depth=8)


def render_extrema_mask(mask: np.ndarray) -> PlanarImage:
    """Positive extrema red, negative extrema green, rest black."""
    plane = np.asarray(mask).reshape(np.shape(mask)[-2:])
    rgb = np.zeros((3,) + plane.shape)
    rgb[0][plane > 0] = 1.0
    rgb[1][plane < 0] = 1.0
    return PlanarImage(rgb, source_bit_depth=8)


# --------------------------------------------------------------------------
# the full stack
# --------------------------------------------------------------------------


@dataclass
class ScaleSpaceCell:
    level: int
    gamma: float
    dichotomy: np.ndarray
    gamma_response: np.ndarray
    dichotomy_mask: np.ndarray
    gamma_mask: np.ndarray


@dataclass
class ScaleSpaceLevel:
    index: int
    sigma2: float
    factor: int
    t: float
    delta_t: float
    image: PlanarImage
    smoothed: np.ndarray
    dog: np.ndarray
    cells: list[ScaleSpaceCell] = field(default_factory=list)

    def aggregates(self) -> dict[str, np.ndarray]:
        """DoG extrema across gamma for both spaces at this level."""
        dich = [c.dichotomy for c in self.cells]
        gam = [c.gamma_response for c in self.cells]
        return {
            "dichotomy_max": aggregate_over_gamma(dich, "max"),
            "dichotomy_min": aggregate_over_gamma(dich, "neg_min"),
            "gamma_max": aggregate_over_gamma(gam, "max"),
            "gamma_min": aggregate_over_gamma(gam, "neg_min"),
        }


@dataclass
class ScaleSpaceStack:
    config: ScaleSpaceConfig
    levels: list[ScaleSpaceLevel]

    def cells(self) -> Iterable[ScaleSpaceCell]:
        for level in self.levels:
            yield from level.cells


def _build_level(index: int, image: PlanarImage, cfg: ScaleSpaceConfig) -> ScaleSpaceLevel:
    sigma2 = cfg.sigma2_levels[index]
    t = cfg.t_of_level(sigma2)
    dt = cfg.delta_t_for(t)
    lo, hi = _pair(image.data, t, dt)
    level = ScaleSpaceLevel(
        index=index,
        sigma2=sigma2,
        factor=cfg.subsample_factors[index],
        t=t,
        delta_t=dt,
        image=image,
        smoothed=lo,
        dog=_dog_plain(lo, hi, dt),
    )
    for gamma in cfg.gamma_set:
        params = compute_params(gamma)
        dich = _dog_dichotomy(lo, hi, params.k, gamma, dt)
        gam = _dog_gamma(lo, hi, gamma, dt)
        level.cells.append(
            ScaleSpaceCell(
                level=index,
                gamma=gamma,
                dichotomy=dich,
                gamma_response=gam,
                dichotomy_mask=threshold_extrema(dich, cfg.thr_plus, cfg.thr_minus),
                gamma_mask=threshold_extrema(gam, cfg.thr_plus, cfg.thr_minus),
            )
        )
    return level


def build_scale_space(
    image: PlanarImage, cfg: ScaleSpaceConfig | None = None, threads: int | None = None
) -> ScaleSpaceStack:
    """Pyramid, DoG responses and extrema masks for every (level, gamma).

    Colour input is reduced to luminance first. Levels are computed
    independently and may run on ``threads`` workers; results do not depend
    on the worker count.
    """
    cfg = cfg or ScaleSpaceConfig()
    if image.channels == 3:
        image = to_grayscale(image)
    pyramid = build_pyramid(image, cfg)
    workers = max(1, threads or 1)
    if workers == 1:
        levels = [_build_level(i, img, cfg) for i, img in enumerate(pyramid)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            levels = list(pool.map(lambda args: _build_level(*args, cfg), enumerate(pyramid)))
    return ScaleSpaceStack(cfg, levels)
