"""Per-pixel dichotomy transform on whole images, and its exact inverse."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import (
    DEFAULT_GOLDEN,
    DichotomyLut,
    DichotomyParams,
    GoldenSearchConfig,
    build_lut,
    check_gamma,
    compute_params,
    dichotomy_array,
    invert_golden_array,
    invert_lut_array,
)
from .errors import AlreadyGray, DomainError, RecordMismatch

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(eq=False)
class PlanarImage:
    """Normalised image stored channel-planar as ``(channels, height, width)``.

    ``source_bit_depth`` remembers the integer depth the samples came from
    (8 or 16), or ``None`` for genuinely real-valued data.
    """

    data: np.ndarray
    source_bit_depth: int | None = 8

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[np.newaxis]
        if data.ndim != 3 or data.shape[0] not in (1, 3):
            raise DomainError(f"expected (1|3, H, W) planar data, got shape {data.shape}")
        if data.shape[1] == 0 or data.shape[2] == 0:
            raise DomainError("image must not be empty")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise DomainError("samples must lie in [0, 1]")
        if self.source_bit_depth not in (None, 8, 16):
            raise DomainError(f"unsupported bit depth {self.source_bit_depth!r}")
        self.data = data

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def with_data(self, data: np.ndarray) -> "PlanarImage":
        return PlanarImage(data, self.source_bit_depth)


@dataclass(eq=False)
class SlopeClassMap:
    """Per-sample branch tags; True means ascending (sample <= d_max)."""

    ascending: np.ndarray

    @property
    def channels(self) -> int:
        return self.ascending.shape[0]

    @property
    def height(self) -> int:
        return self.ascending.shape[1]

    @property
    def width(self) -> int:
        return self.ascending.shape[2]

    def to_dict(self) -> dict[str, Any]:
        """Run-length encoding over the flattened (C, H, W) mask.

        Runs alternate starting with ascending; a leading zero-length run
        marks a mask that starts descending.
        """
        flat = self.ascending.ravel()
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat.size and not flat[0]:
            runs.insert(0, 0)
        c, h, w = self.ascending.shape
        return {"channels": c, "height": h, "width": w, "encoding": "rle", "runs": runs}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SlopeClassMap":
        shape = (int(data["channels"]), int(data["height"]), int(data["width"]))
        runs = np.asarray(data["runs"], dtype=np.int64)
        if runs.sum() != np.prod(shape):
            raise RecordMismatch("class-map runs do not cover the stated geometry")
        values = (np.arange(runs.size) % 2 == 0)
        flat = np.repeat(values, runs)
        return cls(flat.reshape(shape))


@dataclass(eq=False)
class TransformRecord:
    """Everything :func:`invert` needs to undo :func:`enhance`."""

    params: DichotomyParams
    class_map: SlopeClassMap
    lut: DichotomyLut | None = None
    source_bit_depth: int | None = None

    def __post_init__(self) -> None:
        if self.lut is not None and self.lut.gamma != self.params.gamma:
            raise RecordMismatch("LUT gamma differs from record gamma")

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "dichotome-record",
            "version": 1,
            "params": self.params.to_dict(),
            "source_bit_depth": self.source_bit_depth,
            "class_map": self.class_map.to_dict(),
            "lut": None if self.lut is None else self.lut.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TransformRecord":
        if data.get("format") != "dichotome-record":
            raise RecordMismatch("not a dichotome transform record")
        lut = data.get("lut")
        return cls(
            params=DichotomyParams.from_dict(data["params"]),
            class_map=SlopeClassMap.from_dict(data["class_map"]),
            lut=None if lut is None else DichotomyLut.from_dict(lut),
            source_bit_depth=data.get("source_bit_depth"),
        )


def classify_slopes(image: PlanarImage, gamma: float) -> SlopeClassMap:
    """Tag every sample ascending (``<= d_max``) or descending."""
    params = compute_params(check_gamma(gamma))
    return SlopeClassMap(image.data <= params.d_max)


def enhance(image: PlanarImage, gamma: float) -> tuple[PlanarImage, TransformRecord]:
    """Apply ``k * |x**gamma - x|`` to every sample, channel by channel.

    The returned record holds the slope class of each input sample and, for
    integer-sourced images, the forward LUT used for exact inversion.
    """
    params = compute_params(check_gamma(gamma))
    out = np.minimum(params.k * dichotomy_array(image.data, params.gamma), 1.0)
    lut = None
    if image.source_bit_depth is not None:
        lut = build_lut(params.gamma, 2**image.source_bit_depth - 1)
    record = TransformRecord(
        params=params,
        class_map=SlopeClassMap(image.data <= params.d_max),
        lut=lut,
        source_bit_depth=image.source_bit_depth,
    )
    return PlanarImage(out, source_bit_depth=None), record


def invert(
    enhanced: PlanarImage,
    record: TransformRecord,
    cfg: GoldenSearchConfig = DEFAULT_GOLDEN,
) -> PlanarImage:
    """Undo :func:`enhance` using the branch side channel in ``record``.

    Integer-sourced images are recovered level by level through the LUT;
    real-valued ones go through golden-section search per sample.
    """
    if enhanced.shape != record.class_map.ascending.shape:
        raise RecordMismatch(
            f"image geometry {enhanced.shape} does not match record "
            f"{record.class_map.ascending.shape}"
        )
    ascending = record.class_map.ascending
    bits = record.source_bit_depth
    lut = record.lut
    if bits in (8, 16) and lut is not None:
        if lut.bit_max != 2**bits - 1:
            raise RecordMismatch(f"LUT has {lut.bit_max + 1} levels, source is {bits}-bit")
        levels = invert_lut_array(enhanced.data, lut, ascending)
        return PlanarImage(levels / lut.bit_max, source_bit_depth=bits)

    params = record.params
    e = np.minimum(enhanced.data / params.k, params.doc_max)
    x = invert_golden_array(e, params, ascending, cfg)
    return PlanarImage(np.clip(x, 0.0, 1.0), source_bit_depth=bits)


# colours for single-channel maps
_GRAY_ASCENDING = (1.0, 0.0, 0.0)
_GRAY_DESCENDING = (0.0, 0.0, 1.0)


def render_class_map(class_map: SlopeClassMap) -> PlanarImage:
    """Colour-code a slope map as an RGB image.

    Grayscale maps render ascending samples red and descending ones blue.
    RGB maps set each output channel to 1 where that channel ascends, which
    yields the eight-colour code (white: all ascending, black: all
    descending, yellow: red and green ascending, and so on).
    """
    asc = class_map.ascending
    if asc.shape[0] == 3:
        return PlanarImage(asc.astype(np.float64), source_bit_depth=8)
    plane = asc[0]
    rgb = np.empty((3,) + plane.shape)
    for c in range(3):
        rgb[c] = np.where(plane, _GRAY_ASCENDING[c], _GRAY_DESCENDING[c])
    return PlanarImage(rgb, source_bit_depth=8)


def to_grayscale(image: PlanarImage) -> PlanarImage:
    """Luminance with fixed 0.299 / 0.587 / 0.114 weights."""
    if image.channels != 3:
        raise AlreadyGray("image already has a single channel")
    w = np.asarray(GRAY_WEIGHTS).reshape(3, 1, 1)
    gray = np.clip((image.data * w).sum(axis=0, keepdims=True), 0.0, 1.0)
    return image.with_data(gray)


def quantize(image: PlanarImage | np.ndarray, bit_depth: int = 8) -> np.ndarray:
    """Round samples to integers on ``0..2**bit_depth - 1`` (half-up)."""
    if bit_depth not in (8, 16):
        raise DomainError(f"bit depth must be 8 or 16, got {bit_depth!r}")
    data = image.data if isinstance(image, PlanarImage) else np.asarray(image, dtype=np.float64)
    top = 2**bit_depth - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    return np.floor(data * top + 0.5).clip(0, top).astype(dtype)


def dequantize(raster: np.ndarray, bit_depth: int | None = None) -> PlanarImage:
    """Inverse of :func:`quantize`; the depth defaults to the dtype's."""
    raster = np.asarray(raster)
    if bit_depth is None:
        bit_depth = {np.dtype(np.uint8): 8, np.dtype(np.uint16): 16}.get(raster.dtype)
        if bit_depth is None:
            raise DomainError(f"cannot infer bit depth from dtype {raster.dtype}")
    return PlanarImage(raster.astype(np.float64) / (2**bit_depth - 1), source_bit_depth=bit_depth)
