"""Image codecs and atomic artifact writers."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any

import cv2
import numpy as np

from .image import PlanarImage, dequantize, quantize


def read_raster(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG/JPEG as an integer ``(C, H, W)`` raster in RGB order.

    Alpha channels are dropped; 16-bit PNGs stay 16-bit.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise OSError(f"cannot decode image: {path}")
    if data.dtype not in (np.uint8, np.uint16):
        raise OSError(f"unsupported sample type {data.dtype} in {path}")
    if data.ndim == 2:
        return data[np.newaxis]
    if data.shape[2] == 1:
        return np.moveaxis(data, 2, 0)
    rgb = data[:, :, 2::-1] if data.shape[2] >= 3 else data
    return np.ascontiguousarray(np.moveaxis(rgb, 2, 0))


def read_image(path: str | os.PathLike) -> PlanarImage:
    return dequantize(read_raster(path))


def encode_png(raster: np.ndarray) -> bytes:
    raster = np.asarray(raster)
    if raster.ndim == 3 and raster.shape[0] == 3:
        hwc = np.ascontiguousarray(np.moveaxis(raster, 0, 2)[:, :, ::-1])
    else:
        hwc = raster.reshape(raster.shape[-2:])
    ok, buf = cv2.imencode(".png", hwc)
    if not ok:
        raise OSError("PNG encoding failed")
    return buf.tobytes()


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | os.PathLike, data: Any) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_raster(path: str | os.PathLike, raster: np.ndarray) -> Path:
    return atomic_write_bytes(path, encode_png(raster))


def write_image(path: str | os.PathLike, image: PlanarImage, bit_depth: int = 8) -> Path:
    return write_raster(path, quantize(image, bit_depth))


def sha256_file(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
