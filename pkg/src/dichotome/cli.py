"""Command-line entry point: ``dichotome <command> ...``.

Exit status is 0 on success, 1 for runtime and I/O failures and 2 for usage
or validation errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .core import check_gamma
from .errors import ConfigError, DegenerateGamma, DichotomeError, DomainError
from .fixtures import ALL_FIXTURES
from .image import (
    PlanarImage,
    TransformRecord,
    enhance,
    invert,
    quantize,
    render_class_map,
    to_grayscale,
)
from .io import (
    atomic_write_text,
    read_image,
    read_raster,
    sha256_file,
    write_image,
    write_json,
    write_raster,
)
from .metrics import best_records, entropy_histogram, gamma_sweep, patch_entropy
from .scalespace import build_scale_space, compose_gamma_overlay, render_extrema_mask

log = logging.getLogger("dichotome")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "DICHOTOME_THREADS"
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
DEFAULT_BENCH_GAMMAS = "0.5:0.05:1.5"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument helpers
# --------------------------------------------------------------------------


def _gamma_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    try:
        return check_gamma(value)
    except DegenerateGamma:
        raise argparse.ArgumentTypeError("gamma = 1 is degenerate (the transform is identically 0)") from None
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_gamma_list(text: str) -> list[float]:
    """``"0.5:0.05:1.5"`` (inclusive range, 1 skipped) or ``"0.9,1.1"``."""
    text = text.strip()
    if ":" in text:
        try:
            start, step, stop = (float(p) for p in text.split(":"))
        except ValueError:
            raise UsageError(f"bad gamma range {text!r}; expected start:step:stop") from None
        if not step > 0 or stop < start:
            raise UsageError(f"bad gamma range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9))
        values = [round(start + i * step, 10) for i in range(n + 1)]
        if 1.0 in values:
            log.info("skipping degenerate gamma = 1 in range %s", text)
        values = [v for v in values if v != 1.0]
    else:
        try:
            values = [float(p) for p in text.split(",") if p.strip()]
        except ValueError:
            raise UsageError(f"bad gamma list {text!r}") from None
    for v in values:
        try:
            check_gamma(v)
        except DomainError as exc:
            raise UsageError(f"invalid gamma {v}: {exc}") from None
    return values


def _threads(args: argparse.Namespace, cfg: RunConfig | None = None) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError(f"{THREADS_ENV} must be >= 1")
        return value
    if cfg is not None and cfg.threads:
        return cfg.threads
    return 1


def _load_cfg(args: argparse.Namespace) -> RunConfig:
    path = getattr(args, "config", None)
    return load_config(path) if path else RunConfig()


def _fmt_gamma(gamma: float) -> str:
    return f"{gamma:g}"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_enhance(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args).with_overrides(gamma=args.gamma)
    if cfg.gamma is None:
        raise UsageError("a gamma is required (--gamma or config file)")
    image = read_image(args.input)
    enhanced, record = enhance(image, cfg.gamma)
    bits = args.bits or (16 if args.save_record else 8)
    write_image(args.output, enhanced, bits)
    if args.save_record:
        write_json(args.save_record, record.to_dict())
    if args.save_classmap:
        write_image(args.save_classmap, render_class_map(record.class_map), 8)
    p = record.params
    print(
        f"enhanced {args.input} -> {args.output} ({bits}-bit): gamma={p.gamma:g} "
        f"d_max={p.d_max:.6f} k={p.k:.6f}"
    )
    return EXIT_OK


def cmd_invert(args: argparse.Namespace) -> int:
    record = TransformRecord.from_dict(json.loads(Path(args.record).read_text()))
    enhanced = read_image(args.enhanced)
    if args.method == "golden":
        record = TransformRecord(record.params, record.class_map, None, record.source_bit_depth)
    restored = invert(enhanced, record)
    bits = record.source_bit_depth or 16
    write_image(args.output, restored, bits)

    forward, _ = enhance(PlanarImage(restored.data, None), record.params.gamma)
    residual = float(np.abs(forward.data - enhanced.data).max())
    print(f"max forward residual: {residual:.3e}")
    if args.reference:
        reference = read_raster(args.reference)
        ref_bits = 16 if reference.dtype == np.uint16 else 8
        recon = quantize(restored, ref_bits)
        if reference.shape != recon.shape:
            raise DichotomeError(f"reference geometry {reference.shape} differs from {recon.shape}")
        err = int(np.abs(recon.astype(np.int64) - reference.astype(np.int64)).max())
        print(f"max per-sample error: {err} levels ({err / (2**ref_bits - 1):.3e} normalized)")
    return EXIT_OK


def _write_response(path: Path, response: np.ndarray) -> dict:
    """16-bit PNG with an affine map recorded in a JSON sidecar."""
    plane = response.reshape(response.shape[-2:])
    lo, hi = float(plane.min()), float(plane.max())
    scaled = np.zeros_like(plane) if hi == lo else (plane - lo) / (hi - lo)
    write_raster(path, quantize(scaled, 16))
    sidecar = path.with_suffix(".json")
    write_json(sidecar, {"min": lo, "max": hi, "bits": 16, "mapping": "value = min + q / 65535 * (max - min)"})
    return {"file": path.name, "sidecar": sidecar.name}


def cmd_dogspace(args: argparse.Namespace) -> int:
    overrides = {}
    if args.gammas:
        overrides["gamma_set"] = tuple(parse_gamma_list(args.gammas))
    if args.sigma2:
        overrides["sigma2_levels"] = tuple(float(v) for v in args.sigma2.split(","))
    try:
        cfg = _load_cfg(args).with_overrides(**overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    scfg = cfg.scale_space
    image = read_image(args.input)
    stack = build_scale_space(image, scfg, threads=_threads(args, cfg))

    out = Path(args.output)
    cells, levels = [], []
    for level in stack.levels:
        tag = f"L{level.index}"
        smoothed = out / f"{tag}_smoothed.png"
        write_image(smoothed, level.image.with_data(np.clip(level.smoothed, 0, 1)), 8)
        entry = {
            "index": level.index,
            "sigma2": level.sigma2,
            "factor": level.factor,
            "t": level.t,
            "delta_t": level.delta_t,
            "height": level.image.height,
            "width": level.image.width,
            "smoothed": smoothed.name,
            "dog": _write_response(out / f"{tag}_dog.png", level.dog),
            "aggregates": {},
        }
        for name, agg in level.aggregates().items():
            entry["aggregates"][name] = _write_response(out / f"{tag}_{name}.png", agg)
        for space in ("dichotomy", "gamma"):
            masks = [c.dichotomy_mask if space == "dichotomy" else c.gamma_mask for c in level.cells]
            path = out / f"{tag}_{space}_overlay.png"
            write_image(path, compose_gamma_overlay(masks, scfg.palette), 8)
            entry[f"{space}_overlay"] = path.name
        levels.append(entry)

        for cell in level.cells:
            ctag = f"{tag}_g{_fmt_gamma(cell.gamma)}"
            record = {"level": level.index, "sigma2": level.sigma2, "gamma": cell.gamma}
            for space, resp, mask in (
                ("dichotomy", cell.dichotomy, cell.dichotomy_mask),
                ("gamma", cell.gamma_response, cell.gamma_mask),
            ):
                record[f"{space}_response"] = _write_response(out / f"{ctag}_{space}.png", resp)
                mpath = out / f"{ctag}_{space}_mask.png"
                write_image(mpath, render_extrema_mask(mask), 8)
                record[f"{space}_mask"] = mpath.name
                record[f"{space}_extrema"] = {
                    "positive": int((mask > 0).sum()),
                    "negative": int((mask < 0).sum()),
                }
            cells.append(record)

    hashes = {
        p.name: sha256_file(p)
        for p in sorted(out.glob("*"))
        if p.is_file() and p.name != "manifest.json" and not p.name.startswith(".")
    }
    manifest = {
        "format": "dichotome-dogspace",
        "version": 1,
        "input": Path(args.input).name,
        "config": {
            "sigma2_levels": list(scfg.sigma2_levels),
            "gamma_set": list(scfg.gamma_set),
            "subsample_factors": list(scfg.subsample_factors[: len(scfg.sigma2_levels)]),
            "t_numerator": scfg.t_numerator,
            "delta_t": scfg.delta_t,
            "s": scfg.s,
            "thr_plus": scfg.thr_plus,
            "thr_minus": scfg.thr_minus,
            "palette": [list(p) for p in scfg.palette[: len(scfg.gamma_set)]],
        },
        "levels": levels,
        "cells": cells,
        "sha256": hashes,
    }
    write_json(out / "manifest.json", manifest)
    print(f"wrote {len(cells)} cells over {len(levels)} levels to {out}")
    return EXIT_OK


def _grid_csv(values: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in values:
        writer.writerow([f"{v:.6f}" for v in row])
    return buf.getvalue()


def _entropy_outputs(out: Path, stem: str, raster: np.ndarray, cfg: RunConfig) -> float:
    grid = patch_entropy(raster, cfg.mesh)
    atomic_write_text(out / f"{stem}.csv", _grid_csv(grid.values))
    counts, edges = entropy_histogram(grid, cfg.bins)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_low", "bin_high", "count"])
    for lo, hi, n in zip(edges[:-1], edges[1:], counts):
        writer.writerow([f"{lo:.4f}", f"{hi:.4f}", int(n)])
    atomic_write_text(out / f"{stem}_histogram.csv", buf.getvalue())

    h, w = raster.shape[-2:]
    levels = np.clip(np.round(grid.values / 8.0 * 255.0), 0, 255).astype(np.uint8)
    heat = cv2.resize(levels, (w, h), interpolation=cv2.INTER_NEAREST)
    bgr = cv2.applyColorMap(heat, cv2.COLORMAP_VIRIDIS)
    write_raster(out / f"{stem}_heatmap.png", np.moveaxis(bgr[:, :, ::-1], 2, 0))
    return grid.mean()


def _gray_8bit(image: PlanarImage) -> np.ndarray:
    if image.channels == 3:
        image = to_grayscale(image)
    return quantize(image, 8)[0]


def cmd_entropy(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args).with_overrides(
        mesh=tuple(args.mesh) if args.mesh else None, bins=args.bins, gamma=args.gamma
    )
    image = read_image(args.input)
    out = Path(args.output)
    summary = {"mesh": list(cfg.mesh), "original_mean": _entropy_outputs(out, "entropy", _gray_8bit(image), cfg)}
    print(f"mean patch entropy: {summary['original_mean']:.4f} bits")
    if cfg.gamma is not None:
        enhanced, _ = enhance(image, cfg.gamma)
        summary["gamma"] = cfg.gamma
        summary["enhanced_mean"] = _entropy_outputs(out, "entropy_enhanced", _gray_8bit(enhanced), cfg)
        print(f"mean patch entropy after enhancement (gamma={cfg.gamma:g}): {summary['enhanced_mean']:.4f} bits")
    write_json(out / "entropy_summary.json", summary)
    return EXIT_OK


def find_pairs(dataset: Path) -> tuple[Path, Path]:
    """Locate the low/high directories of a LOL-style dataset."""
    for base in (dataset / "eval15", dataset / "test", dataset):
        if (base / "low").is_dir() and (base / "high").is_dir():
            return base / "low", base / "high"
    raise FileNotFoundError(f"{dataset}: expected low/ and high/ (optionally under eval15/)")


def load_pairs(dataset: Path) -> tuple[list[str], list[tuple[np.ndarray, np.ndarray]]]:
    low_dir, high_dir = find_pairs(dataset)
    names, pairs = [], []
    for low in sorted(low_dir.iterdir()):
        if low.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        high = high_dir / low.name
        if not high.is_file():
            log.warning("no normal-light mate for %s; skipped", low.name)
            continue
        try:
            pair = (read_raster(low), read_raster(high))
        except OSError as exc:
            log.warning("unreadable pair %s: %s; skipped", low.name, exc)
            continue
        names.append(low.name)
        pairs.append(pair)
    if not pairs:
        raise FileNotFoundError(f"no readable image pairs under {low_dir.parent}")
    return names, pairs


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args)
    if args.gammas:
        gammas = parse_gamma_list(args.gammas)
    else:
        gammas = list(cfg.gammas) or parse_gamma_list(DEFAULT_BENCH_GAMMAS)
    names, pairs = load_pairs(Path(args.dataset))
    records = gamma_sweep(pairs, gammas, names=names, threads=_threads(args, cfg))
    out = Path(args.output)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["gamma", "psnr_mean", "psnr_std", "ssim_mean", "ssim_std"])
    for r in records:
        writer.writerow([f"{r.gamma:g}", f"{r.psnr_mean:.4f}", f"{r.psnr_std:.4f}", f"{r.ssim_mean:.4f}", f"{r.ssim_std:.4f}"])
    atomic_write_text(out / "bench.csv", buf.getvalue())
    write_json(out / "bench.json", {"pairs": names, "records": [r.to_dict() for r in records]})

    if records:
        best_p, best_s = best_records(records)
        print(
            f"PSNR max at gamma={best_p.gamma:g}: {best_p.psnr_mean:.4f} +/- {best_p.psnr_std:.4f} dB "
            f"(SSIM {best_p.ssim_mean:.4f} +/- {best_p.ssim_std:.4f})"
        )
        print(
            f"SSIM max at gamma={best_s.gamma:g}: {best_s.ssim_mean:.4f} +/- {best_s.ssim_std:.4f} "
            f"(PSNR {best_s.psnr_mean:.4f} +/- {best_s.psnr_std:.4f} dB)"
        )
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    out = Path(args.output)
    for name, make in ALL_FIXTURES.items():
        write_image(out / f"{name}.png", make(), 8)
    print(f"wrote {len(ALL_FIXTURES)} fixtures to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dichotome", description="Tone dichotomy image transform.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, help=f"worker cap (fallback: ${THREADS_ENV})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="apply k*|x^gamma - x| to an image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--gamma", type=_gamma_arg)
    p.add_argument("--config")
    p.add_argument("--bits", type=int, choices=(8, 16), help="output depth (default 16 with --save-record, else 8)")
    p.add_argument("--save-record", metavar="JSON")
    p.add_argument("--save-classmap", metavar="PNG")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("invert", help="recover the original image from an enhanced one")
    p.add_argument("enhanced")
    p.add_argument("record")
    p.add_argument("output")
    p.add_argument("--reference", help="original image to report the round-trip error against")
    p.add_argument("--method", choices=("auto", "golden"), default="auto")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("dogspace", help="build the gamma-indexed DoG scale space")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--config")
    p.add_argument("--gammas", help="override gamma set, e.g. 0.5,2")
    p.add_argument("--sigma2", help="override sigma^2 levels, e.g. 1,2")
    p.set_defaults(func=cmd_dogspace)

    p = sub.add_parser("entropy", help="patch-entropy grid of an image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--mesh", type=int, nargs=2, metavar=("ROWS", "COLS"))
    p.add_argument("--bins", type=int)
    p.add_argument("--gamma", type=_gamma_arg, help="also score the enhanced image")
    p.add_argument("--config")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("bench", help="PSNR/SSIM gamma sweep on a paired low/normal-light dataset")
    p.add_argument("dataset")
    p.add_argument("output")
    p.add_argument("--gammas", help=f"start:step:stop or comma list (default: config, else {DEFAULT_BENCH_GAMMAS})")
    p.add_argument("--config")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixtures", help="write the synthetic test images")
    p.add_argument("output")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError, DegenerateGamma) as exc:
        print(f"dichotome {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DichotomeError, OSError, ValueError) as exc:
        print(f"dichotome {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
