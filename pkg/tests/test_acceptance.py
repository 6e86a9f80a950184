"""Acceptance gate: one test per criterion, each reporting a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed in
the "acceptance criteria" section of the terminal summary. The two dataset
criteria need a LOL-style copy (``eval15/low`` + ``eval15/high``) pointed to
by ``DICHOTOME_LOL_DIR`` and report SKIPPED otherwise.
"""

import contextlib
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import ACCEPTANCE_LINES
from dichotome.core import (
    build_lut,
    compute_params,
    dichotomy_array,
    dichotomy_derivative,
    dichotomy_eval,
    invert_golden,
    invert_lut_array,
    region_integrals,
)
from dichotome.image import PlanarImage, enhance, quantize, to_grayscale
from dichotome.metrics import patch_entropy, shannon_entropy
from dichotome.scalespace import (
    DEFAULT_GAMMAS,
    ScaleSpaceConfig,
    build_scale_space,
    dog,
    dog_dichotomy,
    dog_gamma,
    gaussian_smooth,
)

pytestmark = pytest.mark.acceptance

LOL_ENV = "DICHOTOME_LOL_DIR"
GRID = [round(0.1 * i, 1) for i in range(1, 41) if i != 10]


@contextlib.contextmanager
def criterion(number, label, budget):
    """Record a PASS/FAIL line; fail also when the runtime budget is blown."""
    notes = []
    start = time.perf_counter()
    try:
        yield notes
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"runtime {elapsed:.2f} s exceeds {budget} s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        ACCEPTANCE_LINES.append(f"[FAIL] criterion {number}: {label} ({elapsed:.2f} s) -- {exc}")
        raise
    detail = f"; {'; '.join(notes)}" if notes else ""
    ACCEPTANCE_LINES.append(f"[PASS] criterion {number}: {label} ({elapsed:.2f} s{detail})")


def near(value, target, tol, what):
    assert abs(value - target) <= tol, f"{what} = {value!r}, expected {target} +/- {tol}"


def lol_pairs():
    root = os.environ.get(LOL_ENV)
    if not root:
        return None
    from dichotome.cli import load_pairs

    return load_pairs(Path(root))


# --------------------------------------------------------------------------


def test_criterion_1_worked_examples():
    with criterion(1, "worked-example parameter fixtures", 1.0) as notes:
        p = compute_params(0.5)
        assert p.d_max == 0.25
        near(p.k, 4.0, 1e-12, "k(0.5)")
        near(p.k * p.m_plus, 4.0, 1e-9, "k*m+(0.5)")
        near(p.k * p.m_minus, -1.3333, 1e-3, "k*m-(0.5)")

        q = compute_params(1.2, d_max=0.41)
        near(q.m_plus, 0.163325, 1e-5, "m+(1.2, d=0.41)")
        near(q.m_minus, -0.113496, 1e-5, "m-(1.2, d=0.41)")
        near(q.k, 14.93356, 5e-3, "k(1.2, d=0.41)")
        near(q.r_plus, 0.020121, 1e-4, "R+(1.2, d=0.41)")
        near(q.r_minus, 0.025335, 1e-4, "R-(1.2, d=0.41)")

        exact = compute_params(1.8)
        near(exact.d_max, 0.48, 5e-3, "d_max(1.8)")
        near(exact.k, 4.691085, 5e-3, "k(1.8)")
        near(exact.r_plus + exact.r_minus, 0.142858, 1e-4, "R+ + R-(1.8)")
        assert exact.r_plus + exact.r_minus < 0.5
        # the quoted slope products are 1/0.48 and -1/0.52: evaluated at the
        # location rounded to two decimals, as for gamma = 1.2
        rounded = compute_params(1.8, d_max=0.48)
        near(rounded.k * rounded.m_plus, 2.0833, 1e-3, "k*m+(1.8, d=0.48)")
        near(rounded.k * rounded.m_minus, -1.92307, 1e-3, "k*m-(1.8, d=0.48)")
        notes.append(
            f"gamma=1.8 slope products at d=0.48; at the exact d_max={exact.d_max:.6f} they are "
            f"{exact.k * exact.m_plus:.5f} / {exact.k * exact.m_minus:.5f}"
        )

        # R+ at gamma = 0.5: closed form and adaptive quadrature agree on 0.052083
        f = lambda x: abs(math.sqrt(x) - x)  # noqa: E731
        quad_plus = quad(f, 0.0, 0.25, epsabs=1e-14)[0]
        quad_minus = quad(f, 0.25, 1.0, epsabs=1e-14)[0]
        near(p.r_plus, 0.052083, 1e-6, "R+(0.5) closed form")
        near(quad_plus, 0.052083, 1e-6, "R+(0.5) quadrature")
        near(p.r_minus, 0.114583, 1e-6, "R-(0.5) closed form")
        near(quad_minus, 0.114583, 1e-6, "R-(0.5) quadrature")
        notes.append(f"R+(0.5)={p.r_plus:.6f}, R-(0.5)={p.r_minus:.6f} from closed form and quadrature")


def test_criterion_2_core_properties():
    with criterion(2, f"core invariants over {len(GRID)} gamma values", 30.0):
        grid = np.linspace(0.0, 1.0, 1_000_001)
        for gamma in GRID:
            p = compute_params(gamma)
            assert dichotomy_eval(0.0, gamma) == 0.0 and dichotomy_eval(1.0, gamma) == 0.0
            f = dichotomy_array(grid, gamma)
            near(p.d_max, grid[np.argmax(f)], 1e-5, f"d_max({gamma})")
            normed = np.minimum(p.k * f, 1.0)
            assert normed.min() >= 0.0
            near(normed.max(), 1.0, 1e-6, f"max normalised({gamma})")
            asc = np.linspace(0.0, p.d_max, 10_001)
            desc = np.linspace(p.d_max, 1.0, 10_001)
            assert (np.diff(dichotomy_array(asc, gamma)) > 0).all(), f"ascending branch, gamma={gamma}"
            assert (np.diff(dichotomy_array(desc, gamma)) < 0).all(), f"descending branch, gamma={gamma}"
            assert p.r_plus + p.r_minus <= 0.5
            fx = lambda x: abs(x**gamma - x)  # noqa: E731
            near(p.r_plus, quad(fx, 0, p.d_max, epsabs=1e-13, limit=200)[0], 1e-9, f"R+({gamma})")
            near(p.r_minus, quad(fx, p.d_max, 1, epsabs=1e-13, limit=200)[0], 1e-9, f"R-({gamma})")

        x = np.linspace(0.0, 1.0, 101)
        assert np.array_equal(dichotomy_array(x, 0.0), 1.0 - x)
        assert region_integrals(0.0, 0.0) == (0.0, 0.5)
        for xv in (0.0, 0.25, 0.5, 0.999):
            assert abs(dichotomy_eval(xv, 1e6) - xv) < 1e-3
        assert dichotomy_eval(1.0, 1e6) == 0.0

        h = 1e-6
        for gamma in (0.25, 0.5, 1.2, 1.8, 2.0, 4.0):
            sign = 1.0 if gamma < 1 else -1.0
            for xv in np.linspace(0.05, 0.95, 19):
                fd = sign * (((xv + h) ** gamma - (xv + h)) - ((xv - h) ** gamma - (xv - h))) / (2 * h)
                near(dichotomy_derivative(xv, gamma, 1), fd, 1e-5, f"derivative({xv:.2f}, {gamma})")


def test_criterion_3_inversion():
    gammas = [0.0] + GRID
    with criterion(3, f"LUT exact on 256 levels x {len(gammas)} gammas; golden < 1e-5 on 10000 samples", 10.0) as notes:
        levels = np.arange(256)
        for gamma in gammas:
            lut = build_lut(gamma, 255)
            asc = levels <= lut.boundary_index
            back = invert_lut_array(lut.entries, lut, asc)
            assert np.array_equal(back, levels), f"LUT round trip, gamma={gamma}"

        rng = np.random.default_rng(20240611)
        xs = rng.uniform(size=10_000)
        gs = rng.uniform(0.0, 4.0, size=10_000)
        worst = 0.0
        for xv, gamma in zip(xs, gs):
            p = compute_params(gamma)
            worst = max(worst, abs(invert_golden(dichotomy_eval(xv, gamma), p, p.branch(xv)) - xv))
        assert worst < 1e-5, f"golden worst error {worst:.3e}"
        notes.append(f"golden worst {worst:.1e}")


def test_criterion_4_scale_space(texture512):
    with criterion(4, "scale-space checks at 512x512", 20.0) as notes:
        assert np.array_equal(dog_gamma(texture512, 1.0, 8.192, 1.0), dog(texture512, 8.192, 1.0))

        flat = np.full((1, 512, 512), 0.42)
        # zero up to the rounding of the unit-sum kernel (~1e-16)
        assert np.abs(dog(flat, 8.192, 1.0)).max() < 1e-14
        for gamma in DEFAULT_GAMMAS:
            assert np.abs(dog_gamma(flat, gamma, 8.192, 1.0)).max() < 1e-14
            assert np.abs(dog_dichotomy(flat, gamma, 8.192, 1.0)).max() < 1e-12

        worst = 0.0
        for t1, t2 in ((1.0, 1.0), (2.048, 1.0), (4.096, 4.096), (8.192, 1.0)):
            two = gaussian_smooth(gaussian_smooth(texture512, t1), t2)
            worst = max(worst, float(np.abs(two - gaussian_smooth(texture512, t1 + t2)).max()))
        assert worst < 1e-3, f"semigroup error {worst:.3e}"
        notes.append(f"semigroup max error {worst:.1e}")

        x = np.linspace(0.0, 1.0, 512)
        for gamma in DEFAULT_GAMMAS:
            lo = compute_params(gamma).d_max + 0.01
            ramp = np.broadcast_to(lo + (0.99 - lo) * x**2, (1, 512, 512))
            g = dog_gamma(ramp, gamma, 4.096, 1.0)
            d = dog_dichotomy(ramp, gamma, 4.096, 1.0)
            live = np.abs(g) > 1e-6
            assert live.any()
            assert np.array_equal(np.sign(d[live]), -np.sign(g[live])), f"sign flip, gamma={gamma}"

        stack = build_scale_space(PlanarImage(texture512, None), ScaleSpaceConfig())
        cells = list(stack.cells())
        assert len(cells) == 32 and all(np.isfinite(c.dichotomy).all() for c in cells)


def test_criterion_5_entropy(underexposed):
    with criterion(5, "patch entropy fixtures and enhancement direction", 60.0) as notes:
        assert shannon_entropy(np.full((16, 16), 9, np.uint8)) == 0.0
        assert shannon_entropy(np.tile(np.array([3, 200], np.uint8), 64)) == 1.0
        assert shannon_entropy(np.arange(256, dtype=np.uint8)) == 8.0

        before = patch_entropy(quantize(to_grayscale(underexposed), 8)).mean()
        enhanced, _ = enhance(underexposed, 0.5)
        after = patch_entropy(quantize(to_grayscale(enhanced), 8)).mean()
        assert after > before, f"mean patch entropy {after:.4f} <= {before:.4f}"
        notes.append(f"mean entropy {before:.4f} -> {after:.4f} bits at gamma=0.5")


@pytest.fixture(scope="module")
def lol_records():
    loaded = lol_pairs()
    if loaded is None:
        return None
    from dichotome.metrics import gamma_sweep

    names, pairs = loaded
    gammas = [round(0.5 + 0.05 * i, 2) for i in range(21) if i != 10]
    start = time.perf_counter()
    records = gamma_sweep(pairs, gammas, names=names, threads=os.cpu_count())
    return records, len(pairs), time.perf_counter() - start


def test_criterion_6_lol_sweep(lol_records):
    label = "LOLv1 gamma sweep peaks"
    if lol_records is None:
        ACCEPTANCE_LINES.append(f"[SKIPPED] criterion 6: {label} (set {LOL_ENV} to a LOLv1 copy)")
        pytest.skip(f"{LOL_ENV} not set")
    from dichotome.metrics import best_records

    records, n_pairs, elapsed = lol_records
    with criterion(6, label, 120.0) as notes:
        assert elapsed < 120.0, f"sweep took {elapsed:.1f} s"
        notes.append(f"sweep over {len(records)} gammas took {elapsed:.1f} s")
        assert n_pairs == 15, f"expected 15 test pairs, found {n_pairs}"
        best_p, best_s = best_records(records)
        near(best_p.psnr_mean, 18.70, 0.30, "peak PSNR")
        near(best_p.gamma, 0.9, 0.05, "PSNR-peak gamma")
        near(best_p.ssim_mean, 0.681, 0.02, "SSIM at PSNR peak")
        near(best_s.ssim_mean, 0.683, 0.02, "peak SSIM")
        near(best_s.gamma, 1.1, 0.05, "SSIM-peak gamma")
        notes.append(f"PSNR {best_p.psnr_mean:.4f} at {best_p.gamma}; SSIM {best_s.ssim_mean:.4f} at {best_s.gamma}")


def test_criterion_7_lol_context(lol_records):
    label = "dichotomy PSNR at gamma=0.9 beats 18.27 dB"
    if lol_records is None:
        ACCEPTANCE_LINES.append(f"[SKIPPED] criterion 7: {label} (set {LOL_ENV} to a LOLv1 copy)")
        pytest.skip(f"{LOL_ENV} not set")
    records, _, _ = lol_records
    with criterion(7, label, 1.0) as notes:
        rec = next(r for r in records if abs(r.gamma - 0.9) < 1e-9)
        assert rec.psnr_mean > 18.27, f"PSNR {rec.psnr_mean:.4f} dB"
        notes.append(f"PSNR {rec.psnr_mean:.4f} dB")
