import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dichotome.core import compute_params, dichotomy_normalized
from dichotome.errors import ConfigError, DegenerateGamma, GeometryMismatch, ImageTooSmall
from dichotome.fixtures import mixed_exposure, natural_texture
from dichotome.image import PlanarImage
from dichotome.scalespace import (
    DEFAULT_GAMMAS,
    DEFAULT_PALETTE,
    ScaleSpaceConfig,
    aggregate_over_gamma,
    build_pyramid,
    build_scale_space,
    compose_gamma_overlay,
    dog,
    dog_dichotomy,
    dog_gamma,
    gaussian_kernel,
    gaussian_smooth,
    pyramid_shapes,
    render_extrema_mask,
    threshold_extrema,
)


def real(data):
    return PlanarImage(np.asarray(data, dtype=np.float64), source_bit_depth=None)


@pytest.fixture(scope="module")
def texture():
    return natural_texture(128, 128, 1, seed=3)


def bright_ramp(lo=0.65, hi=0.99, n=64):
    # convex, so smoothing moves every interior value and the DoG is non-zero
    x = np.linspace(0.0, 1.0, n)
    row = lo + (hi - lo) * x**2
    return np.broadcast_to(row, (1, 24, n)).copy()


# --- kernel and smoothing ---------------------------------------------------------


def test_kernel_radius_and_normalisation():
    k = gaussian_kernel(2.0)
    assert k.size == 2 * 6 + 1  # ceil(4 * sqrt(2)) = 6
    assert k.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(k, k[::-1])
    with pytest.raises(ValueError):
        gaussian_kernel(0.0)


def test_constant_image_unchanged():
    img = real(np.full((1, 20, 30), 0.37))
    assert np.allclose(gaussian_smooth(img, 3.0).data, 0.37, atol=1e-15)


def test_impulse_gives_sampled_gaussian():
    data = np.zeros((1, 41, 41))
    data[0, 20, 20] = 1.0
    out = gaussian_smooth(data, 2.0)
    k = gaussian_kernel(2.0)
    expected = np.zeros((41, 41))
    expected[20 - 6 : 21 + 6, 20 - 6 : 21 + 6] = np.outer(k, k)
    assert np.allclose(out[0], expected, atol=1e-15)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    # direct 2-D evaluation of the continuous kernel at the sample points
    yy, xx = np.mgrid[-6:7, -6:7]
    g = np.exp(-(xx**2 + yy**2) / 4.0)
    assert np.allclose(np.outer(k, k), g / g.sum(), atol=1e-15)


@pytest.mark.parametrize("t1, t2", [(1.0, 2.0), (2.048, 1.0), (4.0, 4.0)])
def test_semigroup(texture, t1, t2):
    two = gaussian_smooth(gaussian_smooth(texture, t1), t2)
    one = gaussian_smooth(texture, t1 + t2)
    assert np.abs(two - one).max() < 1e-3


def test_smooth_preserves_type():
    img = real(np.zeros((1, 9, 9)))
    assert isinstance(gaussian_smooth(img, 1.0), PlanarImage)
    assert isinstance(gaussian_smooth(img.data, 1.0), np.ndarray)


# --- pyramid --------------------------------------------------------------------------


def test_pyramid_widths_large_image():
    shapes = pyramid_shapes(4000, 6000, ScaleSpaceConfig())
    assert [w for _, w in shapes] == [6000, 3000, 2000, 1500]
    assert [h for h, _ in shapes] == [4000, 2000, 1333, 1000]


def test_pyramid_too_small():
    with pytest.raises(ImageTooSmall):
        build_pyramid(real(np.zeros((1, 8, 8))), ScaleSpaceConfig())


def test_pyramid_single_level_is_smoothed_image(texture):
    cfg = ScaleSpaceConfig(sigma2_levels=(2.0,))
    levels = build_pyramid(real(texture), cfg)
    assert len(levels) == 1
    assert np.allclose(levels[0].data, gaussian_smooth(texture, 2.0))


def test_pyramid_block_average():
    data = np.zeros((1, 16, 16))
    data[0, :8] = 1.0
    cfg = ScaleSpaceConfig(sigma2_levels=(1.0, 1.0), subsample_factors=(1, 2))
    levels = build_pyramid(real(data), cfg)
    assert levels[1].shape == (1, 8, 8)
    assert levels[1].data.mean() == pytest.approx(levels[0].data.mean(), abs=1e-12)


# --- DoG variants ---------------------------------------------------------------------


def test_dog_gamma_one_is_plain_dog_bitwise(texture):
    assert np.array_equal(dog_gamma(texture, 1.0, 4.096, 1.0), dog(texture, 4.096, 1.0))


@pytest.mark.parametrize("gamma", [0.25, 0.5, 2.0, 4.0])
def test_constant_image_zero_responses(gamma):
    data = np.full((1, 16, 16), 0.6)
    assert np.abs(dog(data, 2.0, 1.0)).max() < 1e-14
    assert np.abs(dog_gamma(data, gamma, 2.0, 1.0)).max() < 1e-14
    assert np.abs(dog_dichotomy(data, gamma, 2.0, 1.0)).max() < 1e-12


def test_step_edge_antisymmetric():
    row = np.where(np.arange(64) < 32, 0.2, 0.8)
    data = np.broadcast_to(row, (1, 8, 64)).copy()
    resp = dog(data, 4.0, 1.0)[0, 4]
    left, right = resp[20:32], resp[32:44][::-1]
    assert np.allclose(left, -right, atol=1e-12)
    assert resp[31] > 0 > resp[32]


def test_dog_sums_to_zero(texture):
    resp = dog(texture, 8.192, 1.0)
    assert abs(resp.sum()) < 1e-2 * np.abs(resp).sum()


def test_dog_gamma_two_matches_scalar_oracle():
    data = np.broadcast_to(np.linspace(0.1, 0.9, 40), (1, 10, 40)).copy()
    lo = gaussian_smooth(data, 2.0)
    hi = gaussian_smooth(data, 3.0)
    resp = dog_gamma(data, 2.0, 2.0, 1.0)
    for j in (0, 5, 20, 39):
        a, b = float(lo[0, 3, j]), float(hi[0, 3, j])
        assert resp[0, 3, j] == pytest.approx(b * b - a * a, abs=1e-15)


@pytest.mark.parametrize("gamma", [0.5, 1.8])
def test_dog_dichotomy_matches_scalar_composition(texture, gamma):
    p = compute_params(gamma)
    t, dt = 2.048, 1.0
    lo = gaussian_smooth(texture, t)
    hi = gaussian_smooth(texture, t + dt)
    resp = dog_dichotomy(texture, gamma, t, dt)
    rng = np.random.default_rng(0)
    for i, j in rng.integers(0, 128, size=(40, 2)):
        a, b = float(lo[0, i, j]), float(hi[0, i, j])
        expected = p.k * (dichotomy_normalized(b, p) - dichotomy_normalized(a, p)) / (p.k * dt)
        assert resp[0, i, j] == pytest.approx(expected, abs=1e-12)


def test_dog_dichotomy_rejects_gamma_one(texture):
    with pytest.raises(DegenerateGamma):
        dog_dichotomy(texture, 1.0, 2.0, 1.0)


@pytest.mark.parametrize("gamma", DEFAULT_GAMMAS)
def test_sign_flip_on_bright_ramp(gamma):
    data = bright_ramp()
    assert data.min() > compute_params(gamma).d_max
    g = dog_gamma(data, gamma, 4.096, 1.0)
    d = dog_dichotomy(data, gamma, 4.096, 1.0)
    live = np.abs(g) > 1e-6
    assert live.sum() > data.size // 2
    assert np.array_equal(np.sign(d[live]), -np.sign(g[live]))


def test_dark_ramp_keeps_sign():
    data = bright_ramp(0.01, 0.2)
    g = dog_gamma(data, 0.5, 4.096, 1.0)
    d = dog_dichotomy(data, 0.5, 4.096, 1.0)
    live = np.abs(g) > 1e-6
    assert np.array_equal(np.sign(d[live]), np.sign(g[live]))


# --- thresholds, aggregation, overlays -------------------------------------------


def test_threshold_examples():
    resp = np.array([0.0, 0.3, -0.3, 0.2, -0.2, 0.19, -0.19])
    assert threshold_extrema(resp, 0.2, -0.2).tolist() == [0, 1, -1, 1, -1, 0, 0]
    assert not threshold_extrema(np.zeros((4, 4))).any()
    with pytest.raises(ValueError):
        threshold_extrema(resp, -0.1, -0.2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_threshold_monotone(thr, bump):
    resp = np.random.default_rng(1).normal(scale=0.5, size=200)
    low = threshold_extrema(resp, thr, -0.2) == 1
    high = threshold_extrema(resp, thr + bump, -0.2) == 1
    assert not (high & ~low).any()


def test_aggregate_examples():
    a = np.array([[0.1, -0.3]])
    b = np.array([[0.4, 0.1]])
    assert aggregate_over_gamma([a, b], "max").tolist() == [[0.4, 0.1]]
    assert aggregate_over_gamma([a, b], "neg_min").tolist() == [[-0.1, 0.3]]
    assert np.array_equal(aggregate_over_gamma([a]), a)
    with pytest.raises(GeometryMismatch):
        aggregate_over_gamma([a, np.zeros((2, 2))])
    with pytest.raises(ValueError):
        aggregate_over_gamma([a], "median")


def test_aggregate_dominates(rng):
    responses = [rng.normal(size=(5, 5)) for _ in range(6)]
    top = aggregate_over_gamma(responses, "max")
    assert all((top >= r).all() for r in responses)
    assert all((-aggregate_over_gamma(responses, "neg_min") <= r).all() for r in responses)


def test_overlay_colours():
    red = np.array([[1, 0, 0]])
    green = np.array([[1, -1, 0]])
    rgb = compose_gamma_overlay([red, green], [(1, 0, 0), (0, 1, 0)]).data
    assert rgb[:, 0, 0].tolist() == [1, 1, 0]  # yellow
    assert rgb[:, 0, 1].tolist() == [0, 1, 0]
    assert rgb[:, 0, 2].tolist() == [0, 0, 0]
    with pytest.raises(GeometryMismatch):
        compose_gamma_overlay([red, np.zeros((2, 3))])


def test_default_palette_distinct_and_covers_default_set():
    assert len(set(DEFAULT_PALETTE)) == len(DEFAULT_PALETTE) >= len(DEFAULT_GAMMAS)


def test_render_extrema_mask():
    rgb = render_extrema_mask(np.array([[1, -1, 0]])).data
    assert rgb[:, 0, 0].tolist() == [1, 0, 0]
    assert rgb[:, 0, 1].tolist() == [0, 1, 0]
    assert rgb[:, 0, 2].tolist() == [0, 0, 0]


# --- config and full stack -------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        {"sigma2_levels": ()},
        {"sigma2_levels": (0.0,)},
        {"gamma_set": (1.0,)},
        {"thr_plus": -0.1},
        {"delta_t": None},
        {"delta_t": None, "s": 1.0},
        {"subsample_factors": (1, 2)},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        ScaleSpaceConfig(**kwargs)


def test_delta_t_from_scale_factor():
    cfg = ScaleSpaceConfig(delta_t=None, s=2.0)
    assert cfg.delta_t_for(cfg.t_of_level(2.0)) == pytest.approx(3 * 4.096)


def test_stack_layout_and_determinism():
    img = mixed_exposure(96, 128)
    stack = build_scale_space(img)
    assert len(stack.levels) == 4
    cells = list(stack.cells())
    assert len(cells) == 32
    assert [lvl.image.shape[1:] for lvl in stack.levels] == [(96, 128), (48, 64), (32, 42), (24, 32)]
    for cell in cells:
        assert np.isfinite(cell.dichotomy).all() and np.isfinite(cell.gamma_response).all()
        assert set(np.unique(cell.dichotomy_mask)) <= {-1, 0, 1}
    assert stack.levels[0].t == pytest.approx(8.192)
    assert set(stack.levels[0].aggregates()) == {"dichotomy_max", "dichotomy_min", "gamma_max", "gamma_min"}
    again = build_scale_space(img, threads=4)
    for a, b in zip(cells, again.cells()):
        assert np.array_equal(a.dichotomy, b.dichotomy)
        assert np.array_equal(a.gamma_mask, b.gamma_mask)
