import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmot.exceptions import GridMismatch, NonpositiveWeight
from mmot.grid import DensityField, Grid2D, density_from_image
from mmot.synthetic import bump
from mmot.suites import brute_c_transform
from mmot.transforms import (adaptive_splat, argmin_pushforward, c_transform, c_transform_argmin,
                             c_transform_with_argmin, double_c_transform, gradient_field, legendre_transform,
                             pushforward, pushforward_map, splat)


def brute_legendre(phi):
    X, Y = Grid2D.from_shape(phi.shape).centers()
    px, py = X.ravel(), Y.ravel()
    vals = px[:, None] * px[None, :] + py[:, None] * py[None, :] - phi.ravel()[:, None]
    return vals.max(axis=0).reshape(phi.shape)


def test_legendre_of_half_square():
    X, Y = Grid2D(8, 8).centers()
    phi = 0.5 * (X**2 + Y**2)
    np.testing.assert_allclose(legendre_transform(phi), 0.5 * (X**2 + Y**2), atol=1e-15)


def test_legendre_of_zero_is_corner_max():
    X, Y = Grid2D(6, 4).centers()
    corners = [(X[0, 0], Y[0, 0]), (X[-1, 0], Y[-1, 0]), (X[0, -1], Y[0, -1]), (X[-1, -1], Y[-1, -1])]
    expect = np.max([cx * X + cy * Y for cx, cy in corners], axis=0)
    np.testing.assert_allclose(legendre_transform(np.zeros((6, 4))), expect, atol=1e-15)


def test_legendre_random_matches_brute(rng):
    phi = rng.standard_normal((8, 8))
    np.testing.assert_allclose(legendre_transform(phi), brute_legendre(phi), atol=1e-14)


def test_c_transform_examples(rng):
    np.testing.assert_allclose(c_transform(np.zeros((7, 5))), 0.0, atol=1e-15)
    np.testing.assert_allclose(c_transform(np.full((7, 5), 2.5), 3.0), -2.5, atol=1e-14)
    f = rng.standard_normal((8, 8))
    np.testing.assert_allclose(c_transform(f), brute_c_transform(f), atol=1e-14)
    with pytest.raises(NonpositiveWeight):
        c_transform(f, 0.0)


@given(st.integers(0, 2**32 - 1), st.integers(2, 32), st.integers(2, 32), st.floats(0.1, 10))
def test_c_transform_is_exact(seed, nx, ny, w):
    f = np.random.default_rng(seed).standard_normal((nx, ny))
    np.testing.assert_allclose(c_transform(f, w), brute_c_transform(f, w), rtol=0, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_order_reversal_and_idempotence(seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((9, 7))
    g = f + np.abs(rng.standard_normal((9, 7)))
    assert np.all(c_transform(f) >= c_transform(g) - 1e-14)
    fcc = double_c_transform(f, 2.0)
    assert np.all(fcc >= f - 1e-14)
    np.testing.assert_allclose(c_transform(fcc, 2.0), c_transform(f, 2.0), atol=1e-13)


def test_double_transform_examples(rng):
    concave = c_transform(rng.standard_normal((8, 8)))
    np.testing.assert_allclose(double_c_transform(concave), concave, atol=1e-14)
    np.testing.assert_allclose(double_c_transform(np.zeros((5, 5))), 0.0, atol=1e-15)
    spike = concave.copy()
    spike[4, 4] += 5.0
    fcc = double_c_transform(spike)
    assert np.all(fcc >= spike - 1e-14)
    assert fcc[4, 4] == pytest.approx(spike[4, 4])


def test_argmin_indices_attain_the_minimum(rng):
    f = rng.standard_normal((9, 6))
    fc, ix, iy = c_transform_with_argmin(f, 1.5)
    X, Y = Grid2D(9, 6).centers()
    attained = 0.75 * ((X[ix, iy] - X) ** 2 + (Y[ix, iy] - Y) ** 2) - f[ix, iy]
    np.testing.assert_allclose(attained, fc, atol=1e-14)
    bx, by = c_transform_argmin(f, 1.5)
    np.testing.assert_array_equal(bx, ix)
    np.testing.assert_array_equal(by, iy)


def test_gradient_field_examples():
    X, Y = Grid2D(10, 8).centers()
    gx, gy = gradient_field(np.full((10, 8), 4.0))
    assert not gx.any() and not gy.any()
    gx, gy = gradient_field(3.0 * X)
    np.testing.assert_allclose(gx, 3.0, atol=1e-12)
    np.testing.assert_allclose(gy, 0.0, atol=1e-12)
    gx, gy = gradient_field(0.5 * (X**2 + Y**2))
    np.testing.assert_allclose(gx[1:-1, 1:-1], X[1:-1, 1:-1], atol=1e-12)
    np.testing.assert_allclose(gy[1:-1, 1:-1], Y[1:-1, 1:-1], atol=1e-12)


def test_pushforward_identity(rng):
    mu = density_from_image(rng.random((12, 10)))
    for mode in ("bilinear", "nearest", "adaptive", "argmin"):
        np.testing.assert_allclose(pushforward(np.zeros((12, 10)), mu, 2.0, mode), mu.values, atol=1e-12)


def test_pushforward_integer_translation():
    n, w = 32, 2.0
    X, Y = Grid2D(n, n).centers()
    mu = DensityField.normalized(bump(n, (0.6, 0.5), 0.15))
    # S(x) = x - grad f' / w = x - (0.25, 0): eight cells to the left
    out = pushforward(w * 0.25 * X, mu, w)
    expect = np.zeros_like(mu.values)
    expect[:-8] = mu.values[8:]
    np.testing.assert_allclose(out, expect, atol=1e-12)
    np.testing.assert_allclose(pushforward(w * 0.25 * X, mu, w, "adaptive"), expect, atol=1e-12)


def test_pushforward_clamps_at_boundary():
    n = 8
    X, _ = Grid2D(n, n).centers()
    mu = DensityField(np.ones((n, n)))
    out = pushforward(5.0 * X, mu, 1.0)
    assert out[0].sum() / n**2 == pytest.approx(1.0)
    assert out.sum() / n**2 == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["bilinear", "nearest", "adaptive", "argmin"]))
def test_pushforward_conserves_mass(seed, mode):
    rng = np.random.default_rng(seed)
    mu = density_from_image(rng.random((11, 13)))
    f = 0.3 * rng.standard_normal((11, 13))
    out = pushforward(f, mu, float(rng.uniform(0.2, 3)), mode)
    assert out.min() >= 0
    assert abs(out.sum() / out.size - 1.0) <= 1e-12


def test_pushforward_errors(rng):
    mu = DensityField(np.ones((4, 4)))
    with pytest.raises(GridMismatch):
        pushforward(np.zeros((4, 5)), mu)
    with pytest.raises(NonpositiveWeight):
        pushforward(np.zeros((4, 4)), mu, -1.0)
    with pytest.raises(ValueError):
        pushforward(np.zeros((4, 4)), mu, 1.0, "cubic")


def test_splat_bilinear_weights():
    out = splat(np.array([1.0]), np.array([0.375]), np.array([0.25]), (4, 4))
    # x is the centre of cell 1, y lies halfway between the centres of cells 0 and 1
    assert out.sum() == pytest.approx(1.0)
    assert out[1, 0] == pytest.approx(0.5) and out[1, 1] == pytest.approx(0.5)


def test_adaptive_splat_fills_expansion():
    # tripling distances from the centre sends cell centres three cells apart
    n = 32
    X, Y = Grid2D(n, n).centers()
    mass = np.zeros((n, n))
    mass[11:21, 11:21] = 1.0 / 100
    tx, ty = 0.5 + 3 * (X - 0.5), 0.5 + 3 * (Y - 0.5)
    plain = splat(mass, tx, ty, (n, n))
    fine = adaptive_splat(mass, tx, ty)
    assert fine.sum() == pytest.approx(1.0) and plain.sum() == pytest.approx(1.0)
    inner = slice(3, 29)
    assert np.count_nonzero(plain[inner, inner] == 0) > 100
    assert np.count_nonzero(fine[inner, inner] == 0) == 0
    assert fine[inner, inner].std() < 0.1 * fine[inner, inner].mean()


def test_pushforward_map_is_translation():
    X, Y = Grid2D(6, 6).centers()
    sx, sy = pushforward_map(2.0 * (0.1 * X + 0.2 * Y), 2.0)
    np.testing.assert_allclose(sx, X - 0.1, atol=1e-12)
    np.testing.assert_allclose(sy, Y - 0.2, atol=1e-12)


def test_argmin_pushforward_moves_whole_cells(rng):
    mu = density_from_image(rng.random((6, 6)))
    out = argmin_pushforward(rng.standard_normal((6, 6)), mu, 1.0)
    assert out.sum() == pytest.approx(mu.values.sum())
    # every output value is a sum of input values, so it is either 0 or at least the smallest input
    nz = out[out > 0]
    assert nz.min() >= mu.values.min() - 1e-12
