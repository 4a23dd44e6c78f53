import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mmot.exceptions import AllZeroInput, GridMismatch
from mmot.grid import DensityField, Grid2D, as_values, density_from_image, integrate_against, l1_distance
from mmot.io import RAW_MAGIC, read_image, read_pgm, read_raw, write_image, write_pgm, write_raw


def test_grid_geometry():
    g = Grid2D(4, 2)
    assert g.cell_area == pytest.approx(1 / 8)
    X, Y = g.centers()
    assert X.shape == (4, 2)
    np.testing.assert_allclose(X[:, 0], [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(Y[0], [0.25, 0.75])


def test_grid_needs_two_cells():
    with pytest.raises(ValueError):
        Grid2D(1, 4)


def test_constant_image_gives_uniform_density():
    d = density_from_image(np.full((5, 7), 3.0), floor=0.0)
    np.testing.assert_allclose(d.values, 1.0)
    assert d.mass() == pytest.approx(1.0, abs=1e-12)


def test_all_zero_image():
    with pytest.raises(AllZeroInput):
        density_from_image(np.zeros((4, 4)), floor=0.0)


def test_single_pixel():
    img = np.zeros((4, 4))
    img[1, 2] = 0.3
    d = density_from_image(img, floor=0.0)
    assert d.values[1, 2] == pytest.approx(16.0)
    assert np.count_nonzero(d.values) == 1


def test_floor_fills_empty_cells():
    img = np.zeros((4, 4))
    img[0, 0] = 1.0
    d = density_from_image(img, floor=0.5)
    assert d.values.min() > 0
    assert d.values[0, 0] / d.values[3, 3] == pytest.approx(3.0)


def test_density_invariants_enforced():
    with pytest.raises(ValueError):
        DensityField(np.full((4, 4), 2.0))
    with pytest.raises(ValueError):
        DensityField(np.array([[2.0, -0.5], [1.0, 1.5]]))
    with pytest.raises(GridMismatch):
        DensityField(np.ones((4, 4)), Grid2D(2, 8))


@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(2, 12)),
              elements=st.floats(0, 1e6, allow_nan=False)),
       st.floats(0, 1))
def test_density_from_image_property(pixels, floor):
    if pixels.max() <= 0:
        with pytest.raises(AllZeroInput):
            density_from_image(pixels, floor)
        return
    d = density_from_image(pixels, floor)
    assert d.values.min() >= 0
    assert abs(d.mass() - 1) <= 1e-12
    assert d.shape == pixels.shape


def test_integrate_against_examples():
    mu = density_from_image(np.random.default_rng(1).random((6, 6)))
    assert integrate_against(np.full((6, 6), 3.0), mu) == pytest.approx(3.0, abs=1e-12)
    assert integrate_against(np.zeros((6, 6)), mu) == 0.0
    left = np.zeros((6, 6))
    left[:3] = 1.0
    assert integrate_against(left, DensityField(np.ones((6, 6)))) == pytest.approx(0.5)


@given(st.integers(0, 2**32 - 1))
def test_integrate_against_is_linear(seed):
    rng = np.random.default_rng(seed)
    mu = density_from_image(rng.random((5, 4)))
    f, g = rng.standard_normal((2, 5, 4))
    total = integrate_against(f + g, mu)
    assert total == pytest.approx(integrate_against(f, mu) + integrate_against(g, mu), abs=1e-12)


def test_integrate_against_grid_mismatch():
    with pytest.raises(GridMismatch):
        integrate_against(np.zeros((3, 3)), DensityField(np.ones((4, 4))))


def test_l1_distance_examples():
    u = DensityField(np.ones((4, 4)))
    assert l1_distance(u, u) == 0.0
    a = np.zeros((4, 4))
    a[:2] = 2.0
    assert l1_distance(DensityField(a), DensityField(2.0 - a)) == pytest.approx(2.0)
    assert l1_distance(u, DensityField(1.0 * u.values)) == 0.0
    with pytest.raises(GridMismatch):
        l1_distance(u, DensityField(np.ones((2, 8))))


def test_as_values_passthrough():
    d = DensityField(np.ones((2, 2)))
    assert as_values(d) is d.values


@pytest.mark.parametrize("bits", [8, 16])
def test_pgm_roundtrip(tmp_path, bits):
    img = np.arange(12, dtype=float).reshape(3, 4)
    path = tmp_path / "a.pgm"
    write_pgm(path, img, bits=bits)
    back = read_pgm(path)
    peak = 255 if bits == 8 else 65535
    np.testing.assert_array_equal(back, np.rint(img / img.max() * peak))
    np.testing.assert_array_equal(read_image(path), back)


def test_pgm_header_with_comment(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 2\n255\n" + bytes([0, 10, 20, 255]))
    np.testing.assert_array_equal(read_pgm(path), [[0, 10], [20, 255]])


def test_png_roundtrip(tmp_path):
    img = np.linspace(0, 1, 20).reshape(4, 5)
    path = tmp_path / "a.png"
    write_image(path, img)
    np.testing.assert_array_equal(read_image(path), np.rint(img * 255))


def test_raw_dump_layout(tmp_path):
    vals = np.random.default_rng(2).standard_normal((3, 5))
    path = tmp_path / "f.raw"
    write_raw(path, vals)
    data = path.read_bytes()
    assert data[:8] == RAW_MAGIC and len(data) == 16 + 8 * 15
    assert int.from_bytes(data[8:12], "little") == 3 and int.from_bytes(data[12:16], "little") == 5
    np.testing.assert_array_equal(read_raw(path), vals)


def test_raw_dump_rejects_garbage(tmp_path):
    path = tmp_path / "bad.raw"
    path.write_bytes(b"NOTMMOT\0" + bytes(8))
    with pytest.raises(ValueError):
        read_raw(path)
