import numpy as np
import pytest

from curveflow.gridfn import (
    GridFunction1D,
    GridFunction2D,
    ModulationField,
    read_grid_function,
    write_grid_function,
)


def make1d():
    xs = np.linspace(-2.0, 2.0, 81)
    return GridFunction1D(-2.0, 0.05, np.exp(1j * xs) * np.cos(xs))


def make2d():
    x1 = np.linspace(-1.0, 1.0, 21)
    x2 = np.linspace(0.0, 3.0, 31)
    v = np.outer(np.sin(x1), np.cos(x2)) + 1j * np.outer(x1, x2)
    return GridFunction2D(-1.0, 0.1, 0.0, 0.1, v)


def test_grid1d_validation():
    with pytest.raises(ValueError):
        GridFunction1D(0.0, -1.0, np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction1D(0.0, 1.0, np.zeros(1))


def test_sample_linear_interpolation():
    f = GridFunction1D(0.0, 1.0, np.array([0.0, 2.0, 4.0]))
    assert f.sample(0.5) == pytest.approx(1.0)
    assert f.sample(1.75) == pytest.approx(3.5)
    # zero extension outside
    assert f.sample(-0.01) == 0.0
    assert f.sample(2.01) == 0.0
    assert f.sample(2.0) == pytest.approx(4.0)


def test_sample_bilinear_interpolation():
    v = np.array([[0.0, 1.0], [2.0, 3.0]])
    f = GridFunction2D(0.0, 1.0, 0.0, 1.0, v)
    assert f.sample(0.5, 0.5) == pytest.approx(1.5)
    assert f.sample(0.0, 1.0) == pytest.approx(1.0)
    assert f.sample(1.0, 1.0) == pytest.approx(3.0)
    assert f.sample(-0.1, 0.5) == 0.0
    assert f.sample(0.5, 1.2) == 0.0


def test_covers():
    f = make1d()
    assert f.covers(-2.0, 2.0)
    assert not f.covers(-2.1, 2.0)
    g = make2d()
    assert g.covers(-1.0, 1.0, 0.0, 3.0)
    assert not g.covers(-1.0, 1.0, 0.0, 3.5)


@pytest.mark.parametrize("fmt,suffix", [("csv", ".csv"), ("binary", ".cfgf")])
def test_roundtrip_1d(tmp_path, fmt, suffix):
    f = make1d()
    p = tmp_path / f"f{suffix}"
    write_grid_function(str(p), f, fmt=fmt)
    g = read_grid_function(str(p))
    assert isinstance(g, GridFunction1D)
    assert g.origin == f.origin and g.step == f.step
    np.testing.assert_array_equal(g.values, f.values)


@pytest.mark.parametrize("fmt,suffix", [("csv", ".csv"), ("binary", ".cfgf")])
def test_roundtrip_2d(tmp_path, fmt, suffix):
    f = make2d()
    p = tmp_path / f"f{suffix}"
    write_grid_function(str(p), f, fmt=fmt)
    g = read_grid_function(str(p))
    assert isinstance(g, GridFunction2D)
    assert (g.x1_origin, g.h1, g.x2_origin, g.h2) == (
        f.x1_origin,
        f.h1,
        f.x2_origin,
        f.h2,
    )
    np.testing.assert_array_equal(g.values, f.values)


def test_binary_magic_bytes(tmp_path):
    f = make1d()
    p = tmp_path / "f.cfgf"
    write_grid_function(str(p), f)
    assert p.read_bytes()[:4] == b"CFGF"


def test_csv_header_shape(tmp_path):
    f = make2d()
    p = tmp_path / "f.csv"
    write_grid_function(str(p), f)
    first = p.read_text().splitlines()[0].split()
    assert first[:2] == ["#", "grid2d"]
    assert int(first[4]) == f.n1 and int(first[7]) == f.n2


def test_modulation_constant_and_polynomial():
    u = ModulationField.constant(3.0)
    assert np.all(u.eval(np.array([-5.0, 0.0, 7.0])) == 3.0)
    assert u.is_constant
    p = ModulationField.polynomial([1.0, 2.0, 1.0])  # 1 + 2x + x^2
    assert p.eval(2.0) == pytest.approx(9.0)
    assert not p.is_constant


def test_modulation_piecewise():
    u = ModulationField.piecewise([0.0, 1.0], [-1.0, 5.0, 2.0])
    got = u.eval(np.array([-0.5, 0.5, 0.99, 1.01]))
    np.testing.assert_allclose(got, [-1.0, 5.0, 5.0, 2.0])
    with pytest.raises(ValueError):
        ModulationField.piecewise([1.0, 0.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ModulationField.piecewise([0.0], [1.0])


def test_modulation_from_grid_clamps_edges():
    g = GridFunction1D(0.0, 1.0, np.array([2.0, 4.0, 6.0]))
    u = ModulationField.from_grid(g)
    assert u.eval(0.5) == pytest.approx(3.0)
    assert u.eval(-10.0) == pytest.approx(2.0)
    assert u.eval(10.0) == pytest.approx(6.0)
