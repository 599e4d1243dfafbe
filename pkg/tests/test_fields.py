import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftnorm.fields import (Grid, GridMismatchError, ScalarField, VectorField, gradient, h10_norm,
                              inner_l2n, l2_norm, lp_norm_polar, read_field_csv, sample,
                              sine_bump, write_field_csv)
from shiftnorm.geometry import ConvexDomain


def sinsin(X):
    return np.sin(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1])


def test_sample_examples(unit_square):
    f = sample(unit_square, 0.25, lambda X: np.ones(len(X)))
    assert f.grid.size == 9
    np.testing.assert_array_equal(f.values, 1)
    g = sample(unit_square, 0.25, lambda X: X[:, 0])
    np.testing.assert_allclose(g.values, g.grid.nodes[:, 0])
    left = sample(unit_square, 1 / 16, lambda X: (X[:, 0] < 0.5).astype(float))
    np.testing.assert_array_equal(left.values, [1.0 if x < 0.5 else 0.0 for x in left.grid.nodes[:, 0]])


def test_l2_norm_examples(unit_square):
    h = 1 / 64
    one = sample(unit_square, h, lambda X: np.ones(len(X)))
    assert abs(l2_norm(one) - 1) <= 2 * h
    assert l2_norm(one * 0) == 0
    assert l2_norm(sample(unit_square, h, sinsin)) == pytest.approx(0.5, rel=0.01)


def test_zero_extension(unit_disk):
    f = sample(unit_disk, 1 / 8, lambda X: np.ones(len(X)))
    full = f.full()
    assert np.all(full[~f.grid.mask] == 0)
    assert f(np.array([[3.0, 0.0]]))[0] == 0


def test_polar_norm_disk_area(unit_disk):
    f = sample(unit_disk, 1 / 64, lambda X: np.ones(len(X)))
    assert lp_norm_polar(f, [-1.0, 0.0]) == pytest.approx(np.sqrt(np.pi), rel=0.02)
    assert lp_norm_polar(f * 0, [-1.0, 0.0]) == 0


@pytest.mark.parametrize("domain_name, anchor", [("unit_disk", [0.0, 1.0]), ("unit_square", [0.5, 0.0])])
def test_polar_norm_matches_cartesian(request, domain_name, anchor):
    dom = request.getfixturevalue(domain_name)
    f = sample(dom, 1 / 64, sine_bump(dom))
    assert lp_norm_polar(f, anchor) == pytest.approx(l2_norm(f), rel=0.02)


def test_polar_norm_3d(unit_cube):
    f = sample(unit_cube, 1 / 16, sine_bump(unit_cube))
    assert lp_norm_polar(f, [0.5, 0.5, 0.0], angular_nodes=32, radial_nodes=32) == pytest.approx(
        l2_norm(f), rel=0.03)


def test_gradient_of_linear_field(unit_square):
    h = 1 / 32
    f = sample(unit_square, h, lambda X: X[:, 0])
    g = gradient(f)
    X = f.grid.nodes
    away = np.all((X > 2 * h) & (X < 1 - 2 * h), axis=1)
    np.testing.assert_allclose(g.values[0, away], 1, atol=1e-10)
    np.testing.assert_allclose(g.values[1, away], 0, atol=1e-10)


def test_gradient_second_order(unit_disk):
    def f(X):
        return (1 - np.sum(X ** 2, axis=1)) * np.cos(X[:, 0])

    def df(X):
        q = 1 - np.sum(X ** 2, axis=1)
        return np.stack([-2 * X[:, 0] * np.cos(X[:, 0]) - q * np.sin(X[:, 0]),
                         -2 * X[:, 1] * np.cos(X[:, 0])])

    errs = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        fld = sample(unit_disk, h, f)
        diff = gradient(fld).values - df(fld.grid.nodes)
        errs.append(np.sqrt(h ** 2 * np.sum(np.abs(diff) ** 2)))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_compact_gradient_vanishes_off_support(unit_square):
    f = sample(unit_square, 1 / 32, lambda X: np.where(np.abs(X[:, 0] - 0.5) < 0.1, 1.0, 0.0))
    g = gradient(f)
    far = np.abs(f.grid.nodes[:, 0] - 0.5) > 0.2
    assert np.all(g.values[:, far] == 0)


def test_h10_norm(unit_square):
    assert h10_norm(sample(unit_square, 1 / 64, lambda X: 0 * X[:, 0])) == 0
    assert h10_norm(sample(unit_square, 1 / 64, sinsin)) == pytest.approx(np.pi / np.sqrt(2), rel=0.02)


def test_inner_l2n_examples(unit_square, rng):
    grid = Grid.build(unit_square, 1 / 32)
    ex = VectorField(grid, np.stack([np.ones(grid.size), np.zeros(grid.size)]))
    ey = VectorField(grid, np.stack([np.zeros(grid.size), np.ones(grid.size)]))
    assert abs(inner_l2n(ex, ex) - 1) <= 2 * grid.h
    assert inner_l2n(ex, ey) == 0
    F = rng.normal(size=(2, grid.size)) + 1j * rng.normal(size=(2, grid.size))
    G = rng.normal(size=(2, grid.size)) + 1j * rng.normal(size=(2, grid.size))
    ref = grid.h ** 2 * np.dot(F.ravel(), G.ravel().conj())
    assert inner_l2n(VectorField(grid, F), VectorField(grid, G)) == pytest.approx(ref, rel=1e-12)


def test_grid_mismatch(unit_square):
    a = sample(unit_square, 1 / 8, lambda X: X[:, 0])
    b = sample(unit_square, 1 / 16, lambda X: X[:, 0])
    with pytest.raises(GridMismatchError):
        a + b
    with pytest.raises(GridMismatchError):
        ScalarField(a.grid, np.zeros(3))


def test_field_csv_round_trip(unit_disk, tmp_path):
    f = sample(unit_disk, 1 / 8, lambda X: X[:, 0] + 1j * X[:, 1] ** 2)
    p = tmp_path / "f.csv"
    write_field_csv(p, f)
    g = read_field_csv(p, f.grid)
    np.testing.assert_allclose(g.values, f.values, rtol=1e-11, atol=1e-14)


_grid = Grid.build(ConvexDomain.box([0, 0], [1, 1]), 1 / 8)
_vec = st.lists(st.floats(-5, 5), min_size=4 * _grid.size, max_size=4 * _grid.size)


def _field(v):
    v = np.array(v)
    return VectorField(_grid, (v[: 2 * _grid.size] + 1j * v[2 * _grid.size:]).reshape(2, -1))


@given(_vec, _vec, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_inner_l2n_hermitian_sesquilinear(u, v, c):
    f, g = _field(u), _field(v)
    assert inner_l2n(f, g) == pytest.approx(np.conj(inner_l2n(g, f)), abs=1e-9)
    assert inner_l2n(f * c, g) == pytest.approx(c * inner_l2n(f, g), abs=1e-9)
    assert inner_l2n(f, f).real >= 0
