import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.integrate import quad

from shiftnorm.fields import Grid, l2_norm, sample, sine_bump
from shiftnorm.geometry import ConvexDomain
from shiftnorm.linalg import dense_norm
from shiftnorm.operators import (SparseOperator, adjoint, check_semigroup_property,
                                 check_strong_continuity, generator_matrix, numerical_range_min,
                                 ray_integral_apply, resolvent_check, resolvent_norm, shift_apply,
                                 shift_matrix, verify_left_inverse)
from shiftnorm.suites import left_inverse_test_field

INTERVAL = ConvexDomain.box([0.0], [1.0])


def test_shift_identity_and_explicit_1d():
    f = sample(INTERVAL, 1 / 16, lambda X: X[:, 0])
    assert np.array_equal(shift_apply(f, [0.0], 0.0).values, f.values)
    g = shift_apply(f, [0.0], 0.25)
    x = f.grid.nodes[:, 0]
    expected = np.where(x + 0.25 < 1 - 1e-12, x + 0.25, 0.0)
    np.testing.assert_allclose(g.values, expected, atol=1e-14)


def test_grid_aligned_semigroup_is_exact():
    f = sample(INTERVAL, 1 / 64, lambda X: np.sin(3 * X[:, 0]))
    h = f.grid.h
    assert check_semigroup_property(f, [0.0], 3 * h, 5 * h) < 1e-14
    assert check_semigroup_property(f, [0.0], 0.0, 0.3) == 0.0


def test_semigroup_residual_refines(unit_disk):
    res = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        f = sample(unit_disk, h, sine_bump(unit_disk))
        res.append(check_semigroup_property(f, [0.0, -1.0], 0.137, 0.291))
    assert res[0] > res[1] > res[2]


@pytest.mark.parametrize("h", [1 / 8, 1 / 16])
def test_shift_is_contraction(unit_disk, h):
    grid = Grid.build(unit_disk, h)
    for t in (0.05, 0.3, 1.2):
        assert dense_norm(shift_matrix(grid, [1.0, 0.0], t)) <= 1 + 10 * h


def test_strong_continuity_monotone(unit_square):
    f = sample(unit_square, 1 / 64, sine_bump(unit_square))
    seq = check_strong_continuity(f, [0.5, 0.0], [2.0 ** -k for k in range(1, 7)])
    tol = 1e-9 * l2_norm(f)
    assert all(b <= a + tol for a, b in zip(seq, seq[1:]))
    assert check_strong_continuity(f * 0, [0.5, 0.0], [0.5, 0.25]) == [0.0, 0.0]
    assert check_strong_continuity(f, [0.5, 0.0], [0.0]) == [0.0]


def test_centered_generator_is_minus_radial_derivative(unit_square):
    h = 1 / 32
    f = sample(unit_square, h, lambda X: X[:, 0])
    Af = generator_matrix(f.grid, [0.0, 0.0], "centered").apply(f).values
    X = f.grid.nodes
    away = np.all((X > 2 * h) & (X < 1 - 2 * h), axis=1)
    np.testing.assert_allclose(Af[away], -X[away, 0] / np.linalg.norm(X[away], axis=1), atol=1e-10)


def test_ray_integral_1d():
    h = 1 / 64
    one = ray_integral_apply(sample(INTERVAL, h, lambda X: np.ones(len(X))), [0.0])
    lin = ray_integral_apply(sample(INTERVAL, h, lambda X: X[:, 0]), [0.0])
    r = one.grid.nodes[:, 0]
    assert np.max(np.abs(one.values - r)) <= h
    assert np.max(np.abs(lin.values - r ** 2 / 2)) <= h ** 2


def test_ray_integral_matches_adaptive_quadrature(unit_disk):
    def fn(X):
        X = np.atleast_2d(X)
        return np.sin(np.pi * (X[:, 0] + 1) / 2) * np.sin(np.pi * (X[:, 1] + 1) / 2)

    P = np.array([-1.0, 0.0])
    f = sample(unit_disk, 1 / 128, fn)
    Bf = ray_integral_apply(f, P).values
    idx = np.random.default_rng(0).choice(f.grid.size, 40, replace=False)
    ref = []
    for k in idx:
        d = f.grid.nodes[k] - P
        r = np.linalg.norm(d)
        ref.append(quad(lambda s: fn(P + s * d / r)[0], 0, r, epsabs=1e-13, epsrel=1e-12)[0])
    ref = np.array(ref)
    assert np.max(np.abs(Bf[idx] - ref)) <= 1e-4 * np.max(np.abs(ref))


def test_left_inverse_1d_and_zero():
    field = left_inverse_test_field(INTERVAL)
    grid = Grid.build(INTERVAL, 1 / 128)
    assert verify_left_inverse(grid, [1.0], [field]) < 0.05
    assert verify_left_inverse(grid, [1.0], [lambda X: 0 * X[:, 0]]) == 0.0


def test_left_inverse_sign():
    """B(Af) reproduces -f; the literal composition misses by about 2."""
    grid = Grid.build(INTERVAL, 1 / 128)
    f = grid.sample(left_inverse_test_field(INTERVAL))
    A = generator_matrix(grid, [1.0], "centered")
    from shiftnorm.operators import ray_integral_matrix
    BAf = ray_integral_matrix(grid, [1.0]).apply(A.apply(f))
    assert l2_norm(BAf - f) / l2_norm(f) == pytest.approx(2.0, abs=0.05)


@pytest.mark.slow
def test_left_inverse_refines_on_disk(unit_disk):
    field = left_inverse_test_field(unit_disk)
    res = [verify_left_inverse(Grid.build(unit_disk, h), [0.0, -1.0], [field])
           for h in (1 / 16, 1 / 32, 1 / 64)]
    assert res[0] / res[1] >= 1.5 and res[1] / res[2] >= 1.5


def test_upwind_accretive_and_resolvent_matches_dense(unit_square):
    grid = Grid.build(unit_square, 1 / 16)
    A = generator_matrix(grid, [1.0, 0.0], "upwind")
    assert numerical_range_min(A, 500) >= -1e-10
    Ad = A.matrix.toarray()
    report = resolvent_check(A, [0.1, 1.0, 10.0, 1 + 1j])
    assert report.verdict
    for lam, nrm, bound in report.norms:
        exact = dense_norm(np.linalg.inv(lam * np.eye(grid.size) + Ad))
        # power iteration approaches the norm from below
        assert exact * (1 - 1e-3) <= nrm <= exact * (1 + 1e-12)
        assert exact <= bound * (1 + 1e-8)
    assert resolvent_norm(A, 10.0) <= 0.1 * (1 + 1e-8)


def test_upwind_generator_injective(unit_square):
    A = generator_matrix(Grid.build(unit_square, 1 / 8), [0.0, 1.0], "upwind").matrix.toarray()
    assert np.linalg.svd(A, compute_uv=False).min() > 1e-3


def test_centered_resolvent_is_reported_only(unit_square):
    A = generator_matrix(Grid.build(unit_square, 1 / 8), [1.0, 0.0], "centered")
    report = resolvent_check(A, [1.0])
    assert len(report.norms) == 1
    with pytest.raises(ValueError):
        resolvent_check(A, [0.0])


def test_adjoint_properties(unit_disk, rng):
    grid = Grid.build(unit_disk, 1 / 8)
    A = generator_matrix(grid, [0.0, 1.0], "centered")
    As = adjoint(A)
    assert (adjoint(As).matrix != A.matrix).nnz == 0
    assert adjoint(As).tag == A.tag
    f = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    g = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    assert np.vdot(g, A @ f) == pytest.approx(np.vdot(As @ g, f), rel=1e-12)
    sym = SparseOperator(sp.diags(np.arange(grid.size, dtype=float)), "diag", grid)
    assert (adjoint(sym).matrix != sym.matrix).nnz == 0


def test_triples_round_trip(unit_disk, tmp_path):
    grid = Grid.build(unit_disk, 1 / 8)
    A = generator_matrix(grid, [0.0, 1.0], "upwind")
    p = tmp_path / "A.txt"
    A.write_triples(p)
    B = SparseOperator.read_triples(p, grid)
    assert B.tag == A.tag
    assert abs(B.matrix - A.matrix).max() < 1e-11 * abs(A.matrix).max()


_disk_grid = Grid.build(ConvexDomain.ball([0, 0], 1.0), 1 / 8)


@given(st.floats(0.0, 2.5), st.floats(0.0, 2 * np.pi))
def test_shift_rows_are_substochastic(t, angle):
    """Interpolation weights are nonnegative and sum to at most one."""
    T = shift_matrix(_disk_grid, [np.cos(angle), np.sin(angle)], t)
    assert T.min() >= 0
    assert np.asarray(T.sum(axis=1)).max() <= 1 + 1e-12
