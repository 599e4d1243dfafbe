import numpy as np
import pytest
import scipy.sparse as sp

from shiftnorm.elliptic import (CoefficientField, EllipticityError, apply_G, assemble_elliptic,
                                coercivity_check, decomposition_residual, elliptic_accretivity,
                                poincare_constant, sesquilinear_bound_check)
from shiftnorm.fields import Grid, h10_norm, l2_norm, sample
from shiftnorm.geometry import AnchorSet
from shiftnorm.operators import generator_matrix, ray_integral_matrix
from shiftnorm.suites import compact_fields, left_inverse_test_field


def test_identity_1d_is_tridiagonal(unit_interval):
    grid = Grid.build(unit_interval, 1 / 16)
    L = assemble_elliptic(grid, CoefficientField.identity(1)).matrix
    N = grid.size
    ref = sp.diags([-np.ones(N - 1), 2 * np.ones(N), -np.ones(N - 1)], [-1, 0, 1]) / grid.h ** 2
    assert abs(L - ref).max() < 1e-9


def test_identity_2d_five_point(unit_square):
    grid = Grid.build(unit_square, 1 / 8)
    L = assemble_elliptic(grid, CoefficientField.identity(2)).matrix
    assert np.allclose(L.diagonal(), 4 / grid.h ** 2)
    assert np.all(np.diff(L.indptr) <= 5)


def test_scaling(unit_square):
    grid = Grid.build(unit_square, 1 / 8)
    L1 = assemble_elliptic(grid, CoefficientField.identity(2)).matrix
    L2 = assemble_elliptic(grid, CoefficientField.identity(2, 2.0)).matrix
    assert abs(L2 - 2 * L1).max() < 1e-9


def test_variable_coefficient_second_order(unit_interval):
    a = CoefficientField.from_function("quadratic", 1, lambda X: (1 + X[:, 0] ** 2 / 2)[:, None, None], 1.0)

    def f(X):
        return np.sin(np.pi * X[:, 0])

    def minus_af_prime_prime(X):
        x = X[:, 0]
        return -(x * np.pi * np.cos(np.pi * x) - (1 + x ** 2 / 2) * np.pi ** 2 * np.sin(np.pi * x))

    errs = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        grid = Grid.build(unit_interval, h)
        Lf = assemble_elliptic(grid, a).apply(grid.sample(f))
        errs.append(np.max(np.abs(Lf.values - minus_af_prime_prime(grid.nodes))))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_ellipticity_violation_raises(unit_square):
    bad = CoefficientField.from_function("bad", 2, lambda X: np.diag([1.0, -1.0]), 0.5)
    with pytest.raises(EllipticityError):
        assemble_elliptic(Grid.build(unit_square, 1 / 8), bad)


def test_apply_G_linear_and_zero(unit_square, rng):
    grid = Grid.build(unit_square, 1 / 16)
    L = assemble_elliptic(grid, CoefficientField.identity(2))
    f = grid.sample(lambda X: rng.normal(size=len(X)))
    g = grid.sample(lambda X: rng.normal(size=len(X)))
    lhs = apply_G(f + g, [1.0, 0.0], L)
    rhs = apply_G(f, [1.0, 0.0], L) + apply_G(g, [1.0, 0.0], L)
    assert l2_norm(lhs - rhs) <= 1e-10 * l2_norm(lhs)
    assert l2_norm(apply_G(f * 0, [1.0, 0.0], L)) == 0


def test_G_of_generator_is_ray_integral_of_operator(unit_interval):
    """G(Af) = B T B A f = -B T f, since B A f = -f on compact support."""
    res = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        grid = Grid.build(unit_interval, h)
        L = assemble_elliptic(grid, CoefficientField.identity(1))
        f = grid.sample(left_inverse_test_field(unit_interval))
        GAf = apply_G(generator_matrix(grid, [1.0], "centered").apply(f), [1.0], L)
        BLf = ray_integral_matrix(grid, [1.0]).apply(L.apply(f))
        res.append(l2_norm(GAf - BLf) / l2_norm(BLf))
    assert res[0] > res[1] > res[2]
    assert res[2] < 0.05


def test_decomposition_1d(unit_interval):
    fields = [left_inverse_test_field(unit_interval)] + compact_fields(unit_interval, seed=0, count=2)
    weak = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        rep = decomposition_residual(Grid.build(unit_interval, h), AnchorSet.from_points([[1.0]]),
                                     CoefficientField.identity(1), fields)
        weak.append(rep.weak_max)
    assert weak[-1] < 0.05
    assert weak[0] / weak[1] >= 1.5 and weak[1] / weak[2] >= 1.5


def test_decomposition_zero_field(unit_square):
    rep = decomposition_residual(Grid.build(unit_square, 1 / 8), [[1.0, 0.0], [0.0, 1.0]],
                                 CoefficientField.identity(2), [lambda X: 0 * X[:, 0]])
    assert rep.weak == [0.0, 0.0] and rep.strong == 0.0


@pytest.mark.slow
def test_decomposition_2d_with_divergence_term(unit_square):
    """The extra (n-1)/r term from the radial adjoint restores convergence in 2D."""
    fields = compact_fields(unit_square, seed=0, count=2)
    corrected = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        rep = decomposition_residual(Grid.build(unit_square, h), [[1.0, 0.0], [0.0, 1.0]],
                                     CoefficientField.identity(2), fields)
        corrected.append(max(rep.weak_corrected))
    assert corrected[0] / corrected[1] >= 1.5 and corrected[1] / corrected[2] >= 1.5


@pytest.mark.parametrize("coeffs, expected", [
    (CoefficientField.identity(2), 1.0),
    (CoefficientField.identity(2, 2.0), 2.0),
])
def test_coercivity_ratio_for_scaled_identity(unit_square, coeffs, expected):
    grid = Grid.build(unit_square, 1 / 32)
    fields = compact_fields(unit_square, seed=5, count=3)
    margin = coercivity_check(grid, coeffs, fields)
    assert margin + coeffs.gamma == pytest.approx(expected, rel=0.05)


@pytest.mark.parametrize("coeffs", [CoefficientField.diagonal([1.0, 4.0]),
                                    CoefficientField.seeded_smooth(2, 0)])
def test_coercivity_and_bound_general(unit_square, coeffs):
    grid = Grid.build(unit_square, 1 / 32)
    fields = compact_fields(unit_square, seed=5, count=3)
    assert coercivity_check(grid, coeffs, fields) >= -0.05 * coeffs.gamma
    assert sesquilinear_bound_check(grid, coeffs, fields) <= 1.05


def test_sesquilinear_self_pair_identity(unit_square):
    grid = Grid.build(unit_square, 1 / 32)
    f = grid.sample(compact_fields(unit_square, seed=2)[0])
    L = assemble_elliptic(grid, CoefficientField.identity(2))
    ratio = sesquilinear_bound_check(grid, CoefficientField.identity(2), [f], L=L)
    energy = np.real(np.vdot(f.values, L.matrix @ f.values)) * grid.cell_volume
    assert ratio == pytest.approx(energy / (np.sqrt(2) * h10_norm(f) ** 2), rel=1e-12)
    assert ratio == pytest.approx(1 / np.sqrt(2), rel=0.05)


def test_poincare_matches_discrete_spectrum(unit_interval):
    h = 1 / 128
    L = assemble_elliptic(Grid.build(unit_interval, h), CoefficientField.identity(1))
    exact = 4 / h ** 2 * np.sin(np.pi * h / 2) ** 2
    assert poincare_constant(L) == pytest.approx(exact, rel=1e-9)
    assert poincare_constant(L) == pytest.approx(np.pi ** 2, rel=0.02)


def test_elliptic_accretivity_1d(unit_interval):
    res = elliptic_accretivity(Grid.build(unit_interval, 1 / 32), CoefficientField.identity(1))
    assert res.verdict
    norms = {complex(lam).real: n for lam, n, _ in res.report.norms}
    assert norms[10.0] <= 0.1 * (1 + 1e-8)


def test_coefficient_round_trip():
    for c in (CoefficientField.identity(2, 3.0), CoefficientField.diagonal([1.0, 4.0]),
              CoefficientField.seeded_smooth(2, 7)):
        d = CoefficientField.from_dict(c.to_dict(), 2)
        X = np.random.default_rng(0).uniform(size=(10, 2))
        np.testing.assert_allclose(d(X), c(X))
        assert d.gamma == c.gamma
