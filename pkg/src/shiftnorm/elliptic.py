"""Divergence-form elliptic operators and the directional factorisation checks.

``L = -T`` with ``T f = D_j(a^{ij} D_i f)`` is assembled in flux form: the
flux along axis ``j`` lives on the cell midpoints of that axis, so that
``(L f, g) = sum_ij (a^{ij} D_i f, D_j g)`` holds exactly on the grid.
Unknowns are interior nodes; every other node is a homogeneous Dirichlet
value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field as dc_field
from functools import reduce
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import FMT, Grid, ScalarField, h10_norm, l2_norm
from .geometry import DimensionMismatchError, directions
from .operators import (AccretivityReport, SparseOperator, generator_matrix, ray_integral_matrix,
                        resolvent_check)

ELLIPTICITY_SLACK = 1e-12


class EllipticityError(ValueError):
    pass


def _rotation(n: int, angle: float) -> np.ndarray:
    R = np.eye(n)
    if n >= 2:
        c, s = np.cos(angle), np.sin(angle)
        R[:2, :2] = [[c, -s], [s, c]]
    return R


@dataclass(frozen=True)
class CoefficientField:
    """Matrix coefficient ``a(Q)`` with declared ellipticity constant ``gamma``.

    ``fn`` maps points ``(m, n)`` to matrices ``(m, n, n)``.
    """

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    gamma: float
    params: dict = dc_field(default_factory=dict)
    smoothness: str = "C-infinity"

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        a = np.asarray(self.fn(X), dtype=float)
        return np.broadcast_to(a, (X.shape[0], self.dim, self.dim))

    @classmethod
    def identity(cls, dim: int, scale: float = 1.0) -> CoefficientField:
        a = scale * np.eye(dim)
        return cls("identity", dim, lambda X: a, float(scale), {"scale": scale})

    @classmethod
    def diagonal(cls, values) -> CoefficientField:
        v = np.asarray(values, dtype=float)
        a = np.diag(v)
        return cls("diagonal", v.size, lambda X: a, float(v.min()), {"values": v.tolist()})

    @classmethod
    def rotated_diagonal(cls, values, angle: float) -> CoefficientField:
        """``R diag(values) R^T`` with ``R`` a rotation in the first coordinate plane."""
        v = np.asarray(values, dtype=float)
        R = _rotation(v.size, angle)
        a = R @ np.diag(v) @ R.T
        return cls("rotated-diagonal", v.size, lambda X: a, float(v.min()),
                   {"values": v.tolist(), "angle": angle})

    @classmethod
    def seeded_smooth(cls, dim: int, seed: int, contrast: float = 0.5,
                      skew: float = 0.2) -> CoefficientField:
        """Smooth, possibly non-symmetric field with symmetric part ``>= 1 - contrast``.

        The symmetric part is ``R(x) diag(1 + contrast sin(...)) R(x)^T``; a
        smooth antisymmetric term of size ``skew`` is added, which leaves the
        quadratic form unchanged.
        """
        rng = np.random.default_rng(seed)
        k = rng.normal(size=(dim + 2, dim)) * 2.0
        phase = rng.uniform(0, 2 * np.pi, size=dim + 2)

        def fn(X):
            waves = np.sin(X @ k.T + phase)
            d = 1.0 + contrast * waves[:, :dim]
            theta = np.pi * waves[:, dim]
            c, s = np.cos(theta), np.sin(theta)
            R = np.broadcast_to(np.eye(dim), (X.shape[0], dim, dim)).copy()
            if dim >= 2:
                R[:, 0, 0], R[:, 0, 1], R[:, 1, 0], R[:, 1, 1] = c, -s, s, c
            a = np.einsum("mik,mk,mjk->mij", R, d, R)
            if dim >= 2:
                w = skew * waves[:, dim + 1]
                a[:, 0, 1] += w
                a[:, 1, 0] -= w
            return a

        return cls("seeded-smooth", dim, fn, 1.0 - contrast,
                   {"seed": seed, "contrast": contrast, "skew": skew})

    @classmethod
    def from_function(cls, name: str, dim: int, fn, gamma: float) -> CoefficientField:
        return cls(name, dim, fn, float(gamma))

    @classmethod
    def from_dict(cls, spec: dict, dim: int) -> CoefficientField:
        kind = spec.get("kind", "identity")
        if kind == "identity":
            return cls.identity(dim, spec.get("scale", 1.0))
        if kind == "diagonal":
            return cls.diagonal(spec["values"])
        if kind in ("rotated-diagonal", "rotated_diagonal"):
            return cls.rotated_diagonal(spec["values"], spec.get("angle", np.pi / 6))
        if kind in ("seeded-smooth", "seeded_smooth"):
            return cls.seeded_smooth(dim, spec.get("seed", 0), spec.get("contrast", 0.5),
                                     spec.get("skew", 0.2))
        raise ValueError(f"unknown coefficient kind {kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.name, **self.params}

    def check(self, X, samples: int = 50, seed: int = 0) -> None:
        """Raise unless ``xi^T a xi >= gamma |xi|^2`` for random ``xi`` at every point."""
        a = self(X)
        if not np.all(np.isfinite(a)):
            raise EllipticityError("coefficient field has non-finite entries")
        xi = np.random.default_rng(seed).normal(size=(samples, self.dim))
        q = np.einsum("si,mij,sj->ms", xi, a, xi)
        slack = q - self.gamma * np.sum(xi * xi, axis=1)[None, :]
        if slack.min() < -ELLIPTICITY_SLACK * max(1.0, np.abs(q).max()):
            m = np.unravel_index(np.argmin(slack), slack.shape)[0]
            raise EllipticityError(f"ellipticity fails at point {np.atleast_2d(X)[m]}")

    def a1(self, X) -> float:
        """Largest Frobenius norm of ``a`` over the points."""
        return float(np.sqrt(np.max(np.sum(self(X) ** 2, axis=(1, 2)))))


# -- assembly -----------------------------------------------------------------


def _forward(m: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(m - 1), np.ones(m - 1)], [0, 1], shape=(m - 1, m), format="csr") / h


def _average(m: int) -> sp.csr_matrix:
    return sp.diags([np.full(m - 1, 0.5), np.full(m - 1, 0.5)], [0, 1], shape=(m - 1, m), format="csr")


def _central(m: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(m - 1), np.ones(m - 1)], [-1, 1], shape=(m, m), format="csr") / (2 * h)


def _kron(factors) -> sp.csr_matrix:
    return reduce(lambda A, B: sp.kron(A, B, format="csr"), factors)


def _midpoints(grid: Grid, j: int) -> np.ndarray:
    axes = [grid.lo[k] + grid.h * (np.arange(grid.shape[k] - (k == j)) + 0.5 * (k == j))
            for k in range(grid.dim)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim)


def flux_matrices(grid: Grid, j: int) -> list[sp.csr_matrix]:
    """``D_i`` evaluated on the axis-``j`` midpoints, acting on full-grid vectors."""
    eye = [sp.identity(m, format="csr") for m in grid.shape]
    out = []
    for i in range(grid.dim):
        f = list(eye)
        if i == j:
            f[j] = _forward(grid.shape[j], grid.h)
        else:
            f[j] = _average(grid.shape[j])
            f[i] = _central(grid.shape[i], grid.h)
        out.append(_kron(f))
    return out


def extension_matrix(grid: Grid) -> sp.csr_matrix:
    """Zero extension from interior unknowns to the full grid."""
    full = np.flatnonzero(grid.mask.ravel())
    return sp.csr_matrix((np.ones(grid.size), (full, np.arange(grid.size))),
                         shape=(grid.mask.size, grid.size))


def assemble_elliptic(grid: Grid, coeffs: CoefficientField) -> SparseOperator:
    """``L = -T`` on interior nodes; ``a = I`` gives the standard ``(2n+1)``-point Laplacian."""
    if coeffs.dim != grid.dim:
        raise DimensionMismatchError(f"coefficients are {coeffs.dim}-D, grid is {grid.dim}-D")
    coeffs.check(grid.nodes)
    E = extension_matrix(grid)
    L = sp.csr_matrix((grid.mask.size, grid.mask.size))
    for j in range(grid.dim):
        mid = _midpoints(grid, j)
        a = coeffs(mid)
        D = flux_matrices(grid, j)
        flux = sum(sp.diags(a[:, i, j]) @ D[i] for i in range(grid.dim))
        L = L + D[j].T @ flux
    return SparseOperator(E.T @ L @ E, "elliptic", grid)


def apply_G(field: ScalarField, anchor, elliptic_op: SparseOperator) -> ScalarField:
    """``G f = B(T(B f))`` with ``T = -L``."""
    B = ray_integral_matrix(field.grid, anchor)
    return ScalarField(field.grid, -(B.matrix @ (elliptic_op.matrix @ (B.matrix @ field.values))))


# -- verification -------------------------------------------------------------


def _inner(grid: Grid, u, v) -> complex:
    return complex(grid.cell_volume * np.vdot(v, u))


@dataclass
class DecompositionReport:
    weak: list
    strong: float
    coercivity_margin: float
    sesquilinear_ratio: float
    a1: float
    gamma: float
    g_norms: list = dc_field(default_factory=list)
    accretivity: list = dc_field(default_factory=list)
    weak_corrected: list = dc_field(default_factory=list)

    def __post_init__(self):
        if min(self.weak + [self.strong], default=0.0) < 0:
            raise ValueError("residuals must be nonnegative")

    @property
    def weak_max(self) -> float:
        return max(self.weak, default=0.0)

    def to_dict(self) -> dict:
        return {"weak": self.weak, "weak_max": self.weak_max, "strong": self.strong,
                "coercivity_margin": self.coercivity_margin,
                "sesquilinear_ratio": self.sesquilinear_ratio, "a1": self.a1, "gamma": self.gamma,
                "g_norms": self.g_norms, "accretivity": self.accretivity,
                "weak_corrected": self.weak_corrected}

    def write(self, directory, stem: str) -> list[Path]:
        d = Path(directory)
        out = [d / f"{stem}.json", d / f"{stem}_residuals.csv"]
        out[0].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with out[1].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["anchor", "weak_residual", "g_norm", "min_re_GAf_Af", "weak_corrected"])
            for i, row in enumerate(zip(self.weak, self.g_norms, self.accretivity,
                                        self.weak_corrected)):
                w.writerow([i] + [FMT % x for x in row])
        return out


def _fields(grid: Grid, fields) -> list[ScalarField]:
    out = [f if isinstance(f, ScalarField) else grid.sample(f) for f in fields]
    return [f for f in out if np.any(f.values != 0)]


def energy_norm(L: SparseOperator, f: ScalarField) -> float:
    return float(np.sqrt(max(_inner(f.grid, L.matrix @ f.values, f.values).real, 0.0)))


def decomposition_residual(grid: Grid, anchors, coeffs: CoefficientField, test_fields,
                           scheme: str = "centered") -> DecompositionReport:
    """Check ``(L f, g) = (G_i A_i f, A_i g)`` per anchor and the averaged strong form.

    Weak residuals are ``|(L f, g) - (G_i A_i f, A_i g)| / (|f|_E |g|_E)``
    with the energy norm ``|f|_E^2 = (L f, f)``, maximised over ordered pairs
    of distinct test fields (and ``g = f``).  The strong residual is
    ``|L f - (1/n) sum_i A_i^* G_i A_i f| / |L f|``.

    In ``n >= 2`` the adjoint of the radial derivative carries the divergence
    ``(n - 1)/r`` of the direction field, so the identity only holds with the
    extra term ``(n - 1)(B L f / r, g)``.  ``weak_corrected`` reports the
    residual with that term included.
    """
    pts = np.atleast_2d(np.asarray(anchors.points if hasattr(anchors, "points") else anchors,
                                   dtype=float))
    L = assemble_elliptic(grid, coeffs)
    fs = _fields(grid, test_fields)
    As = [generator_matrix(grid, P, scheme).matrix for P in pts]
    Bs = [ray_integral_matrix(grid, P).matrix for P in pts]
    Lm = L.matrix

    def G(i, u):
        return -(Bs[i] @ (Lm @ (Bs[i] @ u)))

    weak, g_norms, accr, corrected = [], [], [], []
    for i in range(len(pts)):
        worst, gmax, amin, cworst = 0.0, 0.0, np.inf, 0.0
        _, r = directions(pts[i], grid.nodes)
        for f in fs:
            BLf_r = (Bs[i] @ (Lm @ f.values)) / r
            Af = As[i] @ f.values
            GAf = G(i, Af)
            ef = energy_norm(L, f)
            amin = min(amin, _inner(grid, GAf, Af).real / max(_inner(grid, Af, Af).real, 1e-300))
            gmax = max(gmax, l2_norm(ScalarField(grid, GAf)) / max(l2_norm(ScalarField(grid, Af)), 1e-300))
            for g in fs:
                lhs = _inner(grid, Lm @ f.values, g.values)
                rhs = _inner(grid, GAf, As[i] @ g.values)
                scale = ef * energy_norm(L, g)
                worst = max(worst, abs(lhs - rhs) / scale)
                corr = (grid.dim - 1) * _inner(grid, BLf_r, g.values)
                cworst = max(cworst, abs(rhs - lhs - corr) / scale)
        weak.append(worst)
        corrected.append(cworst)
        g_norms.append(gmax)
        accr.append(amin if fs else 0.0)

    strong = 0.0
    for f in fs:
        Lf = Lm @ f.values
        avg = sum(As[i].conj().T @ G(i, As[i] @ f.values) for i in range(len(pts))) / len(pts)
        strong = max(strong, float(np.linalg.norm(Lf - avg) / np.linalg.norm(Lf)))

    return DecompositionReport(
        weak=weak, strong=strong,
        coercivity_margin=coercivity_check(grid, coeffs, fs, L=L),
        sesquilinear_ratio=sesquilinear_bound_check(grid, coeffs, fs, L=L),
        a1=coeffs.a1(grid.nodes), gamma=coeffs.gamma, g_norms=g_norms, accretivity=accr,
        weak_corrected=corrected)


def coercivity_check(grid: Grid, coeffs: CoefficientField, test_fields,
                     L: SparseOperator | None = None) -> float:
    """``min Re(L f, f) / |f|^2_{H^1_0} - gamma`` over the test fields."""
    L = L or assemble_elliptic(grid, coeffs)
    ratios = []
    for f in _fields(grid, test_fields):
        ratios.append(_inner(grid, L.matrix @ f.values, f.values).real / h10_norm(f) ** 2)
    return float(min(ratios) - coeffs.gamma) if ratios else 0.0


def sesquilinear_bound_check(grid: Grid, coeffs: CoefficientField, test_fields,
                             L: SparseOperator | None = None) -> float:
    """``max |(L f, g)| / (a1 |f|_{H^1_0} |g|_{H^1_0})`` over ordered pairs, ``g = f`` included."""
    L = L or assemble_elliptic(grid, coeffs)
    fs = _fields(grid, test_fields)
    a1 = coeffs.a1(np.vstack([grid.nodes] + [_midpoints(grid, j) for j in range(grid.dim)]))
    n1 = [h10_norm(f) for f in fs]
    best = 0.0
    for f, nf in zip(fs, n1):
        Lf = L.matrix @ f.values
        for g, ng in zip(fs, n1):
            best = max(best, abs(_inner(grid, Lf, g.values)) / (a1 * nf * ng))
    return best


def poincare_constant(L: SparseOperator, dense_limit: int = 4000) -> float:
    """Smallest eigenvalue of the Hermitian part of ``L`` (``Re(Lf,f) >= c |f|^2``)."""
    Hm = ((L.matrix + L.matrix.conj().T) / 2).tocsc()
    if L.dimension <= dense_limit:
        return float(la.eigh(Hm.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0])
    return float(spla.eigsh(Hm, k=1, sigma=0, which="LM", return_eigenvectors=False)[0])


@dataclass
class EllipticAccretivity:
    report: AccretivityReport
    poincare: float

    @property
    def verdict(self) -> bool:
        return self.report.verdict and self.poincare > 0

    def to_dict(self) -> dict:
        return {**self.report.to_dict(), "poincare": self.poincare, "verdict": self.verdict}


def elliptic_accretivity(grid: Grid, coeffs: CoefficientField, t_samples=(0.1, 1.0, 10.0),
                         samples: int = 500, seed: int = 0) -> EllipticAccretivity:
    L = assemble_elliptic(grid, coeffs)
    return EllipticAccretivity(resolvent_check(L, t_samples, samples=samples, seed=seed),
                               poincare_constant(L))
