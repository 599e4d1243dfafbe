"""Directional shift semigroup, its generator, and the ray integral.

For an anchor ``P`` on the boundary every interior node ``Q`` gets the frame
``e = (Q - P)/|Q - P|``, ``r = |Q - P|``.  The shift moves values inward
along that ray, ``T_t f(Q) = f(Q + e t)``, with zero extension outside the
closed domain.  Everything here is a sparse matrix acting on interior-node
values.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import FMT, Grid, GridMismatchError, ScalarField, gradient_matrices, l2_norm
from .geometry import DimensionMismatchError, directions
from .linalg import power_norm

SCHEMES = ("upwind", "centered")
ACCRETIVITY_TOL = 1e-10
RESOLVENT_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Complex sparse matrix on the interior nodes of ``grid``."""

    matrix: sp.csr_matrix
    tag: str
    grid: Grid

    def __post_init__(self):
        M = sp.csr_matrix(self.matrix, dtype=complex)
        M.eliminate_zeros()
        M.sum_duplicates()
        if M.shape != (self.grid.size, self.grid.size):
            raise DimensionMismatchError(
                f"operator shape {M.shape} does not match {self.grid.size} nodes")
        if not np.all(np.isfinite(M.data)):
            raise ValueError("operator has non-finite entries")
        object.__setattr__(self, "matrix", M)

    @property
    def dimension(self) -> int:
        return self.grid.size

    def apply(self, f):
        """Apply to a ``ScalarField`` (returns a field) or a flat vector."""
        if isinstance(f, ScalarField):
            if not f.grid.same_as(self.grid):
                raise GridMismatchError("field and operator live on different grids")
            return ScalarField(self.grid, self.matrix @ f.values)
        v = np.asarray(f)
        if v.shape[0] != self.dimension:
            raise DimensionMismatchError(f"vector length {v.shape[0]} != {self.dimension}")
        return self.matrix @ v

    def __matmul__(self, f):
        return self.apply(f)

    def triples(self) -> np.ndarray:
        """Rows of ``(row, col, re, im)``."""
        C = self.matrix.tocoo()
        return np.column_stack([C.row, C.col, C.data.real, C.data.imag])

    def write_triples(self, path) -> None:
        C = self.matrix.tocoo()
        with Path(path).open("w") as fh:
            fh.write(f"# {self.tag} {self.dimension}\n")
            for i, j, v in zip(C.row, C.col, C.data):
                fh.write(f"{i} {j} {FMT % v.real} {FMT % v.imag}\n")

    @classmethod
    def read_triples(cls, path, grid: Grid, tag: str | None = None) -> SparseOperator:
        lines = Path(path).read_text().splitlines()
        header = lines[0].split() if lines and lines[0].startswith("#") else []
        data = np.loadtxt(lines[1:] if header else lines, ndmin=2)
        n = grid.size
        if data.size == 0:
            M = sp.csr_matrix((n, n), dtype=complex)
        else:
            M = sp.csr_matrix((data[:, 2] + 1j * data[:, 3],
                               (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n))
        return cls(M, tag or (header[1] if len(header) > 1 else "unknown"), grid)


def _frame(grid: Grid, anchor):
    P = np.asarray(anchor, dtype=float).reshape(-1)
    if P.size != grid.dim:
        raise DimensionMismatchError(f"anchor has {P.size} coordinates, grid is {grid.dim}-D")
    e, r = directions(P, grid.nodes)
    return P, e, r


def shift_matrix(grid: Grid, anchor, t: float) -> sp.csr_matrix:
    """Matrix of ``T_t`` with multilinear interpolation."""
    if t < 0:
        raise ValueError("shift length must be nonnegative")
    if t == 0:
        return sp.identity(grid.size, dtype=float, format="csr")
    _, e, _ = _frame(grid, anchor)
    return grid.interpolation_matrix(grid.nodes + t * e)


def shift_apply(field: ScalarField, anchor, t: float) -> ScalarField:
    return ScalarField(field.grid, shift_matrix(field.grid, anchor, t) @ field.values)


def generator_matrix(grid: Grid, anchor, scheme: str = "upwind") -> SparseOperator:
    """Discrete generator ``A`` (so that ``-A`` generates the shift).

    ``upwind`` is ``(I - T_h)/h`` with the interpolated shift; since that
    shift is a contraction the result is accretive.  ``centered`` is
    ``-(e, grad_h f)`` with the second-order gradient stencil.
    """
    if scheme == "upwind":
        I = sp.identity(grid.size, format="csr")
        M = (I - shift_matrix(grid, anchor, grid.h)) / grid.h
    elif scheme == "centered":
        _, e, _ = _frame(grid, anchor)
        D = gradient_matrices(grid)
        M = -sum(sp.diags(e[:, k]) @ D[k] for k in range(grid.dim))
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return SparseOperator(M, f"generator-{scheme}", grid)


def ray_integral_matrix(grid: Grid, anchor) -> SparseOperator:
    """``B f(Q) = integral of f(P + e s) for s in [0, r]`` by composite trapezoid.

    Each node uses ``max(4, ceil(r/h))`` panels, so the step never exceeds
    ``h`` and never exceeds ``r/4``.
    """
    P, e, r = _frame(grid, anchor)
    m = np.maximum(4, np.ceil(r / grid.h - 1e-9)).astype(np.int64)
    counts = m + 1
    owner = np.repeat(np.arange(grid.size), counts)
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    j = np.arange(counts.sum()) - np.repeat(start, counts)
    step = np.repeat(r / m, counts)
    s = j * step
    w = np.where((j == 0) | (j == np.repeat(m, counts)), 0.5, 1.0) * step
    X = P + s[:, None] * e[owner]
    W = grid.interpolation_matrix(X)
    R = sp.csr_matrix((w, (owner, np.arange(owner.size))), shape=(grid.size, owner.size))
    return SparseOperator(R @ W, "ray-integral", grid)


def ray_integral_apply(field: ScalarField, anchor) -> ScalarField:
    return ray_integral_matrix(field.grid, anchor).apply(field)


def _as_field(grid: Grid, f) -> ScalarField:
    if isinstance(f, ScalarField):
        if not f.grid.same_as(grid):
            raise GridMismatchError("test field lives on a different grid")
        return f
    return grid.sample(f)


def verify_left_inverse(grid: Grid, anchor, test_fields, scheme: str = "centered") -> float:
    """Largest ``||B(A f) + f|| / ||f||`` over the test fields.

    With ``A = -d/dr`` and ``B`` integrating from the anchor, a field that
    vanishes near the boundary satisfies ``B A f = -f``; the residual is the
    discretisation error of that identity.  Zero fields are skipped.
    """
    A = generator_matrix(grid, anchor, scheme)
    B = ray_integral_matrix(grid, anchor)
    worst = 0.0
    for f in test_fields:
        f = _as_field(grid, f)
        nf = l2_norm(f)
        if nf == 0:
            continue
        res = B.apply(A.apply(f)) + f
        worst = max(worst, l2_norm(res) / nf)
    return worst


def check_semigroup_property(field: ScalarField, anchor, s: float, t: float) -> float:
    """``||T_s T_t f - T_{s+t} f||``; exact except for interpolation error."""
    if s == 0 or t == 0:
        return 0.0
    lhs = shift_apply(shift_apply(field, anchor, t), anchor, s)
    return l2_norm(lhs - shift_apply(field, anchor, s + t))


def check_strong_continuity(field: ScalarField, anchor, t_sequence) -> list[float]:
    return [0.0 if t == 0 else l2_norm(shift_apply(field, anchor, t) - field)
            for t in t_sequence]


@dataclass
class AccretivityReport:
    gamma: float
    violations: list = dc_field(default_factory=list)
    norms: list = dc_field(default_factory=list)
    tol: float = ACCRETIVITY_TOL

    @property
    def verdict(self) -> bool:
        return self.gamma >= -self.tol and not self.violations

    def to_dict(self) -> dict:
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]
        return {
            "gamma": self.gamma,
            "verdict": self.verdict,
            "violations": [{"lambda": c(l), "norm": n, "bound": b} for l, n, b in self.violations],
            "resolvent_norms": [{"lambda": c(l), "norm": n, "bound": b} for l, n, b in self.norms],
        }


def numerical_range_min(op: SparseOperator, samples: int = 500, seed: int = 0) -> float:
    """Min of ``Re(A f, f)/||f||^2`` over seeded random complex vectors."""
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((op.dimension, samples)) + 1j * rng.standard_normal((op.dimension, samples))
    AF = op.matrix @ F
    q = np.real(np.einsum("ij,ij->j", AF, F.conj())) / np.einsum("ij,ij->j", F, F.conj()).real
    return float(q.min())


def resolvent_norm(op: SparseOperator, lam: complex, iterations: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of ``||(lam + A)^{-1}||_2``.

    Raises ``RuntimeError`` when ``lam + A`` is singular.
    """
    K = (lam * sp.identity(op.dimension, format="csc") + op.matrix).tocsc()
    lu = spla.splu(K)
    return power_norm(lu.solve, lambda y: lu.solve(y, trans="H"), op.dimension,
                      iterations=iterations, seed=seed)


def resolvent_check(op: SparseOperator, lambda_samples, samples: int = 500,
                    iterations: int = 50, seed: int = 0) -> AccretivityReport:
    """Check ``||(lam + A)^{-1}|| <= 1/Re lam`` and accretivity of ``op``."""
    report = AccretivityReport(gamma=numerical_range_min(op, samples, seed))
    for lam in lambda_samples:
        lam = complex(lam)
        if lam.real <= 0:
            raise ValueError("resolvent samples need Re(lambda) > 0")
        bound = 1.0 / lam.real
        try:
            nrm = resolvent_norm(op, lam, iterations, seed)
        except RuntimeError:
            report.violations.append((lam, float("inf"), bound))
            continue
        report.norms.append((lam, nrm, bound))
        if nrm > bound * (1 + RESOLVENT_RTOL):
            report.violations.append((lam, nrm, bound))
    return report


def adjoint(op: SparseOperator) -> SparseOperator:
    """Adjoint in the ``h^n``-weighted inner product; uniform weights make it ``A^H``."""
    tag = op.tag[len("adjoint-of "):] if op.tag.startswith("adjoint-of ") else f"adjoint-of {op.tag}"
    return SparseOperator(op.matrix.conj().T.tocsr(), tag, op.grid)
