"""Directional norms and their equivalence constants.

Given anchors ``P_1..P_n`` on the boundary, each node carries directions
``e_i(Q)``.  The directional form sums ``(f, e_i) conj(g, e_i)`` over the
anchors; its norm is compared with the plain vector ``L2`` norm, and the
scalar norm built from the generators ``A_i`` with the ``H^1_0`` norm.
Constants are extremal generalized eigenvalues of the discrete Gram pairs.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fields import (FMT, Grid, GridMismatchError, ScalarField, VectorField, gradient_matrices,
                     l2_norm, write_field_csv)
from .geometry import AnchorSet, ConvexDomain, DimensionMismatchError, directions
from .linalg import EIG_TOL, extremal_pencil_eigs
from .operators import generator_matrix


class QuadratureCorruptionError(ValueError):
    pass


def _points(anchors) -> np.ndarray:
    pts = anchors.points if isinstance(anchors, AnchorSet) else anchors
    return np.atleast_2d(np.asarray(pts, dtype=float))


def _directions(grid: Grid, anchors) -> np.ndarray:
    """Array ``(n_anchors, N, dim)`` of unit directions at the interior nodes."""
    pts = _points(anchors)
    if pts.shape[1] != grid.dim:
        raise DimensionMismatchError(f"anchors are {pts.shape[1]}-D, grid is {grid.dim}-D")
    return np.stack([directions(P, grid.nodes)[0] for P in pts])


def directional_form(f: VectorField, g: VectorField, anchors) -> complex:
    if not f.grid.same_as(g.grid):
        raise GridMismatchError("fields live on different grids")
    E = _directions(f.grid, anchors)
    pf = np.einsum("ink,kn->in", E, f.values)
    pg = np.einsum("ink,kn->in", E, g.values)
    return complex(f.grid.cell_volume * np.sum(pf * pg.conj()))


def bold_norm(f: VectorField, anchors) -> float:
    q = directional_form(f, f, anchors)
    scale = max(f.grid.cell_volume * float(np.sum(np.abs(f.values) ** 2)), 1e-300)
    if q.real < -1e-12 * scale or abs(q.imag) > 1e-12 * scale:
        raise QuadratureCorruptionError(f"directional form is not a nonnegative real: {q}")
    return float(np.sqrt(max(q.real, 0.0)))


def hA_norm(f: ScalarField, anchors, scheme: str = "centered") -> float:
    total = 0.0
    for P in _points(anchors):
        total += l2_norm(generator_matrix(f.grid, P, scheme).apply(f)) ** 2
    return float(np.sqrt(total))


@dataclass
class EquivalenceReport:
    """Constants with ``C0 |f| <= |f|_directional <= C1 |f|`` on one grid."""

    kind: str
    c0: float
    c1: float
    h: float
    anchors: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    residual: float = 0.0
    kernel_dim: int = 0
    history: list = dc_field(default_factory=list)
    warnings: list = dc_field(default_factory=list)

    def __post_init__(self):
        if not (0.0 <= self.c0 <= self.c1 * (1 + 1e-9)):
            raise ValueError(f"need 0 <= C0 <= C1, got C0={self.c0}, C1={self.c1}")
        if self.c0 == 0.0:
            msg = "lower constant is zero: the directional norm is degenerate on this grid"
            self.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
        if not self.history:
            self.history = [(self.h, self.c0, self.c1)]

    @property
    def dim(self) -> int:
        return self.anchors.shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "c0": self.c0, "c1": self.c1, "h": self.h,
            "anchors": self.anchors.tolist(), "residual": self.residual,
            "kernel_dim": self.kernel_dim, "warnings": list(self.warnings),
            "history": [{"h": h, "c0": a, "c1": b} for h, a, b in self.history],
        }

    def write(self, directory, stem: str, grid: Grid | None = None) -> list[Path]:
        """JSON summary, refinement-history CSV and, for scalar reports, extremal fields."""
        d = Path(directory)
        out = [d / f"{stem}.json", d / f"{stem}_history.csv"]
        out[0].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with out[1].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "c0", "c1"])
            for row in self.history:
                w.writerow([FMT % x for x in row])
        if grid is not None and self.kind == "scalar" and self.v_min.size == grid.size:
            for name, v in (("argmin", self.v_min), ("argmax", self.v_max)):
                p = d / f"{stem}_{name}.csv"
                write_field_csv(p, ScalarField(grid, v))
                out.append(p)
        return out


def _constants(lam_min: float, lam_max: float) -> tuple[float, float]:
    lam_max = max(lam_max, 0.0)
    c0 = 0.0 if lam_min <= EIG_TOL * lam_max else float(np.sqrt(lam_min))
    return c0, float(np.sqrt(lam_max))


def vector_gram(grid: Grid, anchors) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Gram matrices ``(T, M)`` of the directional form and the plain inner product.

    Unknowns are node-major, matching ``VectorField.flat``.  ``T`` is block
    diagonal with the ``n x n`` block ``h^n sum_i e_i e_i^T`` at each node.
    """
    E = _directions(grid, anchors)
    n, N = grid.dim, grid.size
    blocks = grid.cell_volume * np.einsum("ina,inb->nab", E, E)
    base = (np.arange(N) * n)[:, None, None]
    rows = np.broadcast_to(base + np.arange(n)[None, :, None], blocks.shape)
    cols = np.broadcast_to(base + np.arange(n)[None, None, :], blocks.shape)
    T = sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(n * N, n * N))
    M = grid.cell_volume * sp.identity(n * N, format="csr")
    return T, M


def scalar_gram(grid: Grid, anchors, scheme: str = "centered") -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Gram matrices ``(S, H)``: ``sum_i A_i^* A_i`` and ``sum_k D_k^T D_k``, both times ``h^n``."""
    S = sp.csr_matrix((grid.size, grid.size), dtype=complex)
    for P in _points(anchors):
        A = generator_matrix(grid, P, scheme).matrix
        S = S + A.conj().T @ A
    S = grid.cell_volume * S
    if abs(S.imag).max() if S.nnz else 0.0:
        raise ValueError("complex generator Gram is not supported")
    D = gradient_matrices(grid)
    H = grid.cell_volume * sum(Dk.T @ Dk for Dk in D)
    return sp.csr_matrix(S.real), sp.csr_matrix(H)


def _check_anchors(anchors, domain: ConvexDomain | None = None):
    if isinstance(anchors, AnchorSet):
        if not anchors.well_conditioned:
            warnings.warn(f"anchor determinant {anchors.delta:.3e} is below tolerance",
                          RuntimeWarning, stacklevel=3)
        return anchors.points
    return _points(anchors)


def equivalence_constants_vector(grid: Grid, anchors, seed: int = 0) -> EquivalenceReport:
    pts = _check_anchors(anchors)
    T, M = vector_gram(grid, pts)
    ext = extremal_pencil_eigs(T, M, seed=seed)
    c0, c1 = _constants(ext.lam_min, ext.lam_max)
    return EquivalenceReport("vector", c0, c1, grid.h, np.array(pts), ext.v_min, ext.v_max,
                             residual=ext.residual, kernel_dim=ext.kernel_dim)


def equivalence_constants_scalar(grid: Grid, anchors, scheme: str = "centered",
                                 seed: int = 0) -> EquivalenceReport:
    """Constants between the generator norm and the ``H^1_0`` norm.

    The returned constants are ``sqrt`` of the extremal eigenvalues of
    ``S v = lam H v``.  A common kernel of ``S`` and ``H`` (checkerboard-type
    modes of the central stencil) is factored out first.
    """
    pts = _check_anchors(anchors)
    S, H = scalar_gram(grid, pts, scheme)
    ext = extremal_pencil_eigs(S, H, seed=seed)
    c0, c1 = _constants(ext.lam_min, ext.lam_max)
    return EquivalenceReport("scalar", c0, c1, grid.h, np.array(pts), ext.v_min, ext.v_max,
                             residual=ext.residual, kernel_dim=ext.kernel_dim)


def refinement_study(domain: ConvexDomain, anchors, spacings, kind: str = "vector",
                     scheme: str = "centered", seed: int = 0) -> EquivalenceReport:
    """Constants on successively finer grids; the last report carries the history."""
    history, report = [], None
    for h in spacings:
        grid = Grid.build(domain, h)
        if kind == "vector":
            report = equivalence_constants_vector(grid, anchors, seed=seed)
        elif kind == "scalar":
            report = equivalence_constants_scalar(grid, anchors, scheme, seed=seed)
        else:
            raise ValueError(f"unknown kind {kind!r}")
        history.append((h, report.c0, report.c1))
    report.history = history
    return report


def relative_variation(history) -> list[float]:
    """``|C0(h_k+1) - C0(h_k)| / C0(h_k)`` between consecutive refinements."""
    c0 = [row[1] for row in history]
    return [abs(b - a) / a if a > 0 else float("inf") for a, b in zip(c0, c0[1:])]
