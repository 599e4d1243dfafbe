"""Grid-sampled complex fields on a convex domain.

Fields live on the interior nodes of a uniform Cartesian grid covering the
domain's bounding box; every other node and every point outside the closed
domain carries the value 0 (zero extension).
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import ConvexDomain, GeometryError

MIN_INTERIOR_PER_AXIS = 3
# Nodes closer than this (in units of h) to the boundary along an axis are
# left out of the mask so the one-sided stencils stay well conditioned.
MIN_BOUNDARY_FRACTION = 0.05


class DegenerateGridError(GeometryError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid with spacing ``h`` and an interior-node mask."""

    domain: ConvexDomain
    h: float
    lo: np.ndarray
    shape: tuple
    mask: np.ndarray
    index: np.ndarray
    nodes: np.ndarray

    @classmethod
    def build(cls, domain: ConvexDomain, h: float) -> Grid:
        if not h > 0:
            raise DegenerateGridError("grid spacing must be positive")
        lo = np.array(domain.bbox_lo, dtype=float)
        counts = np.ceil((domain.bbox_hi - lo) / h - 1e-9).astype(int) + 1
        axes = [lo[k] + h * np.arange(counts[k]) for k in range(domain.dim)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
        mask = domain.classify(pts) == 1
        cand = np.nonzero(mask)[0]
        for k in range(domain.dim):
            for sgn in (-1.0, 1.0):
                axis = np.zeros(domain.dim)
                axis[k] = sgn
                t = domain.exit_distance(pts[cand], axis)
                mask[cand[t < MIN_BOUNDARY_FRACTION * h]] = False
        index = np.full(mask.size, -1, dtype=np.int64)
        index[mask] = np.arange(int(mask.sum()))
        shape = tuple(int(c) for c in counts)
        mask = mask.reshape(shape)
        if mask.sum() == 0:
            raise DegenerateGridError("grid has no interior nodes")
        ijk = np.argwhere(mask)
        for k in range(domain.dim):
            if np.unique(ijk[:, k]).size < MIN_INTERIOR_PER_AXIS:
                raise DegenerateGridError(
                    f"fewer than {MIN_INTERIOR_PER_AXIS} interior nodes along axis {k}")
        for a in (mask, index):
            a.setflags(write=False)
        nodes = pts[mask.ravel()]
        nodes.setflags(write=False)
        return cls(domain=domain, h=float(h), lo=lo, shape=shape, mask=mask,
                   index=index.reshape(shape), nodes=nodes)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def size(self) -> int:
        """Number of interior nodes (the discrete unknowns)."""
        return self.nodes.shape[0]

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def same_as(self, other: Grid) -> bool:
        return self is other or (self.h == other.h and self.shape == other.shape
                                 and np.array_equal(self.lo, other.lo)
                                 and np.array_equal(self.mask, other.mask))

    def coordinates(self, ijk) -> np.ndarray:
        return self.lo + self.h * np.asarray(ijk, dtype=float)

    def interpolation_matrix(self, X) -> sp.csr_matrix:
        """Multilinear interpolation from interior values to the points ``X``.

        Rows of points outside the closed domain are empty, and corners that
        are not interior nodes contribute nothing.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m, n = X.shape
        shape = np.array(self.shape)
        g = (X - self.lo) / self.h
        cell = np.clip(np.floor(g).astype(np.int64), 0, shape - 2)
        local = np.clip(g - cell, 0.0, 1.0)
        inside = self.domain.classify(X) >= 0
        flat_index = self.index.ravel()
        rows, cols, vals = [], [], []
        for corner in itertools.product((0, 1), repeat=n):
            corner = np.array(corner)
            w = np.prod(np.where(corner == 1, local, 1.0 - local), axis=1)
            c = cell + corner
            j = flat_index[np.ravel_multi_index(tuple(c.T), self.shape)]
            keep = inside & (j >= 0) & (w > 0)
            rows.append(np.nonzero(keep)[0])
            cols.append(j[keep])
            vals.append(w[keep])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m, self.size))

    def sample(self, fn: Callable[[np.ndarray], np.ndarray]) -> ScalarField:
        return ScalarField(self, np.asarray(fn(self.nodes), dtype=complex).reshape(self.size))


class ScalarField:
    """Complex values on the interior nodes of a grid."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.size,):
            raise GridMismatchError(f"expected {grid.size} values, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def full(self) -> np.ndarray:
        """Values on the whole grid, zero off the interior mask."""
        out = np.zeros(self.grid.shape, dtype=complex)
        out[self.grid.mask] = self.values
        return out

    def __call__(self, X) -> np.ndarray:
        return self.grid.interpolation_matrix(X) @ self.values

    def _check(self, other: ScalarField):
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: ScalarField) -> ScalarField:
        self._check(other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: ScalarField) -> ScalarField:
        self._check(other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c) -> ScalarField:
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> ScalarField:
        return ScalarField(self.grid, -self.values)

    def __repr__(self):
        return f"ScalarField(nodes={self.grid.size}, h={self.grid.h})"


class VectorField:
    """``n`` scalar components sharing one grid; ``values`` has shape ``(n, N)``."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.dim, grid.size):
            raise GridMismatchError(f"expected shape {(grid.dim, grid.size)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_components(cls, comps) -> VectorField:
        comps = list(comps)
        grid = comps[0].grid
        for c in comps[1:]:
            if not grid.same_as(c.grid):
                raise GridMismatchError("components live on different grids")
        return cls(grid, np.stack([c.values for c in comps]))

    def component(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.values[k])

    def flat(self) -> np.ndarray:
        """Node-major flattening ``[f_1(Q_0), ..., f_n(Q_0), f_1(Q_1), ...]``."""
        return self.values.T.reshape(-1)

    def __add__(self, other: VectorField) -> VectorField:
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("fields live on different grids")
        return VectorField(self.grid, self.values + other.values)

    def __mul__(self, c) -> VectorField:
        return VectorField(self.grid, self.values * c)

    __rmul__ = __mul__


def sample(domain: ConvexDomain, h: float, fn: Callable[[np.ndarray], np.ndarray]) -> ScalarField:
    """Sample ``fn`` (vectorised over rows of points) at the interior nodes."""
    return Grid.build(domain, h).sample(fn)


def l2_norm(field: ScalarField) -> float:
    return float(np.sqrt(field.grid.cell_volume * np.sum(np.abs(field.values) ** 2)))


def inner_l2n(f: VectorField, g: VectorField) -> complex:
    """Discrete vector-valued L2 inner product, conjugate-linear in ``g``."""
    if not f.grid.same_as(g.grid):
        raise GridMismatchError("fields live on different grids")
    return complex(f.grid.cell_volume * np.sum(f.values * np.conj(g.values)))


# -- polar quadrature ---------------------------------------------------------


def _direction_set(u: np.ndarray, angular_nodes: int):
    """Directions of the half-sphere around ``u`` and their solid-angle weights."""
    n = u.size
    if n == 1:
        return u[None, :], np.ones(1)
    # orthonormal complement of u
    basis = np.linalg.qr(np.column_stack([u, np.eye(n)]))[0]
    if basis[:, 0] @ u < 0:
        basis = -basis
    perp = basis[:, 1:n]
    if n == 2:
        th = -np.pi / 2 + (np.arange(angular_nodes) + 0.5) * np.pi / angular_nodes
        dirs = np.cos(th)[:, None] * u + np.sin(th)[:, None] * perp[:, 0]
        return dirs, np.full(angular_nodes, np.pi / angular_nodes)
    if n == 3:
        m_phi, m_psi = angular_nodes, 2 * angular_nodes
        phi = (np.arange(m_phi) + 0.5) * (np.pi / 2) / m_phi
        psi = (np.arange(m_psi) + 0.5) * 2 * np.pi / m_psi
        PH, PS = np.meshgrid(phi, psi, indexing="ij")
        PH, PS = PH.ravel(), PS.ravel()
        dirs = (np.cos(PH)[:, None] * u
                + (np.sin(PH) * np.cos(PS))[:, None] * perp[:, 0]
                + (np.sin(PH) * np.sin(PS))[:, None] * perp[:, 1])
        w = np.sin(PH) * (np.pi / 2 / m_phi) * (2 * np.pi / m_psi)
        return dirs, w
    raise NotImplementedError("polar quadrature is implemented for n <= 3")


def lp_norm_polar(field: ScalarField, anchor, p: float = 2.0, angular_nodes: int = 128,
                  radial_nodes: int = 128) -> float:
    """``(int_omega dchi int_0^d(e) |f|^p r^(n-1) dr)^(1/p)`` around a boundary point.

    Midpoint panels in angle over the half-sphere of entering directions,
    composite trapezoid in radius, multilinear interpolation for values.
    """
    grid = field.grid
    domain = grid.domain
    P = np.asarray(anchor, dtype=float)
    if domain.classify(P)[0] != 0:
        raise GeometryError("anchor is not on the boundary")
    if p < 1:
        raise ValueError("p must be >= 1")
    if angular_nodes < 8 or radial_nodes < 8:
        raise ValueError("quadrature node counts must be >= 8")
    dirs, wdir = _direction_set(domain.inward_direction(P), angular_nodes)
    d = domain.exit_distance(np.broadcast_to(P, dirs.shape), dirs)
    s = np.linspace(0.0, 1.0, radial_nodes)
    wr = np.full(radial_nodes, 1.0 / (radial_nodes - 1))
    wr[[0, -1]] *= 0.5
    R = d[:, None] * s[None, :]
    X = P + (dirs[:, None, :] * R[..., None]).reshape(-1, grid.dim)
    vals = np.abs(field(X)).reshape(R.shape) ** p
    radial = np.sum(vals * R ** (grid.dim - 1) * wr[None, :], axis=1) * d
    return float(np.sum(wdir * radial) ** (1.0 / p))


# -- gradient -------------------------------------------------------------


def _derivative_weights(a: float, b: float):
    """Weights at offsets (-a, 0, b) for the first derivative at 0."""
    return -b / (a * (a + b)), (b - a) / (a * b), a / (b * (a + b))


def gradient_matrices(grid: Grid) -> list[sp.csr_matrix]:
    """Sparse partial-derivative operators on interior values.

    Central differences where both axis neighbours are interior nodes;
    otherwise a three-point formula on the non-uniform stencil that puts the
    zero boundary value at the exact axis crossing (distance ``theta h``) in
    place of each missing neighbour.
    """
    h = grid.h
    ijk = np.argwhere(grid.mask)
    shape = np.array(grid.shape)
    N = grid.size
    out = []
    for k in range(grid.dim):
        rows, cols, vals = [], [], []
        nb = {}
        for sgn in (-1, 1):
            c = ijk.copy()
            c[:, k] += sgn
            valid = (c[:, k] >= 0) & (c[:, k] < shape[k])
            j = np.full(N, -1, dtype=np.int64)
            j[valid] = grid.index[tuple(c[valid].T)]
            nb[sgn] = j
        central = (nb[-1] >= 0) & (nb[1] >= 0)
        idx = np.nonzero(central)[0]
        for sgn in (-1, 1):
            rows.append(idx)
            cols.append(nb[sgn][idx])
            vals.append(np.full(idx.size, sgn / (2 * h)))
        edge = np.nonzero(~central)[0]
        if edge.size:
            X = grid.nodes[edge]
            axis = np.zeros(grid.dim)
            axis[k] = 1.0
            off = {}
            for sgn in (-1, 1):
                t = grid.domain.exit_distance(X, sgn * axis) / h
                off[sgn] = np.where(nb[sgn][edge] >= 0, 1.0,
                                    np.maximum(t, MIN_BOUNDARY_FRACTION))
            wm, w0, wp = _derivative_weights(off[-1], off[1])
            rows.append(edge)
            cols.append(edge)
            vals.append(w0 / h)
            for sgn, w in ((-1, wm), (1, wp)):
                has = nb[sgn][edge] >= 0
                rows.append(edge[has])
                cols.append(nb[sgn][edge][has])
                vals.append(w[has] / h)
        D = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N))
        out.append(D)
    return out


def gradient(field: ScalarField) -> VectorField:
    return VectorField(field.grid,
                       np.stack([D @ field.values for D in gradient_matrices(field.grid)]))


def h10_norm(field: ScalarField) -> float:
    g = gradient(field)
    return float(np.sqrt(sum(l2_norm(g.component(k)) ** 2 for k in range(field.grid.dim))))


# -- test fields ----------------------------------------------------------


def _smooth_step(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def boundary_bump(domain: ConvexDomain, width: float | None = None) -> Callable:
    """Smooth factor that vanishes to all orders on the boundary.

    Equals 1 where every constraint slack exceeds ``width``.
    """
    if width is None:
        width = 0.5 * float(domain.slack(domain.interior_point))

    def bump(X):
        X = np.atleast_2d(X)
        if domain.kind == "ball":
            s = (domain.radius ** 2 - np.sum((X - domain.center) ** 2, axis=1)) / (2 * domain.radius)
            return _smooth_step(s / width)
        s = domain.offsets[None, :] - X @ domain.normals.T
        return np.prod(_smooth_step(s / width), axis=1)

    return bump


def sine_bump(domain: ConvexDomain) -> Callable:
    """Tensor sine over the bounding box times the boundary bump."""
    lo, hi = domain.bbox_lo, domain.bbox_hi
    bump = boundary_bump(domain)

    def f(X):
        X = np.atleast_2d(X)
        return np.prod(np.sin(np.pi * (X - lo) / (hi - lo)), axis=1) * bump(X)

    return f


def radial_bump(domain: ConvexDomain) -> Callable:
    """Compactly supported radial bump centred at the interior point."""
    c = domain.interior_point
    rho = float(domain.slack(c))

    def f(X):
        X = np.atleast_2d(X)
        q = np.sum((X - c) ** 2, axis=1) / rho ** 2
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(q < 1, np.exp(1.0 - 1.0 / np.where(q < 1, 1.0 - q, 1.0)), 0.0)

    return f


def random_smooth(domain: ConvexDomain, seed: int, modes: int = 3, complex_values: bool = True) -> Callable:
    """Seeded random low-frequency sine series times the boundary bump."""
    rng = np.random.default_rng(seed)
    n = domain.dim
    ks = np.array(list(itertools.product(range(1, modes + 1), repeat=n)))
    coef = rng.standard_normal(len(ks))
    if complex_values:
        coef = coef + 1j * rng.standard_normal(len(ks))
    coef /= np.sqrt(np.sum(ks ** 2, axis=1))
    lo, hi = domain.bbox_lo, domain.bbox_hi
    bump = boundary_bump(domain)

    def f(X):
        X = np.atleast_2d(X)
        u = (X - lo) / (hi - lo)
        basis = np.prod(np.sin(np.pi * ks[None, :, :] * u[:, None, :]), axis=2)
        return (basis @ coef) * bump(X)

    return f


def field_corpus(domain: ConvexDomain, seed: int, count: int = 3) -> list[Callable]:
    """Sine bump, radial bump and ``count`` seeded random smooth fields."""
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(count)]
    return [sine_bump(domain), radial_bump(domain)] + [random_smooth(domain, s) for s in seeds]


# -- CSV ------------------------------------------------------------------

FMT = "%.12g"


def write_field_csv(path, field: ScalarField) -> None:
    path = Path(path)
    n = field.grid.dim
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + [f"x{k}" for k in range(n)] + ["re", "im"])
        for i, (q, v) in enumerate(zip(field.grid.nodes, field.values)):
            w.writerow([i] + [FMT % c for c in q] + [FMT % v.real, FMT % v.imag])


def read_field_csv(path, grid: Grid) -> ScalarField:
    values = np.zeros(grid.size, dtype=complex)
    seen = np.zeros(grid.size, dtype=bool)
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[0] != "node" or header[-2:] != ["re", "im"]:
            raise ValueError("not a field CSV")
        for row in r:
            i = int(row[0])
            q = np.array([float(x) for x in row[1:-2]])
            if not np.allclose(q, grid.nodes[i], atol=1e-9 * grid.h):
                raise GridMismatchError(f"node {i} coordinates do not match the grid")
            values[i] = float(row[-2]) + 1j * float(row[-1])
            seen[i] = True
    if not seen.all():
        raise GridMismatchError("CSV does not cover every interior node")
    return ScalarField(grid, values)
