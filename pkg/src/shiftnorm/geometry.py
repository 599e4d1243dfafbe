"""Convex domains, ray geometry and the anchor-point determinant algebra.

A domain is either an intersection of half-spaces ``(nu, Q) <= c`` or a ball.
Anchor sets are ``n`` boundary points whose coordinate matrix has a
nonzero determinant; each anchor induces the unit direction field
``e(Q) = (Q - P) / |Q - P|``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.optimize import linprog

BOUNDARY_RTOL = 1e-9
DET_RTOL = 1e-8
MIN_RADIUS = 1e-12


class GeometryError(ValueError):
    pass


class DimensionMismatchError(GeometryError):
    pass


class DegenerateDomainError(GeometryError):
    pass


class RayMissError(GeometryError):
    """The ray from a boundary point does not enter the domain."""


class IllConditionedAnchorsError(GeometryError):
    pass


class AnchorSelectionError(GeometryError):
    pass


class UndefinedDirectionError(GeometryError):
    pass


class Membership(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConvexDomain:
    """Bounded convex body given by half-spaces or as a ball.

    Use the constructors :meth:`box`, :meth:`from_halfspaces`, :meth:`ball`
    or :meth:`from_dict` rather than instantiating directly.
    """

    kind: str
    dim: int
    interior_point: np.ndarray
    bbox_lo: np.ndarray
    bbox_hi: np.ndarray
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None
    degenerate: bool = field(default=False)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_halfspaces(cls, normals, offsets, strict: bool = True) -> ConvexDomain:
        """Intersection of ``(nu_k, Q) <= c_k``; normals are rescaled to unit length.

        With ``strict=False`` a flat (lower-dimensional) body is accepted; its
        stored interior point is then only a relative-interior point.
        """
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.asarray(offsets, dtype=float).ravel()
        if normals.shape[0] != offsets.shape[0]:
            raise DimensionMismatchError("one offset per half-space normal is required")
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(lengths == 0):
            raise GeometryError("zero half-space normal")
        normals = normals / lengths[:, None]
        offsets = offsets / lengths
        n = normals.shape[1]

        lo = np.empty(n)
        hi = np.empty(n)
        for k in range(n):
            for sign, out in ((1.0, lo), (-1.0, hi)):
                cost = np.zeros(n)
                cost[k] = sign
                res = linprog(cost, A_ub=normals, b_ub=offsets, bounds=[(None, None)] * n,
                              method="highs")
                if res.status == 3:
                    raise DegenerateDomainError("half-space intersection is unbounded")
                if res.status != 0:
                    raise DegenerateDomainError("half-space intersection is empty")
                out[k] = res.x[k]

        # Chebyshev center: maximise the inscribed radius.
        cost = np.zeros(n + 1)
        cost[-1] = -1.0
        a_ub = np.hstack([normals, np.ones((normals.shape[0], 1))])
        res = linprog(cost, A_ub=a_ub, b_ub=offsets,
                      bounds=[(None, None)] * n + [(0, None)], method="highs")
        center, inradius = res.x[:n], res.x[-1]
        diameter = float(np.linalg.norm(hi - lo))
        degenerate = inradius <= BOUNDARY_RTOL * max(diameter, 1.0) * 10
        if degenerate and strict:
            raise DegenerateDomainError("domain has empty interior")
        return cls(kind="halfspaces", dim=n, interior_point=_frozen(center),
                   bbox_lo=_frozen(lo), bbox_hi=_frozen(hi), normals=_frozen(normals),
                   offsets=_frozen(offsets), degenerate=bool(degenerate))

    @classmethod
    def box(cls, lo, hi) -> ConvexDomain:
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatchError("box corners differ in dimension")
        if np.any(hi <= lo):
            raise DegenerateDomainError("box must have hi > lo on every axis")
        n = lo.size
        eye = np.eye(n)
        normals = np.vstack([eye, -eye])
        offsets = np.concatenate([hi, -lo])
        return cls(kind="halfspaces", dim=n, interior_point=_frozen((lo + hi) / 2),
                   bbox_lo=_frozen(lo), bbox_hi=_frozen(hi), normals=_frozen(normals),
                   offsets=_frozen(offsets))

    @classmethod
    def ball(cls, center, radius: float) -> ConvexDomain:
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if not radius > 0:
            raise DegenerateDomainError("ball radius must be positive")
        return cls(kind="ball", dim=center.size, interior_point=_frozen(center),
                   bbox_lo=_frozen(center - radius), bbox_hi=_frozen(center + radius),
                   center=_frozen(center), radius=float(radius))

    @classmethod
    def from_dict(cls, spec: dict) -> ConvexDomain:
        kind = spec.get("kind")
        if kind == "box":
            return cls.box(spec["lo"], spec["hi"])
        if kind in ("halfspaces", "halfspace-list"):
            rows = spec["halfspaces"]
            normals = [row[0] for row in rows]
            offsets = [row[1] for row in rows]
            return cls.from_halfspaces(normals, offsets, strict=spec.get("strict", True))
        if kind == "ball":
            return cls.ball(spec["center"], spec["radius"])
        raise GeometryError(f"unknown domain kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "ball":
            return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}
        return {"kind": "halfspaces",
                "halfspaces": [[nu.tolist(), float(c)] for nu, c in zip(self.normals, self.offsets)]}

    # -- basic queries ----------------------------------------------------

    @property
    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.radius
        return float(np.linalg.norm(self.bbox_hi - self.bbox_lo))

    @property
    def tolerance(self) -> float:
        """Boundary membership tolerance."""
        return BOUNDARY_RTOL * self.diameter

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"point of dimension {X.shape[1]} for a domain of dimension {self.dim}")
        return X, single

    def slack(self, X) -> np.ndarray:
        """Smallest constraint slack; positive inside, negative outside."""
        X, single = self._points(X)
        if self.kind == "ball":
            s = self.radius - np.linalg.norm(X - self.center, axis=1)
        else:
            s = np.min(self.offsets[None, :] - X @ self.normals.T, axis=1)
        return s[0] if single else s

    def classify(self, X) -> np.ndarray:
        """Vectorised membership: +1 interior, 0 boundary, -1 exterior."""
        s = np.atleast_1d(self.slack(X))
        tol = self.tolerance
        return np.where(s > tol, 1, np.where(s < -tol, -1, 0))

    def exit_distance(self, X, E) -> np.ndarray:
        """``sup{t >= 0 : X + t E in closure}`` for rows of ``X`` and ``E``.

        Starting points are expected in the closed domain; 0 is returned when
        the ray leaves immediately.
        """
        X, single = self._points(X)
        E = np.atleast_2d(np.asarray(E, dtype=float))
        E = np.broadcast_to(E, X.shape)
        if self.kind == "ball":
            d = X - self.center
            b = np.einsum("ij,ij->i", E, d)
            c = np.einsum("ij,ij->i", d, d) - self.radius ** 2
            disc = b * b - c
            t = np.where(disc > 0, -b + np.sqrt(np.maximum(disc, 0.0)), 0.0)
        else:
            rate = E @ self.normals.T
            room = np.maximum(self.offsets[None, :] - X @ self.normals.T, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                tk = np.where(rate > 1e-14, room / np.where(rate > 1e-14, rate, 1.0), np.inf)
            t = tk.min(axis=1)
        t = np.maximum(t, 0.0)
        return t[0] if single else t

    def inward_direction(self, P) -> np.ndarray:
        """A unit vector u with (u, e) >= 0 for every direction e entering at P."""
        P = np.asarray(P, dtype=float)
        if self.kind == "ball":
            u = self.center - P
        else:
            s = self.offsets - self.normals @ P
            active = s <= 10 * self.tolerance
            if not np.any(active):
                u = self.interior_point - P
            else:
                u = -self.normals[active].sum(axis=0)
                if np.linalg.norm(u) < 1e-12:
                    u = self.interior_point - P
        return u / np.linalg.norm(u)

    def boundary_point(self, u) -> np.ndarray:
        """Boundary point hit by the ray from the stored interior point along ``u``."""
        u = np.asarray(u, dtype=float)
        u = u / np.linalg.norm(u)
        return self.interior_point + u * self.exit_distance(self.interior_point, u)


def contains(domain: ConvexDomain, Q) -> Membership:
    code = int(domain.classify(np.asarray(Q, dtype=float))[0])
    return {1: Membership.INTERIOR, 0: Membership.BOUNDARY, -1: Membership.EXTERIOR}[code]


def is_on_boundary(domain: ConvexDomain, P) -> bool:
    return contains(domain, P) is Membership.BOUNDARY


def ray_exit_distance(domain: ConvexDomain, P, e) -> float:
    """Length of the segment of the ray ``P + e t`` inside the domain.

    Raises :class:`RayMissError` if the ray does not enter the domain.
    """
    P = np.asarray(P, dtype=float)
    e = np.asarray(e, dtype=float)
    if P.shape != (domain.dim,) or e.shape != (domain.dim,):
        raise DimensionMismatchError("P and e must match the domain dimension")
    e = e / np.linalg.norm(e)
    if contains(domain, P) is Membership.EXTERIOR:
        raise RayMissError("start point lies outside the domain")
    d = float(domain.exit_distance(P, e))
    if not np.isfinite(d) or d <= domain.tolerance:
        raise RayMissError("ray does not enter the domain")
    return d


# -- anchors --------------------------------------------------------------


def det_tolerance(points) -> float:
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    scale = float(np.max(np.abs(points))) if points.size else 0.0
    return DET_RTOL * scale ** n


def anchor_determinant(points) -> float:
    """Determinant of the matrix whose rows are the anchor coordinates."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] != points.shape[1]:
        raise DimensionMismatchError("need n points of dimension n")
    return float(np.linalg.det(points))


@dataclass(frozen=True, eq=False)
class AnchorSet:
    points: np.ndarray
    delta: float

    @classmethod
    def from_points(cls, points, domain: ConvexDomain | None = None,
                    check_delta: bool = True) -> AnchorSet:
        """Validate and wrap anchor points.

        With ``check_delta=False`` a vanishing determinant only warns, which
        lets degeneracy studies build rank-deficient sets.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        delta = anchor_determinant(points)
        if domain is not None:
            if points.shape[1] != domain.dim:
                raise DimensionMismatchError("anchor dimension differs from domain")
            for p in points:
                if not is_on_boundary(domain, p):
                    raise GeometryError(f"anchor {p.tolist()} is not on the boundary")
        if abs(delta) <= det_tolerance(points):
            if check_delta:
                raise IllConditionedAnchorsError(f"|delta| = {abs(delta):.3e} below tolerance")
            warnings.warn("anchor determinant below tolerance", stacklevel=2)
        return cls(points=_frozen(points), delta=delta)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def tolerance(self) -> float:
        return det_tolerance(self.points)

    @property
    def well_conditioned(self) -> bool:
        return abs(self.delta) > self.tolerance

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "delta": self.delta}

    @classmethod
    def from_dict(cls, spec: dict, domain: ConvexDomain | None = None,
                  check_delta: bool = True) -> AnchorSet:
        anchors = cls.from_points(spec["points"], domain, check_delta=check_delta)
        stored = spec.get("delta")
        if stored is not None and not np.isclose(stored, anchors.delta, rtol=1e-9, atol=1e-300):
            raise GeometryError("stored delta does not match the anchor points")
        return anchors


def partial_determinants(anchors: AnchorSet, Q) -> np.ndarray:
    """Determinants with the j-th anchor row replaced by ``Q``."""
    Q = np.asarray(Q, dtype=float)
    P = anchors.points
    out = np.empty(anchors.n)
    for j in range(anchors.n):
        M = P.copy()
        M[j] = Q
        out[j] = np.linalg.det(M)
    return out


def lambda_determinant(anchors: AnchorSet, Q) -> float:
    """Determinant of the matrix with rows ``P_i - Q``."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (anchors.n,):
        raise DimensionMismatchError("query point dimension differs from anchors")
    return float(np.linalg.det(anchors.points - Q[None, :]))


def barycentric_coefficients(anchors: AnchorSet, Q) -> np.ndarray:
    """``alpha_j = Delta_j(Q) / Delta``.

    The coefficients sum to ``1 - Lambda(Q)/Delta``; when ``Lambda(Q) = 0``
    they are the affine coordinates of ``Q`` in the anchor frame.
    """
    if not anchors.well_conditioned:
        raise IllConditionedAnchorsError("anchor determinant is below tolerance")
    return partial_determinants(anchors, Q) / anchors.delta


def select_anchors(domain: ConvexDomain, candidate_count: int = 64,
                   rng_seed: int = 0) -> AnchorSet:
    """Choose ``n`` boundary points with large ``|Delta|``.

    Candidates are boundary points hit by rays from the interior point in
    seeded random directions; the subset is picked greedily, each step
    taking the candidate with the largest component orthogonal to the rows
    already chosen.
    """
    n = domain.dim
    if candidate_count < n:
        raise ValueError("candidate_count must be at least the dimension")
    rng = np.random.default_rng(rng_seed)
    dirs = rng.standard_normal((candidate_count, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    X = np.broadcast_to(domain.interior_point, dirs.shape)
    cands = X + dirs * domain.exit_distance(X, dirs)[:, None]

    chosen = []
    resid = cands.copy()
    for _ in range(n):
        norms = np.linalg.norm(resid, axis=1)
        norms[chosen] = -1.0
        k = int(np.argmax(norms))
        if norms[k] <= 0:
            break
        chosen.append(k)
        q = resid[k] / norms[k]
        resid = resid - np.outer(resid @ q, q)
    points = cands[chosen] if len(chosen) == n else None
    if points is None or abs(anchor_determinant(points)) <= det_tolerance(points):
        raise AnchorSelectionError("every candidate subset is degenerate")
    return AnchorSet.from_points(points, domain)


# -- ray frames -----------------------------------------------------------


@dataclass(frozen=True)
class RayFrame:
    anchor: np.ndarray
    e: np.ndarray
    r: float
    d: float


def ray_frame(domain: ConvexDomain, P, Q) -> RayFrame:
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    e, r = directions(P, Q[None, :])
    e = e[0]
    return RayFrame(anchor=P, e=e, r=float(r[0]), d=float(domain.exit_distance(P, e)))


def directions(P, X) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions ``(X - P)/|X - P|`` and distances for rows of ``X``."""
    D = np.atleast_2d(X) - np.asarray(P, dtype=float)[None, :]
    r = np.linalg.norm(D, axis=1)
    if np.any(r < MIN_RADIUS):
        raise UndefinedDirectionError("direction undefined at the anchor point")
    return D / r[:, None], r
