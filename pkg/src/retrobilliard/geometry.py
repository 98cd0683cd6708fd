"""Planar primitives: unit vectors, rays, boundary pieces and ray hits.

Boundary pieces are immutable dataclasses.  Every piece knows its endpoints,
its (approximate) length, an implicit-equation residual for testing, and the
side of its inward normal.  The heavy lifting (nearest hit along a ray) is
done by the compiled kernels in :mod:`retrobilliard._kernels`; this module
packs pieces into the flat arrays those kernels consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .errors import DomainError

Point = tuple


class UnitVec(NamedTuple):
    x: float
    y: float

    @classmethod
    def of(cls, x: float, y: float) -> "UnitVec":
        r = math.hypot(x, y)
        if r == 0.0 or not math.isfinite(r):
            raise DomainError(f"cannot normalize ({x}, {y})")
        return cls(x / r, y / r)

    @classmethod
    def from_angle(cls, theta: float) -> "UnitVec":
        return cls(math.cos(theta), math.sin(theta))

    def rotate(self, theta: float) -> "UnitVec":
        c, s = math.cos(theta), math.sin(theta)
        return UnitVec(c * self.x - s * self.y, s * self.x + c * self.y)

    def __neg__(self) -> "UnitVec":
        return UnitVec(-self.x, -self.y)

    def dot(self, other) -> float:
        return self.x * other[0] + self.y * other[1]

    def cross(self, other) -> float:
        return self.x * other[1] - self.y * other[0]


def angle_between(a, b) -> float:
    """Counterclockwise angle from vector a to vector b, in (-pi, pi]."""
    return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])


@dataclass(frozen=True)
class Ray:
    origin: Point
    dir: UnitVec

    def __post_init__(self):
        if abs(math.hypot(*self.dir) - 1.0) > 1e-12:
            raise DomainError("ray direction must be a unit vector")

    def at(self, t: float) -> Point:
        return (self.origin[0] + t * self.dir.x, self.origin[1] + t * self.dir.y)


def reflect(v, n) -> UnitVec:
    """Specular reflection of v in a mirror with unit normal n."""
    d = v[0] * n[0] + v[1] * n[1]
    return UnitVec(v[0] - 2.0 * d * n[0], v[1] - 2.0 * d * n[1])


# ---------------------------------------------------------------------------
# boundary pieces


@dataclass(frozen=True)
class Segment:
    """Straight wall from p0 to p1.

    ``inward=+1`` puts the inward normal on the left of p0 -> p1.
    """

    p0: Point
    p1: Point
    inward: int = 1

    def __post_init__(self):
        if self.p0 == self.p1:
            raise DomainError("degenerate segment")

    @property
    def length(self) -> float:
        return math.dist(self.p0, self.p1)

    def endpoints(self):
        return self.p0, self.p1

    def point_at(self, s: float) -> Point:
        return (self.p0[0] + s * (self.p1[0] - self.p0[0]), self.p0[1] + s * (self.p1[1] - self.p0[1]))

    def normal_at(self, pt=None) -> UnitVec:
        ex, ey = self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]
        return UnitVec.of(-ey * self.inward, ex * self.inward)

    def residual(self, pt) -> float:
        ex, ey = self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]
        return abs(ex * (pt[1] - self.p0[1]) - ey * (pt[0] - self.p0[0])) / self.length

    def sample(self, n: int) -> np.ndarray:
        s = np.linspace(0.0, 1.0, n)
        return np.column_stack([self.p0[0] + s * (self.p1[0] - self.p0[0]), self.p0[1] + s * (self.p1[1] - self.p0[1])])

    def scaled(self, k: float) -> "Segment":
        return Segment(_scale(self.p0, k), _scale(self.p1, k), self.inward)


@dataclass(frozen=True)
class HalfLine:
    """Unbounded straight wall origin + s*direction, s >= 0."""

    origin: Point
    direction: UnitVec
    inward: int = 1

    length = math.inf

    def endpoints(self):
        return self.origin, (math.inf, math.inf)

    def point_at(self, s: float) -> Point:
        return (self.origin[0] + s * self.direction.x, self.origin[1] + s * self.direction.y)

    def normal_at(self, pt=None) -> UnitVec:
        return UnitVec(-self.direction.y * self.inward, self.direction.x * self.inward)

    def residual(self, pt) -> float:
        return abs(self.direction.cross((pt[0] - self.origin[0], pt[1] - self.origin[1])))

    def sample(self, n: int, reach: float = 10.0) -> np.ndarray:
        s = np.linspace(0.0, reach, n)
        return np.column_stack([self.origin[0] + s * self.direction.x, self.origin[1] + s * self.direction.y])

    def scaled(self, k: float) -> "HalfLine":
        return HalfLine(_scale(self.origin, k), self.direction, self.inward)


@dataclass(frozen=True)
class EllipseArc:
    """Axis-aligned elliptic arc (cx + a cos t, cy + b sin t), t0 <= t <= t1.

    ``inward=+1`` means the inward normal points toward the center.
    """

    center: Point
    a: float
    b: float
    t0: float
    t1: float
    inward: int = 1

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("semi-axes must be positive")
        if not (self.t1 > self.t0) or self.t1 - self.t0 > 2 * math.pi:
            raise DomainError("arc range must be non-degenerate")

    def point_at(self, t: float) -> Point:
        return (self.center[0] + self.a * math.cos(t), self.center[1] + self.b * math.sin(t))

    def endpoints(self):
        return self.point_at(self.t0), self.point_at(self.t1)

    @property
    def length(self) -> float:
        return float(_polyline_length(self.sample(2049)))

    def normal_at(self, pt) -> UnitVec:
        gx = (pt[0] - self.center[0]) / self.a**2
        gy = (pt[1] - self.center[1]) / self.b**2
        return UnitVec.of(-gx * self.inward, -gy * self.inward)

    def residual(self, pt) -> float:
        X = (pt[0] - self.center[0]) / self.a
        Y = (pt[1] - self.center[1]) / self.b
        return abs(X * X + Y * Y - 1.0) * min(self.a, self.b) / 2.0

    def sample(self, n: int) -> np.ndarray:
        t = np.linspace(self.t0, self.t1, n)
        return np.column_stack([self.center[0] + self.a * np.cos(t), self.center[1] + self.b * np.sin(t)])

    def scaled(self, k: float) -> "EllipseArc":
        return EllipseArc(_scale(self.center, k), self.a * k, self.b * k, self.t0, self.t1, self.inward)


@dataclass(frozen=True)
class ParabolaArc:
    """Parabolic arc w^2 = 4 p u in the local frame of the vertex.

    u runs along ``axis`` (toward the focus), w along the axis rotated by
    +90 degrees; the arc is s0 <= w <= s1 (either bound may be infinite).
    ``inward=+1`` puts the inward normal on the focus side.
    """

    vertex: Point
    axis: UnitVec
    p: float
    s0: float
    s1: float
    inward: int = 1

    def __post_init__(self):
        if not self.p > 0:
            raise DomainError("focal parameter must be positive")
        if not self.s1 > self.s0:
            raise DomainError("parameter range must be non-degenerate")

    def _perp(self):
        return (-self.axis.y, self.axis.x)

    def point_at(self, w: float) -> Point:
        u = w * w / (4.0 * self.p)
        px, py = self._perp()
        return (self.vertex[0] + u * self.axis.x + w * px, self.vertex[1] + u * self.axis.y + w * py)

    def endpoints(self):
        out = []
        for w in (self.s0, self.s1):
            out.append(self.point_at(w) if math.isfinite(w) else (math.inf, math.inf))
        return tuple(out)

    @property
    def length(self) -> float:
        if not (math.isfinite(self.s0) and math.isfinite(self.s1)):
            return math.inf
        return float(_polyline_length(self.sample(2049)))

    def focus(self) -> Point:
        return (self.vertex[0] + self.p * self.axis.x, self.vertex[1] + self.p * self.axis.y)

    def directrix(self):
        """Point on the directrix and the directrix direction."""
        return (self.vertex[0] - self.p * self.axis.x, self.vertex[1] - self.p * self.axis.y), self._perp()

    def local(self, pt):
        rx, ry = pt[0] - self.vertex[0], pt[1] - self.vertex[1]
        px, py = self._perp()
        return rx * self.axis.x + ry * self.axis.y, rx * px + ry * py

    def normal_at(self, pt) -> UnitVec:
        _, w = self.local(pt)
        px, py = self._perp()
        gx = -4.0 * self.p * self.axis.x + 2.0 * w * px
        gy = -4.0 * self.p * self.axis.y + 2.0 * w * py
        return UnitVec.of(-gx * self.inward, -gy * self.inward)

    def residual(self, pt) -> float:
        u, w = self.local(pt)
        return abs(w * w - 4.0 * self.p * u) / (4.0 * self.p)

    def sample(self, n: int, reach: float = 10.0) -> np.ndarray:
        lo = self.s0 if math.isfinite(self.s0) else -reach
        hi = self.s1 if math.isfinite(self.s1) else reach
        return np.array([self.point_at(w) for w in np.linspace(lo, hi, n)])

    def scaled(self, k: float) -> "ParabolaArc":
        return ParabolaArc(_scale(self.vertex, k), self.axis, self.p * k, self.s0 * k, self.s1 * k, self.inward)


BoundaryPiece = Union[Segment, HalfLine, EllipseArc, ParabolaArc]


def parabola_focus(piece: ParabolaArc) -> Point:
    return piece.focus()


def ellipse_foci(piece: EllipseArc):
    """Both foci of the ellipse carrying the arc (on the major axis)."""
    cx, cy = piece.center
    a, b = piece.a, piece.b
    if a >= b:
        c = math.sqrt(a * a - b * b)
        return (cx - c, cy), (cx + c, cy)
    c = math.sqrt(b * b - a * a)
    return (cx, cy - c), (cx, cy + c)


def _scale(p, k):
    return (p[0] * k, p[1] * k)


def _polyline_length(pts: np.ndarray) -> float:
    return float(np.sum(np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))))


# ---------------------------------------------------------------------------
# packing for the kernels


def _piece_bbox(piece, pad: float):
    if isinstance(piece, Segment):
        pts = np.array([piece.p0, piece.p1])
    else:
        pts = piece.sample(513)
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    return lo, hi


def pack_scene(pieces: Sequence[BoundaryPiece], opening: Optional[Segment] = None,
               opening_normal=None, watch=(), scale: Optional[float] = None,
               grid_threshold: int = 24):
    """Flatten pieces (and an optional opening) into the kernel scene tuple."""
    P = len(pieces)
    kind = np.zeros(P, dtype=np.int64)
    prm = np.zeros((P, 8))
    ends = np.full((P, 4), np.inf)
    plen = np.zeros(P)
    reuse = np.zeros(P, dtype=np.int64)
    watch_arr = np.zeros(P, dtype=np.int64)
    for i in watch:
        watch_arr[i] = 1

    finite_pts = []
    for i, pc in enumerate(pieces):
        e0, e1 = pc.endpoints()
        ends[i] = (*e0, *e1)
        if isinstance(pc, Segment):
            kind[i] = K.SEGMENT
            prm[i, :4] = (*pc.p0, *pc.p1)
            finite_pts.append(pc.sample(2))
        elif isinstance(pc, EllipseArc):
            kind[i] = K.ELLIPSE
            prm[i, :6] = (*pc.center, pc.a, pc.b, pc.t0, pc.t1)
            reuse[i] = 1
            finite_pts.append(pc.sample(65))
        elif isinstance(pc, ParabolaArc):
            kind[i] = K.PARABOLA
            prm[i, :7] = (*pc.vertex, pc.axis.x, pc.axis.y, pc.p, pc.s0, pc.s1)
            reuse[i] = 1
            finite_pts.append(pc.sample(65, reach=4 * pc.p))
        elif isinstance(pc, HalfLine):
            kind[i] = K.HALFLINE
            prm[i, :4] = (*pc.origin, pc.direction.x, pc.direction.y)
            finite_pts.append(np.array([pc.origin]))
        else:
            raise TypeError(f"unknown boundary piece {pc!r}")
        plen[i] = pc.length

    pts = np.vstack(finite_pts) if finite_pts else np.zeros((1, 2))
    if opening is not None:
        pts = np.vstack([pts, np.array([opening.p0, opening.p1])])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if scale is None:
        scale = float(np.hypot(*(hi - lo))) or 1.0
    plen[~np.isfinite(plen)] = scale

    if opening is not None:
        n = opening_normal if opening_normal is not None else -opening.normal_at()
        open_arr = np.array([*opening.p0, *opening.p1, n[0], n[1]], dtype=float)
        has_open = 1
    else:
        open_arr = np.zeros(6)
        has_open = 0

    use_grid = int(P > grid_threshold and all(np.isfinite(plen)) and opening is not None
                   and not any(isinstance(pc, HalfLine) for pc in pieces))
    if use_grid:
        gmeta, gdims, cstart, citems = _build_grid(pieces, lo, hi, scale)
    else:
        gmeta = np.array([0.0, 0.0, 1.0, 1.0])
        gdims = np.array([1, 1], dtype=np.int64)
        cstart = np.array([0, P], dtype=np.int64)
        citems = np.arange(P, dtype=np.int64)

    return (kind, prm, ends, plen, reuse, watch_arr, open_arr, np.int64(has_open),
            gmeta, gdims, cstart, citems, np.int64(use_grid), float(scale))


def _build_grid(pieces, lo, hi, scale, max_dim=1024):
    pad = 1e-6 * scale
    lo = lo - 4 * pad
    hi = hi + 4 * pad
    w, h = hi - lo
    P = len(pieces)
    # about two cells per piece, shaped like the bounding box
    cell = math.sqrt(w * h / (2.0 * P))
    nx = int(min(max(1, round(w / cell)), max_dim))
    ny = int(min(max(1, round(h / cell)), max_dim))
    cw, ch = w / nx, h / ny
    buckets = [[] for _ in range(nx * ny)]
    for i, pc in enumerate(pieces):
        blo, bhi = _piece_bbox(pc, pad)
        i0 = max(0, int((blo[0] - lo[0]) // cw))
        i1 = min(nx - 1, int((bhi[0] - lo[0]) // cw))
        j0 = max(0, int((blo[1] - lo[1]) // ch))
        j1 = min(ny - 1, int((bhi[1] - lo[1]) // ch))
        for jj in range(j0, j1 + 1):
            for ii in range(i0, i1 + 1):
                buckets[jj * nx + ii].append(i)
    counts = np.array([len(b) for b in buckets], dtype=np.int64)
    cstart = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    citems = np.array([i for b in buckets for i in b], dtype=np.int64)
    return (np.array([lo[0], lo[1], cw, ch]), np.array([nx, ny], dtype=np.int64), cstart, citems)


# ---------------------------------------------------------------------------
# single-ray queries


class Hit(NamedTuple):
    t: float
    point: Point
    normal: UnitVec
    piece: int
    param: float
    near_tangent: bool
    singular: bool


DEFAULT_CORNER_TOL = 1e-9
DEFAULT_TANGENT_TOL = 1e-9


def first_hit(ray: Ray, pieces, t_min: float = 0.0, skip: int = -1,
              corner_tol: float = DEFAULT_CORNER_TOL,
              tangent_tol: float = DEFAULT_TANGENT_TOL, scene=None) -> Optional[Hit]:
    """Nearest intersection of ``ray`` with ``pieces`` beyond ``t_min``.

    The returned normal points back toward the ray origin, i.e. into the
    billiard region the ray travels in.  ``param`` is the boundary parameter
    of the hit (segment fraction, ellipse angle, parabola w, half-line s).
    """
    if t_min < 0:
        raise DomainError("t_min must be non-negative")
    if scene is None:
        scene = pack_scene(pieces)
    t, i, hx, hy, nx, ny, flag = K.first_hit(
        scene, float(ray.origin[0]), float(ray.origin[1]), ray.dir.x, ray.dir.y,
        float(t_min), int(skip), corner_tol, tangent_tol,
    )
    if i < 0:
        return None
    pc = pieces[i]
    return Hit(t, (hx, hy), UnitVec(nx, ny), i, _boundary_param(pc, (hx, hy)),
               flag == K.TANGENT_HIT, flag == K.SINGULAR_HIT)


def _boundary_param(pc, pt) -> float:
    if isinstance(pc, Segment):
        ex, ey = pc.p1[0] - pc.p0[0], pc.p1[1] - pc.p0[1]
        return ((pt[0] - pc.p0[0]) * ex + (pt[1] - pc.p0[1]) * ey) / (ex * ex + ey * ey)
    if isinstance(pc, EllipseArc):
        return math.atan2((pt[1] - pc.center[1]) / pc.b, (pt[0] - pc.center[0]) / pc.a)
    if isinstance(pc, ParabolaArc):
        return pc.local(pt)[1]
    return pc.direction.dot((pt[0] - pc.origin[0], pt[1] - pc.origin[1]))
