"""Tracing particles through hollows and unbounded test scenes.

Angle conventions: with n the outward opening normal, the incidence angle
phi is the counterclockwise angle from n to -v and the exit angle phi_plus
is the counterclockwise angle from n to v_plus.  So phi_plus == phi means
the particle left in exactly the reverse direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import DomainError, NoInteraction
from .geometry import (
    HalfLine,
    ParabolaArc,
    Ray,
    Segment,
    UnitVec,
    angle_between,
    pack_scene,
)
from .hollows import HollowGeometry


@dataclass(frozen=True)
class IncidenceState:
    xi: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.xi <= 1.0):
            raise DomainError(f"opening coordinate {self.xi} outside [0, 1]")
        if not abs(self.phi) < math.pi / 2:
            raise DomainError(f"incidence angle {self.phi} outside (-pi/2, pi/2)")


@dataclass(frozen=True)
class TraceLimits:
    max_reflections: int = 10**6
    corner_tol: float = 1e-9
    tangent_tol: float = 1e-9
    # self-intersection guard, relative to the scene diameter
    t_eps: float = 1e-9

    def __post_init__(self):
        if self.max_reflections < 1:
            raise DomainError("max_reflections must be at least 1")


@dataclass(frozen=True)
class ScatterRecord:
    xi: float
    phi: float
    phi_plus: float
    xi_plus: float
    n_reflections: int
    status: str
    path: Optional[np.ndarray] = None
    # True when a watched piece (e.g. a truncation cap) was hit
    watched: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def entry_ray(h: HollowGeometry, xi: float, phi: float):
    """Entry point on the opening and the inward unit velocity."""
    n = h.opening_normal
    v = (-n).rotate(phi)
    return h.opening_point(xi), v


def exit_angle(h: HollowGeometry, vx: float, vy: float) -> float:
    return angle_between(h.opening_normal, (vx, vy))


def _scaled_eps(lim: TraceLimits, diameter: float) -> float:
    return lim.t_eps * diameter


def trace_hollow(h: HollowGeometry, s: IncidenceState, lim: TraceLimits = TraceLimits(),
                 max_path: int = 4096) -> ScatterRecord:
    """Send one particle into ``h`` and follow it out through the opening."""
    p, v = entry_ray(h, s.xi, s.phi)
    path = np.zeros((max_path, 2))
    status, m, vx, vy, xi_plus, watched, npath = K.trace_one(
        h.scene, p[0], p[1], v.x, v.y, lim.max_reflections,
        _scaled_eps(lim, h.diameter), lim.corner_tol, lim.tangent_tol, path,
    )
    phi_plus = exit_angle(h, vx, vy) if status == K.OK else math.nan
    return ScatterRecord(s.xi, s.phi, phi_plus, float(xi_plus), int(m),
                         K.STATUS_NAMES[status], path[:npath].copy(), bool(watched))


class TraceArrays(NamedTuple):
    phi_plus: np.ndarray
    xi_plus: np.ndarray
    n_reflections: np.ndarray
    status: np.ndarray
    watched: np.ndarray
    v_plus: np.ndarray


def trace_arrays(h: HollowGeometry, xi: np.ndarray, phi: np.ndarray,
                 lim: TraceLimits = TraceLimits()) -> TraceArrays:
    """Vectorized trace_hollow without path recording."""
    xi = np.asarray(xi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    A = np.asarray(h.A)
    B = np.asarray(h.B)
    ox = A[0] + xi * (B[0] - A[0])
    oy = A[1] + xi * (B[1] - A[1])
    mx, my = -h.opening_normal.x, -h.opening_normal.y
    c, s = np.cos(phi), np.sin(phi)
    dx = c * mx - s * my
    dy = s * mx + c * my
    N = xi.shape[0]
    status = np.empty(N, dtype=np.int64)
    m = np.empty(N, dtype=np.int64)
    vx = np.empty(N)
    vy = np.empty(N)
    xp = np.empty(N)
    w = np.empty(N, dtype=np.int64)
    K.trace_batch(h.scene, ox, oy, dx, dy, lim.max_reflections, _scaled_eps(lim, h.diameter),
                  lim.corner_tol, lim.tangent_tol, status, m, vx, vy, xp, w)
    nx, ny = h.opening_normal
    phi_plus = np.arctan2(nx * vy - ny * vx, nx * vx + ny * vy)
    phi_plus[status != K.OK] = np.nan
    return TraceArrays(phi_plus, xp, m, status, w.astype(bool), np.column_stack([vx, vy]))


def reverse_check(h: HollowGeometry, record: ScatterRecord, lim: TraceLimits = TraceLimits(),
                  tol: float = 1e-7) -> bool:
    """Time-reversal test of a traced record.

    The reversed particle enters at xi_plus with velocity -v_plus, whose
    incidence angle is phi_plus; it must leave at xi with exit angle phi.
    """
    if not record.ok:
        raise DomainError("reverse_check needs a record with status ok")
    try:
        back = trace_hollow(h, IncidenceState(record.xi_plus, record.phi_plus), lim, max_path=0)
    except DomainError:
        return False
    if not back.ok:
        return False
    return abs(back.xi_plus - record.xi) <= tol and abs(back.phi_plus - record.phi) <= tol


# ---------------------------------------------------------------------------
# unbounded scenes


@dataclass(frozen=True)
class ParabolaExterior:
    """Billiard inside the parabola y^2 = 4 p x (the body is its exterior)."""

    p: float = 1.0

    def pieces(self):
        return [ParabolaArc((0.0, 0.0), UnitVec(1.0, 0.0), self.p, -math.inf, math.inf)]

    @property
    def focus(self):
        return (self.p, 0.0)

    @property
    def scale(self):
        return 4.0 * self.p


@dataclass(frozen=True)
class OrthantCorner:
    """Billiard in the quadrant x > 0, y > 0; finite arms give a square corner."""

    arm: float = math.inf

    def pieces(self):
        if math.isinf(self.arm):
            return [HalfLine((0.0, 0.0), UnitVec(1.0, 0.0), -1), HalfLine((0.0, 0.0), UnitVec(0.0, 1.0))]
        return [Segment((self.arm, 0.0), (0.0, 0.0)), Segment((0.0, 0.0), (0.0, self.arm))]

    @property
    def scale(self):
        return 1.0 if math.isinf(self.arm) else self.arm


@dataclass(frozen=True)
class QuarterAnglePolygon:
    """Region Re(exp(i pi k / 2m) z) > a_k, k = 0..2m-1.

    The boundary is a convex polygon with two unbounded edges whose vertex
    angles are multiples of pi/4 when m = 2.
    """

    a: tuple

    def __post_init__(self):
        if len(self.a) < 2 or len(self.a) % 2:
            raise DomainError("need 2m constants a_k")

    @property
    def m(self):
        return len(self.a) // 2

    def normals(self):
        th = [math.pi * k / (2 * self.m) for k in range(2 * self.m)]
        return [(math.cos(t), -math.sin(t)) for t in th]

    def recession_cone(self):
        """Angular range (lo, hi) of directions along which the region is unbounded."""
        return -math.pi / 2, -math.pi / 2 + math.pi / (2 * self.m)

    def incoming_ray(self, frac: float, pos: float = 0.5, distance: float = 1e3) -> Ray:
        """Ray arriving from infinity along -d.

        d sits at fraction ``frac`` across the recession cone; the start point
        lies far out from the polygon apex in the direction at fraction ``pos``.
        """
        if not (0.0 < frac < 1.0 and 0.0 < pos < 1.0):
            raise DomainError("frac and pos must lie strictly inside (0, 1)")
        lo, hi = self.recession_cone()
        d = UnitVec.from_angle(lo + frac * (hi - lo))
        u = UnitVec.from_angle(lo + pos * (hi - lo))
        apex = self.pieces()[0].origin
        r = distance * self.scale
        return Ray((apex[0] + r * u.x, apex[1] + r * u.y), -d)

    @property
    def scale(self):
        return 1.0 + max(abs(x) for x in self.a)

    def pieces(self):
        L = 1e3 * self.scale
        poly = [(-L, -L), (L, -L), (L, L), (-L, L)]
        for n, c in zip(self.normals(), self.a):
            poly = _clip(poly, n, c)
            if len(poly) < 3:
                raise DomainError("constraints leave an empty region")
        tol = 1e-9 * L
        poly = [p for i, p in enumerate(poly) if math.dist(p, poly[i - 1]) > tol]
        on = []
        for i in range(len(poly)):
            p, q = poly[i], poly[(i + 1) % len(poly)]
            on.append(any(abs(n[0] * p[0] + n[1] * p[1] - c) < tol and abs(n[0] * q[0] + n[1] * q[1] - c) < tol
                          for n, c in zip(self.normals(), self.a)))
        # rotate so that the reflecting chain is contiguous from index 0
        k = next(i for i in range(len(poly)) if on[i] and not on[i - 1])
        poly = poly[k:] + poly[:k]
        on = on[k:] + on[:k]
        edges = [(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly)) if on[i]]
        pieces = []
        for j, (p, q) in enumerate(edges):
            if j == 0:
                pieces.append(HalfLine(q, UnitVec.of(p[0] - q[0], p[1] - q[1]), -1))
            elif j == len(edges) - 1:
                pieces.append(HalfLine(p, UnitVec.of(q[0] - p[0], q[1] - p[1])))
            else:
                pieces.append(Segment(p, q))
        return pieces


def _clip(poly, n, c):
    out = []
    for i in range(len(poly)):
        p, q = poly[i], poly[(i + 1) % len(poly)]
        fp = n[0] * p[0] + n[1] * p[1] - c
        fq = n[0] * q[0] + n[1] * q[1] - c
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


class UnboundedResult(NamedTuple):
    v_plus: UnitVec
    path: np.ndarray
    n_reflections: int
    status: str


def trace_unbounded(scene, ray: Ray, lim: TraceLimits = TraceLimits(), max_path: int = 4096) -> UnboundedResult:
    """Follow a ray through an unbounded scene until it escapes."""
    pieces = scene.pieces()
    packed = pack_scene(pieces, scale=scene.scale)
    path = np.zeros((max_path, 2))
    status, m, vx, vy, _, _, npath = K.trace_one(
        packed, float(ray.origin[0]), float(ray.origin[1]), ray.dir.x, ray.dir.y,
        lim.max_reflections, lim.t_eps * scene.scale, lim.corner_tol, lim.tangent_tol, path,
    )
    if status == K.NO_INTERACTION:
        raise NoInteraction("ray never reaches the boundary")
    return UnboundedResult(UnitVec(vx, vy), path[:npath].copy(), int(m), K.STATUS_NAMES[status])


def chord_focus_distance(path: np.ndarray, focus: Sequence[float]) -> float:
    """Distance from ``focus`` to the line through the first two reflection points."""
    if len(path) < 3:
        raise DomainError("need at least two reflection points")
    p, q = path[1], path[2]
    d = q - p
    f = np.asarray(focus) - p
    return float(abs(d[0] * f[1] - d[1] * f[0]) / np.hypot(*d))
