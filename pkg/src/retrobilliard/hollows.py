"""Constructors for the hollow shapes traced by the engine.

A hollow is a cavity bounded by wall pieces and a straight opening.  The
walls are stored as a chain running from the opening's end point B back to
its start point A, counterclockwise around the cavity, so every wall has the
cavity on its left.  The normalized opening coordinate xi runs from A (0) to
B (1); the opening normal points out of the cavity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, DomainError, WeightError
from .geometry import EllipseArc, ParabolaArc, Segment, UnitVec, pack_scene


@dataclass(frozen=True)
class HollowGeometry:
    pieces: tuple
    opening: Segment
    opening_normal: UnitVec
    label: str
    params: dict = field(default_factory=dict, compare=False, hash=False)
    # pieces whose hits are reported by the tracer (e.g. a truncation cap)
    watch: tuple = ()

    @property
    def A(self):
        return self.opening.p0

    @property
    def B(self):
        return self.opening.p1

    @property
    def opening_length(self) -> float:
        return self.opening.length

    @cached_property
    def scene(self):
        return pack_scene(self.pieces, self.opening, self.opening_normal, watch=self.watch)

    @cached_property
    def diameter(self) -> float:
        return float(self.scene[13])

    def opening_point(self, xi: float):
        return self.opening.point_at(xi)

    def describe(self) -> dict:
        return {"shape": self.label, "params": dict(self.params)}


def _hollow(walls, A, B, label, params, watch=()):
    opening = Segment(A, B)
    n = -opening.normal_at()
    return HollowGeometry(tuple(walls), opening, n, label, dict(params), tuple(watch))


def _polyline(points):
    return [Segment(tuple(points[i]), tuple(points[i + 1])) for i in range(len(points) - 1)]


def make_rectangle(eps: float) -> HollowGeometry:
    """Rectangular cavity behind a unit opening, depth 1/eps."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"rectangle aspect ratio must lie in (0, 1), got {eps}")
    D = 1.0 / eps
    A, B = (-0.5, 0.0), (0.5, 0.0)
    walls = _polyline([B, (0.5, D), (-0.5, D), A])
    return _hollow(walls, A, B, "rectangle", {"eps": eps})


def make_triangle(eps: float) -> HollowGeometry:
    """Isosceles triangle with apex angle eps standing on a unit opening."""
    if not 0.0 < eps < math.pi / 2:
        raise DomainError(f"triangle apex angle must lie in (0, pi/2), got {eps}")
    h = 0.5 / math.tan(eps / 2)
    A, B = (-0.5, 0.0), (0.5, 0.0)
    walls = _polyline([B, (0.0, h), A])
    return _hollow(walls, A, B, "triangle", {"eps": eps})


def triangle_apex(h: HollowGeometry):
    return h.pieces[0].p1


def make_mushroom(eps: float) -> HollowGeometry:
    """Upper half of the ellipse x^2/(1+eps^2) + y^2 = 1 on a 2eps x eps^2 stem.

    Kept at the natural scale: the opening is [-eps, eps] x {-eps^2} and the
    ellipse foci sit on the stem's top corners (+-eps, 0).
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"mushroom stem half-width must lie in (0, 1), got {eps}")
    a = math.sqrt(1.0 + eps * eps)
    A, B = (-eps, -eps * eps), (eps, -eps * eps)
    walls = [
        Segment(B, (eps, 0.0)),
        Segment((eps, 0.0), (a, 0.0)),
        EllipseArc((0.0, 0.0), a, 1.0, 0.0, math.pi),
        Segment((-a, 0.0), (-eps, 0.0)),
        Segment((-eps, 0.0), A),
    ]
    return _hollow(walls, A, B, "mushroom", {"eps": eps})


def tube_notch_centers(delta: float, a: float, offset: float = 0.0) -> list:
    """Notch centres k + offset for integers k with 1 <= k < a - 1."""
    ks = []
    k = 1
    while k < a - 1:
        c = k + offset
        if c - delta / 2 > 0 and c + delta / 2 < a:
            ks.append(float(c))
        k += 1
    return ks


def make_tube(eps: float, delta: float, a: float, offset: float = 0.0) -> HollowGeometry:
    """Tube [0, a] x [0, 1] open on its left side, with delta x eps notches.

    Notches sit flush against the bottom and top walls at unit spacing and
    the two rows are vertically aligned.
    """
    if delta >= 1.0:
        raise ConfigError(f"notch width {delta} would make neighbouring notches overlap")
    if not (0.0 < eps < 0.5 and 0.0 < delta and a > 2.0):
        raise DomainError(f"tube needs 0 < eps < 1/2, delta > 0, a > 2 (got {eps}, {delta}, {a})")
    centers = tube_notch_centers(delta, a, offset)
    if not centers:
        raise ConfigError(f"tube length {a} leaves no room for a notch")
    hw = delta / 2
    bottom = [(0.0, 0.0)]
    for c in centers:
        bottom += [(c - hw, 0.0), (c - hw, eps), (c + hw, eps), (c + hw, 0.0)]
    bottom.append((a, 0.0))
    top = [(a, 1.0)]
    for c in reversed(centers):
        top += [(c + hw, 1.0), (c + hw, 1.0 - eps), (c - hw, 1.0 - eps), (c - hw, 1.0)]
    top.append((0.0, 1.0))
    pts = bottom + top
    A, B = (0.0, 1.0), (0.0, 0.0)
    return _hollow(_polyline(pts), A, B, "tube",
                   {"eps": eps, "delta": delta, "a": a, "offset": offset, "n_notches": len(centers)})


def make_double_parabola() -> HollowGeometry:
    """Curvilinear triangle bounded by two confocal-vertex parabolic arcs.

    Each arc has focal parameter 1 and its vertex at the other arc's focus;
    the unit opening lies on the common axis and the arcs meet at (0, sqrt 2).
    """
    A, B = (-0.5, 0.0), (0.5, 0.0)
    top = math.sqrt(2.0)
    right = ParabolaArc(B, UnitVec(-1.0, 0.0), 1.0, -top, 0.0)
    left = ParabolaArc(A, UnitVec(1.0, 0.0), 1.0, 0.0, top)
    return _hollow([right, left], A, B, "double_parabola", {})


# -- notched angle ----------------------------------------------------------


def notched_gamma(alpha: float, beta: float) -> float:
    """Outer-angle excess after stretching the (alpha, beta) angle to a right angle."""
    s = 1.0 / math.tan(alpha / 2)
    return 2.0 * math.atan(s * math.tan((alpha + beta) / 2)) - math.pi / 2


def staircase_delta(gamma: float) -> float:
    """Log step of the reduced staircase: tanh(delta) = sin(gamma)."""
    return math.atanh(math.sin(gamma))


def gamma_from_delta(delta: float) -> float:
    return math.asin(math.tanh(delta))


def _reduced_staircase(gamma: float, r_min: float):
    """Right half of the reduced staircase, O at the origin and |OB| = 1.

    Returns the vertex list starting at B, alternating inner (on OB) and
    outer (on OB') vertices, stopping once the inner vertex distance from O
    falls below r_min.
    """
    q = math.tan(math.pi / 4 - gamma / 2)  # = exp(-delta)
    cot_outer = q
    pts = []
    r = 1.0
    while True:
        x = r / math.sqrt(2.0)
        pts.append((x, -x))
        y_out = -x * cot_outer
        pts.append((x, y_out))
        r_next = r * q
        if r_next < r_min:
            break
        r = r_next
    return pts


def make_notched_angle(alpha: float, beta: float, delta_cut: float = 0.01) -> HollowGeometry:
    """Notched angle with inner apex angle alpha and angular gap beta.

    Built from the right-angle staircase (vertices e^{-n delta} along the
    inner side, tanh delta = sin gamma), compressed horizontally by
    cot(alpha/2) and rescaled to a unit opening.  The staircase is cut by the
    line parallel to the opening at height (1 - delta_cut) * apex height and
    closed along that line; the closing segment is the watched piece.
    With alpha = pi/2 no compression happens and the reduced gap equals beta.
    """
    if not (alpha > 0 and beta > 0 and alpha + beta < math.pi):
        raise DomainError(f"notched angle needs alpha, beta > 0 and alpha + beta < pi (got {alpha}, {beta})")
    if not 0.0 < delta_cut < 1.0:
        raise DomainError(f"truncation fraction must lie in (0, 1), got {delta_cut}")
    gamma = beta if alpha == math.pi / 2 else notched_gamma(alpha, beta)
    if not 0.0 < gamma < math.pi / 2:
        raise DomainError(f"reduced gap {gamma} out of range")
    delta = staircase_delta(gamma)

    s = 1.0 / math.tan(alpha / 2)
    k = s / math.sqrt(2.0)
    apex_height = s / 2.0
    # apex O sits at (0, apex_height) once the opening is on y = 0; in reduced
    # coordinates O is the origin and AB is at y = -1/sqrt(2)
    cut_below_O = delta_cut * apex_height / k
    r_min = cut_below_O * math.sqrt(2.0) * 0.5
    stairs = _reduced_staircase(gamma, r_min)

    def to_hollow(p):
        return (p[0] / s * k, p[1] * k + apex_height)

    pts = [to_hollow(p) for p in stairs]
    y_cut = (1.0 - delta_cut) * apex_height
    if y_cut <= pts[1][1]:
        raise ConfigError("truncation line cuts below the first staircase step")
    right = [pts[0]]
    for j in range(1, len(pts)):
        p, q = right[-1], pts[j]
        if q[1] >= y_cut:
            # vertical riser crosses the cut (horizontal treads keep y fixed)
            right.append((p[0], y_cut))
            break
        right.append(q)
    else:
        raise ConfigError("staircase ended before reaching the truncation line")
    left = [(-x, y) for (x, y) in reversed(right)]
    A, B = left[-1], right[0]
    walls = _polyline(right) + [Segment(right[-1], left[0])] + _polyline(left)
    cap = len(right) - 1
    params = {"alpha": alpha, "beta": beta, "delta_cut": delta_cut,
              "gamma": gamma, "delta": delta, "n_steps": (len(right) - 1) // 2}
    return _hollow(walls, A, B, "notched_angle", params, watch=(cap,))


def make_reduced_notched_angle(delta: float, delta_cut: float = 1e-3) -> HollowGeometry:
    """Right-angle notched angle whose staircase ratio is exp(-delta)."""
    return make_notched_angle(math.pi / 2, gamma_from_delta(delta), delta_cut)


# -- similarity, bodies, validation ----------------------------------------


def similar_copy(h: HollowGeometry, scale: float) -> HollowGeometry:
    if not scale > 0:
        raise DomainError(f"similarity factor must be positive, got {scale}")
    return HollowGeometry(
        tuple(pc.scaled(scale) for pc in h.pieces),
        h.opening.scaled(scale),
        h.opening_normal,
        h.label,
        dict(h.params),
        h.watch,
    )


@dataclass(frozen=True)
class BodyDecomposition:
    """Perimeter fractions of a body's convex hull: convex part plus hollows."""

    c0: float
    parts: tuple  # ((c_i, hollow), ...)

    def __post_init__(self):
        if self.c0 < 0 or any(c <= 0 for c, _ in self.parts):
            raise WeightError("weights must be c0 >= 0 and c_i > 0")
        total = self.c0 + sum(c for c, _ in self.parts)
        if abs(total - 1.0) > 1e-12:
            raise WeightError(f"weights sum to {total!r}, not 1")


def wall_chain(h: HollowGeometry, n: int = 64) -> np.ndarray:
    """Wall points from B to A following the chain order."""
    out = [np.array([h.B])]
    cur = np.array(h.B)
    for pc in h.pieces:
        pts = pc.sample(n)
        if np.hypot(*(pts[0] - cur)) > np.hypot(*(pts[-1] - cur)):
            pts = pts[::-1]
        out.append(pts)
        cur = pts[-1]
    return np.vstack(out)


def check_hollow(h: HollowGeometry, n: int = 64, tol: float = 1e-9) -> list:
    """List of violated hollow invariants (empty when the geometry is valid)."""
    problems = []
    scale = h.diameter
    cur = np.array(h.B)
    for i, pc in enumerate(h.pieces):
        e0, e1 = (np.array(e) for e in pc.endpoints())
        d0, d1 = np.hypot(*(e0 - cur)), np.hypot(*(e1 - cur))
        if min(d0, d1) > tol * scale:
            problems.append(f"piece {i} does not continue the wall chain")
        cur = e1 if d0 <= d1 else e0
    if np.hypot(*(cur - np.array(h.A))) > tol * scale:
        problems.append("wall chain does not close at the opening start")

    pts = wall_chain(h, n)
    A, B = np.array(h.A), np.array(h.B)
    inward = -np.array(h.opening_normal)
    depth = (pts - A) @ inward
    if np.any(depth < -tol * scale):
        problems.append("wall crosses the opening line")
    on_line = depth <= tol * scale
    near_end = np.minimum(np.hypot(*(pts - A).T), np.hypot(*(pts - B).T)) <= tol * scale
    if np.any(on_line & ~near_end):
        problems.append("wall touches the opening line away from the opening ends")
    return problems
