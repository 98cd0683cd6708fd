import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from retrobilliard.errors import DomainError
from retrobilliard.geometry import (
    EllipseArc,
    HalfLine,
    ParabolaArc,
    Ray,
    Segment,
    UnitVec,
    angle_between,
    ellipse_foci,
    first_hit,
    pack_scene,
    parabola_focus,
    reflect,
)

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def test_reflect_examples():
    assert reflect(UnitVec(0.0, -1.0), UnitVec(0.0, 1.0)) == pytest.approx((0.0, 1.0))
    h = math.sqrt(2) / 2
    assert reflect(UnitVec(h, -h), UnitVec(0.0, 1.0)) == pytest.approx((h, h))
    assert reflect(UnitVec(0.6, -0.8), UnitVec(0.0, 1.0)) == pytest.approx((0.6, 0.8))


@given(angles, angles)
def test_reflect_is_unit_and_involutive(a, b):
    v, n = UnitVec.from_angle(a), UnitVec.from_angle(b)
    w = reflect(v, n)
    assert abs(math.hypot(*w) - 1) < 1e-12
    assert w.dot(n) == pytest.approx(-v.dot(n), abs=1e-14)
    back = reflect(w, n)
    assert abs(back.x - v.x) < 1e-14 and abs(back.y - v.y) < 1e-14


def test_reflect_unit_bulk():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-np.pi, np.pi, (2, 10**5))
    vx, vy, nx, ny = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
    d = vx * nx + vy * ny
    norm = np.hypot(vx - 2 * d * nx, vy - 2 * d * ny)
    assert np.max(np.abs(norm - 1)) < 1e-12


def test_unitvec_validation():
    with pytest.raises(DomainError):
        UnitVec.of(0.0, 0.0)
    with pytest.raises(DomainError):
        Ray((0.0, 0.0), UnitVec(1.0, 1.0))
    assert UnitVec.of(3.0, 4.0) == pytest.approx((0.6, 0.8))


def test_angle_between_orientation():
    assert angle_between((1, 0), (0, 1)) == pytest.approx(math.pi / 2)
    assert angle_between((0, 1), (1, 0)) == pytest.approx(-math.pi / 2)


def test_hit_upper_unit_circle():
    arc = EllipseArc((0.0, 0.0), 1.0, 1.0, 0.0, math.pi)
    h = first_hit(Ray((0.0, 0.0), UnitVec(0.0, 1.0)), [arc])
    assert h.t == pytest.approx(1.0)
    assert h.point == pytest.approx((0.0, 1.0))
    assert h.normal == pytest.approx((0.0, -1.0))


def test_hit_segment():
    seg = Segment((1.0, 0.0), (1.0, 1.0))
    h = first_hit(Ray((0.0, 0.5), UnitVec(1.0, 0.0)), [seg])
    assert h.t == pytest.approx(1.0)
    assert h.point == pytest.approx((1.0, 0.5))
    assert h.param == pytest.approx(0.5)


def test_hit_parabola():
    par = ParabolaArc((-0.5, 0.0), UnitVec(1.0, 0.0), 1.0, -2.0, 2.0)
    h = first_hit(Ray((-1.0, 0.1), UnitVec(1.0, 0.0)), [par])
    x = 0.1**2 / 4 - 0.5
    assert h.point[0] == pytest.approx(x, abs=1e-14)
    assert h.t == pytest.approx(x + 1.0, abs=1e-14)


def test_hit_misses_and_tmin():
    seg = Segment((1.0, 0.0), (1.0, 1.0))
    assert first_hit(Ray((0.0, 2.0), UnitVec(1.0, 0.0)), [seg]) is None
    assert first_hit(Ray((0.0, 0.5), UnitVec(1.0, 0.0)), [seg], t_min=1.5) is None
    with pytest.raises(DomainError):
        first_hit(Ray((0.0, 0.5), UnitVec(1.0, 0.0)), [seg], t_min=-1.0)


def test_hit_flags():
    seg = Segment((1.0, 0.0), (1.0, 1.0))
    corner = first_hit(Ray((0.0, 0.0), UnitVec(1.0, 0.0)), [seg])
    assert corner.singular
    graze = first_hit(Ray((0.0, 0.0), UnitVec.of(1.0, 1e-12)), [Segment((-5.0, 0.0), (5.0, 0.0))], t_min=1e-9)
    assert graze is None or graze.near_tangent


def test_halfline_hit():
    hl = HalfLine((0.0, 0.0), UnitVec(1.0, 0.0))
    h = first_hit(Ray((1e6, 1.0), UnitVec(0.0, -1.0)), [hl])
    assert h.point == pytest.approx((1e6, 0.0))
    assert first_hit(Ray((-1.0, 1.0), UnitVec(0.0, -1.0)), [hl]) is None


def test_foci():
    assert parabola_focus(ParabolaArc((-0.5, 0.0), UnitVec(1.0, 0.0), 1.0, -1.0, 1.0)) == pytest.approx((0.5, 0.0))
    eps = 0.1
    f1, f2 = ellipse_foci(EllipseArc((0.0, 0.0), math.sqrt(1 + eps**2), 1.0, 0.0, math.pi))
    assert sorted([f1[0], f2[0]]) == pytest.approx([-0.1, 0.1], abs=1e-12)
    f1, f2 = ellipse_foci(EllipseArc((0.0, 0.0), 1.0, 1.0, 0.0, math.pi))
    assert f1 == pytest.approx((0.0, 0.0)) and f2 == pytest.approx((0.0, 0.0))


def test_piece_validation():
    with pytest.raises(DomainError):
        Segment((0.0, 0.0), (0.0, 0.0))
    with pytest.raises(DomainError):
        EllipseArc((0.0, 0.0), 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        EllipseArc((0.0, 0.0), 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ParabolaArc((0.0, 0.0), UnitVec(1.0, 0.0), -1.0, 0.0, 1.0)


@given(st.floats(-3, 3), st.floats(0.2, 3.0))
def test_parabola_focal_property(w, p):
    # a ray from the focus to any arc point reflects parallel to the axis
    par = ParabolaArc((0.3, -0.2), UnitVec.from_angle(0.7), p, -10.0, 10.0)
    target = par.point_at(w)
    f = par.focus()
    d = UnitVec.of(target[0] - f[0], target[1] - f[1])
    h = first_hit(Ray(f, d), [par])
    out = reflect(d, h.normal)
    assert abs(angle_between(out, par.axis)) < 1e-9
    # and conversely, an axis-parallel ray reflects through the focus
    start = (target[0] + 5 * par.axis.x, target[1] + 5 * par.axis.y)
    h2 = first_hit(Ray(start, -par.axis), [par])
    out2 = reflect(-par.axis, h2.normal)
    to_f = UnitVec.of(f[0] - h2.point[0], f[1] - h2.point[1])
    assert abs(out2.cross(to_f)) < 1e-9 and out2.dot(to_f) > 0


@given(st.floats(-math.pi, math.pi), st.floats(0.05, 0.95))
def test_hit_residual_on_ellipse(theta, frac):
    arc = EllipseArc((0.2, 0.1), 2.0, 1.0, 0.0, math.pi)
    origin = (0.2 + 1.6 * (2 * frac - 1), 0.15)
    h = first_hit(Ray(origin, UnitVec.from_angle(0.1 + (math.pi - 0.2) * (theta + math.pi) / (2 * math.pi))), [arc])
    assert h is not None
    assert arc.residual(h.point) < 1e-9 * 4
    # normal points back into the region the ray came from
    assert h.normal.dot((origin[0] - h.point[0], origin[1] - h.point[1])) > 0


def test_grid_scene_matches_linear_scan():
    rng = np.random.default_rng(5)
    pts = [(math.cos(t), math.sin(t)) for t in np.linspace(0, 2 * math.pi, 60, endpoint=False)]
    pieces = [Segment(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts) - 1)]
    opening = Segment(pts[-1], pts[0])
    grid = pack_scene(pieces, opening=opening, opening_normal=UnitVec(1.0, 0.0), grid_threshold=10)
    flat = pack_scene(pieces)
    assert grid[12] == 1 and flat[12] == 0
    for _ in range(300):
        o = tuple(rng.uniform(-0.5, 0.5, 2))
        d = UnitVec.from_angle(rng.uniform(-math.pi, math.pi))
        a = first_hit(Ray(o, d), pieces, scene=grid)
        b = first_hit(Ray(o, d), pieces, scene=flat)
        if a is None or b is None:
            assert a is None and b is None
        else:
            assert a.piece == b.piece and a.t == pytest.approx(b.t, abs=1e-12)
