import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from retrobilliard.dynamics import trace_arrays
from retrobilliard.errors import DomainError, EmptyMeasure, RunFlagged, WeightError
from retrobilliard.hollows import BodyDecomposition, make_double_parabola, make_mushroom, make_rectangle
from retrobilliard.measures import ETA_ELASTIC, ETA_RETRO, ScatterMeasure, _rng, estimate_measure
from retrobilliard.resistance import (
    INF_R_2D,
    R_from_scatter,
    ResistanceReport,
    convex_r,
    convex_r_monte_carlo,
    convex_RD_ratio,
    directional_resistance,
    maxwellian_resistance,
    r_of_body,
)
from retrobilliard.dynamics import TraceLimits


def test_R_from_scatter_examples():
    assert R_from_scatter(ETA_RETRO) == 2.0
    assert R_from_scatter(ETA_ELASTIC) == pytest.approx(4 / 3)
    atom = ScatterMeasure(np.array([0.0]), np.array([math.pi / 2]), 1, 0)
    assert R_from_scatter(atom) == pytest.approx(1.0)
    with pytest.raises(EmptyMeasure):
        R_from_scatter(ScatterMeasure(np.array([]), np.array([]), 0, 0))


def test_report_invariants():
    rep = ResistanceReport.from_measure(ETA_RETRO)
    assert (rep.R, rep.D, rep.r) == (2.0, 1.0, 1.0)
    rep = ResistanceReport.from_measure(ETA_ELASTIC, perimeter=3.0)
    assert rep.r == pytest.approx(2 / 3) and rep.R == pytest.approx(4.0)
    with pytest.raises(DomainError):
        ResistanceReport(1.0, 0.0, 0.5)
    with pytest.raises(DomainError):
        ResistanceReport(2.5, 1.0, 1.25)
    with pytest.raises(DomainError):
        ResistanceReport(1.0, 1.0, 0.7)


@given(st.lists(st.tuples(st.floats(-1.57, 1.57), st.floats(-1.57, 1.57)), min_size=1, max_size=40),
       st.floats(0.1, 10))
def test_reports_from_any_measure_are_valid(pairs, perim):
    phi, pp = map(np.array, zip(*pairs))
    rep = ResistanceReport.from_measure(ScatterMeasure(phi, pp, len(phi), 0), perim)
    assert 0 <= rep.r <= 1 and rep.R <= 2 * rep.D * (1 + 1e-12)


def test_r_of_body_examples():
    assert r_of_body(1.0) == pytest.approx(2 / 3)
    assert r_of_body(0.0, [1.0], [1.0]) == 1.0
    assert r_of_body(0.5, [5 / 6], [0.5]) == pytest.approx(0.75)
    d = BodyDecomposition(0.5, ((0.25, make_mushroom(0.1)), (0.25, make_rectangle(0.1))))
    assert r_of_body(d, [1.0, 5 / 6]) == pytest.approx(1 / 3 + 0.25 + 5 / 24)


def test_r_of_body_errors():
    with pytest.raises(WeightError):
        r_of_body(0.5, [1.0], [0.4])
    with pytest.raises(WeightError):
        r_of_body(0.5, [1.0, 1.0], [0.5])
    with pytest.raises(DomainError):
        r_of_body(0.0, [1.2], [1.0])
    with pytest.raises(WeightError):
        BodyDecomposition(0.5, ((0.6, make_mushroom(0.1)),))


@pytest.mark.parametrize("k", range(1, 8))
def test_r_of_body_limit(k):
    c0 = 10.0**-k
    r = r_of_body(c0, [1 - c0], [1 - c0])
    assert abs(r - 1) < 2 * 10.0**-k


def test_convex_closed_forms():
    assert convex_r(2) == Fraction(2, 3)
    assert convex_r(3) == Fraction(1, 2) and convex_RD_ratio(3) == 1
    assert convex_r(4) == Fraction(2, 5)
    assert isinstance(convex_RD_ratio(2), Fraction)
    for bad in (1, 0, 2.5):
        with pytest.raises(DomainError):
            convex_r(bad)
    assert 0 < INF_R_2D < convex_r(2)


def test_convex_monte_carlo():
    assert abs(convex_r_monte_carlo(10**6, 0) - 2 / 3) < 1e-3


def test_maxwellian():
    assert maxwellian_resistance(1.7, 1.0, 0.0) == 1.7
    assert maxwellian_resistance(1.7, 1.0, 1.0) == 1.0
    assert maxwellian_resistance(4 / 3, 1.0, 0.5) == pytest.approx(7 / 6)
    with pytest.raises(DomainError):
        maxwellian_resistance(1.0, 1.0, 1.5)


def test_directional_head_on_rectangle():
    R = directional_resistance(make_rectangle(0.01), 0.0, 10**5, 0)
    assert np.allclose(R, [0.0, 2.0], atol=0.02)


@pytest.mark.parametrize("build", [make_double_parabola, lambda: make_mushroom(0.1), lambda: make_rectangle(0.2)])
def test_directional_symmetry(build):
    h = build()
    R = directional_resistance(h, 0.0, 2 * 10**4, 1)
    assert abs(R[0]) < 0.03 * h.opening_length
    a = directional_resistance(h, 0.3, 2 * 10**4, 1)
    b = directional_resistance(h, -0.3, 2 * 10**4, 1)
    assert abs(a[0] + b[0]) < 0.05 and abs(a[1] - b[1]) < 0.05


def test_directional_projection_matches_records():
    h = make_double_parabola()
    phi, N, seed = 0.4, 20000, 3
    R = directional_resistance(h, phi, N, seed)
    xi = _rng(seed, 0).random(N)
    tr = trace_arrays(h, xi, np.full(N, phi))
    ok = tr.status == 0
    expect = np.mean(1 + np.cos(phi - tr.phi_plus[ok])) * h.opening_length
    v = np.array([-math.sin(phi), math.cos(phi)])
    assert R @ v == pytest.approx(expect, rel=1e-12)


def test_directional_errors():
    with pytest.raises(DomainError):
        directional_resistance(make_rectangle(0.2), math.pi / 2, 10, 0)
    with pytest.raises(RunFlagged):
        directional_resistance(make_rectangle(0.01), 1.0, 1000, 0, TraceLimits(max_reflections=2))


def test_hollow_F_feeds_body_resistance():
    eta = estimate_measure(make_mushroom(0.01), 20000, 0)
    rep = ResistanceReport.from_measure(eta)
    assert rep.r > 0.99
    assert r_of_body(0.2, [rep.r], [0.8]) > 2 / 3
