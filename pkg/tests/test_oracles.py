import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from retrobilliard.dynamics import IncidenceState, trace_hollow
from retrobilliard.errors import CapExceeded, Degenerate, DomainError
from retrobilliard.hollows import make_rectangle, make_triangle
from retrobilliard.oracles import (
    NotchedDynamics,
    RotationProblem,
    compare_notched,
    compare_rectangle,
    compare_triangle,
    f_delta,
    f_delta_inv,
    geometric_pmf,
    incidence_to_lambda,
    k_delta_samples,
    k_delta_tv,
    lambda_density,
    lambda_to_incidence,
    notched_run,
    notched_step_map,
    notched_trace,
    rect_parity,
    rotation_gaps,
    rotation_l,
    rotation_law,
    step_length,
    traced_sign,
    tri_unfold,
    triangle_bound_ok,
    triangle_circle_coords,
    unfold_triangle_incidence,
    zeta,
    zeta_inv,
)

# -- rectangle


def test_rect_parity_examples():
    assert rect_parity(0.5, 1e-6, 0.5) == -1
    phi = math.atan(0.8 * 0.3 / 2)  # (2/eps) tan(phi) = 0.8 with eps = 0.3
    assert rect_parity(0.5, phi, 0.3) == 1
    assert rect_parity(0.5, -phi, 0.3) == 1


def test_rect_parity_errors():
    with pytest.raises(Degenerate):
        rect_parity(0.5, math.atan(0.125), 0.5)  # 0.5 + 4 * 0.125 = 1
    with pytest.raises(DomainError):
        rect_parity(0.5, 0.0, 0.5)
    with pytest.raises(DomainError):
        rect_parity(1.0, 0.2, 0.5)
    with pytest.raises(DomainError):
        rect_parity(0.5, 0.2, 1.0)


def test_rect_parity_agrees_with_single_traces():
    h = make_rectangle(0.1)
    rng = np.random.default_rng(0)
    for _ in range(300):
        xi, phi = rng.uniform(0.01, 0.99), rng.uniform(-1.4, 1.4)
        try:
            o = rect_parity(xi, phi, 0.1)
        except (Degenerate, DomainError):
            continue
        r = trace_hollow(h, IncidenceState(xi, phi))
        assert r.ok and traced_sign(phi, r.phi_plus) == o


def test_compare_rectangle_small():
    rep = compare_rectangle(0.05, 5000, 1)
    assert rep.disagree == 0 and rep.agree > 4900
    assert rep.agreement == 1.0
    assert set(rep.as_dict()) == {"shape", "N", "agree", "disagree", "degenerate", "excluded", "count_agree"}


# -- triangle


def test_tri_unfold_examples():
    u = tri_unfold(0.0, 0.0, 0.1)
    assert u.n == 31 and u.sign == 1
    with pytest.raises(DomainError):
        tri_unfold(0.2, 0.0, 0.1)
    with pytest.raises(Degenerate):
        tri_unfold(0.0, math.pi / 2 - 0.05 * 20, 0.1)  # x_plus = 2.0 exactly 20 steps


@given(st.floats(0, 0.1), st.floats(-1.5, 1.5))
def test_tri_unfold_shift_identity(x, pc):
    try:
        u = tri_unfold(x, pc, 0.1)
    except Degenerate:
        return
    assert u.x_plus - x == pytest.approx(math.pi - 2 * pc)
    assert u.n == math.floor(u.x_plus / 0.1)


@given(st.floats(0.001, 0.999), st.floats(-1.5, 1.5))
def test_triangle_circle_coords_bound(xi, phi):
    eps = 0.1
    x, pc = triangle_circle_coords(eps, xi, phi)
    assert -1e-12 <= x <= eps + 1e-12
    assert triangle_bound_ok(phi, pc, eps)


def test_triangle_counts_match_traces():
    eps = 0.2
    h = make_triangle(eps)
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(300):
        xi, phi = rng.uniform(0.01, 0.99), rng.uniform(-1.4, 1.4)
        try:
            u = unfold_triangle_incidence(eps, xi, phi)
        except Degenerate:
            continue
        r = trace_hollow(h, IncidenceState(xi, phi))
        if not r.ok:
            continue
        checked += 1
        assert r.n_reflections == u.n
        assert abs(r.phi_plus - u.sign * phi) <= eps
    assert checked > 290


def test_compare_triangle_small():
    rep = compare_triangle(0.1, 3000, 2)
    assert rep.disagree == 0 and rep.count_agree == rep.agree


# -- circle rotation


def test_rotation_examples():
    assert rotation_l(RotationProblem(0.0, 0.5 - 1e-9, 0.1)) == 1
    g = rotation_gaps(RotationProblem(0.0, 0.5 - 1e-9, 0.1), 4)
    assert g == [2, 2, 2, 2]


@given(st.floats(0, 0.999), st.floats(0.01, 0.99), st.floats(0.01, 0.3))
def test_rotation_l_definition(xi0, alpha, eps):
    p = RotationProblem(xi0, alpha, eps, max_iter=10**5)
    try:
        l = rotation_l(p)
    except CapExceeded:
        return
    gaps = rotation_gaps(p, 2 * l)
    sums = np.cumsum([g if i % 2 == 0 else -g for i, g in enumerate(gaps)])
    assert sums[2 * l - 1] <= 0
    assert all(sums[2 * j - 1] > 0 for j in range(1, l))
    if gaps[1] >= gaps[0]:
        assert l == 1


def test_rotation_validation_and_cap():
    with pytest.raises(DomainError):
        RotationProblem(0.0, 0.3, 0.6)
    with pytest.raises(DomainError):
        RotationProblem(0.0, 1.0, 0.1)
    with pytest.raises(CapExceeded):
        rotation_l(RotationProblem(0.3, 0.5, 0.01, max_iter=1000))


def test_rotation_law_normalized_and_stable():
    laws = [rotation_law(eps, 5 * 10**4, 0, max_iter=10**6) for eps in (1e-2, 1e-3)]
    for law in laws:
        assert law.p_hat.sum() == pytest.approx(1.0)
        # l has a heavy tail, so a few starts never stop within the cap
        assert law.n_capped < 0.05 * law.n_samples
    k = min(6, len(laws[0].p_hat), len(laws[1].p_hat))
    assert np.max(np.abs(laws[0].p_hat[:k] - laws[1].p_hat[:k])) < 0.02


# -- notched angle


def test_zeta_endpoints_and_monotone():
    for d in (1e-4, 0.1, 2.0):
        z = np.linspace(0, 1, 1001)
        w = zeta(z, d)
        assert w[0] == 0.0 and w[-1] == pytest.approx(1.0, abs=1e-15)
        assert np.all(np.diff(w) > 0)
        assert np.allclose(zeta_inv(w, d), z, atol=1e-12)


def test_f_delta_near_linear():
    assert abs(f_delta(0.6, 0.5, 1e-4) - 0.3) < 1e-3
    sup = [np.max(np.abs(f_delta(np.linspace(0, 1, 101), 0.5, d) - 0.5 * np.linspace(0, 1, 101)))
           for d in (1.0, 0.1, 0.01)]
    assert sup[0] > sup[1] > sup[2]


def test_f_delta_inverse():
    z = np.linspace(0, 0.4, 50)
    assert np.allclose(f_delta(f_delta_inv(z, 0.5, 0.3), 0.5, 0.3), z, atol=1e-12)
    with pytest.raises(DomainError):
        f_delta_inv(0.9, 0.5, 0.3)


def test_step_map_forward_phase():
    lam, delta = 0.5, 0.01
    z = -10.0
    zn = notched_step_map(z, lam, delta)
    shifted = z + step_length(lam, delta)
    n = math.floor(shifted)
    assert zn == pytest.approx(n + float(f_delta_inv(shifted - n, lam, delta)))
    with pytest.raises(DomainError):
        notched_step_map(z, 1.5, delta)


def test_notched_trace_invariants():
    lam, delta = 0.5, 0.01
    L = step_length(lam, delta)
    for z0 in np.linspace(-L + 1e-3, -1e-3, 37):
        t = notched_trace(NotchedDynamics(float(z0), lam, delta))
        assert t.m == len(t.z)
        assert all(z > 0 for z in t.z[:-1]) and t.z[-1] < 0
        assert all(0 < w < 1 for w in t.zeta)
        assert 1 <= t.k_delta < t.m
        assert notched_run(NotchedDynamics(float(z0), lam, delta)) == (t.m, t.k_delta)


def test_notched_dynamics_validation():
    with pytest.raises(DomainError):
        NotchedDynamics(0.5, 0.5, 0.01)
    with pytest.raises(DomainError):
        NotchedDynamics(-1.0, 0.0, 0.01)
    nd = NotchedDynamics(-3.0, 0.5, 0.01)
    assert nd.x0_tilde == pytest.approx(math.exp(0.03))
    with pytest.raises(CapExceeded):
        notched_run(NotchedDynamics(-3.0, 0.5, 0.01, max_steps=1))


def test_geometric_pmf():
    assert geometric_pmf(0.5, 1) == 0.5
    assert geometric_pmf(0.5, 3) == 0.125
    assert sum(geometric_pmf(0.5, k) for k in range(1, 21)) == pytest.approx(1 - 2**-20, abs=1e-15)
    for lam in np.arange(1, 10) / 10:
        acc = 0.0
        for k in range(1, 51):
            acc += geometric_pmf(lam, k)
            assert abs((1 - acc) - lam**k) < 1e-14
    with pytest.raises(DomainError):
        geometric_pmf(0.5, 0)
    with pytest.raises(DomainError):
        geometric_pmf(1.0, 2)


def test_k_delta_tv_small():
    s = k_delta_samples(0.5, 1e-2, 20000, 0)
    assert s.min() >= 1
    assert k_delta_tv(s, 0.5) < 0.05
    exact = np.repeat(np.arange(1, 4), [4, 2, 1])
    # law 4/7, 2/7, 1/7 against 1/2, 1/4, 1/8 plus tail 1/8
    expect = 0.5 * (abs(4 / 7 - 0.5) + abs(2 / 7 - 0.25) + abs(1 / 7 - 0.125) + 0.125)
    assert k_delta_tv(exact, 0.5) == pytest.approx(expect)


def test_lambda_change_of_variables():
    assert incidence_to_lambda(0.0, -(math.pi / 4 + math.atan(0.3)))[0] == pytest.approx(0.3)
    for bad in (math.pi / 4, -math.pi / 4, 0.1):
        with pytest.raises(DomainError):
            incidence_to_lambda(0.5, bad)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10**4):
        xi = rng.random()
        phi = rng.choice([-1, 1]) * rng.uniform(math.pi / 4 + 1e-3, math.pi / 2 - 1e-3)
        lam, x0 = incidence_to_lambda(xi, phi)
        if x0 > 1 / lam:  # beyond the reachable part of the opening
            continue
        xi2, phi2 = lambda_to_incidence(lam, x0, 1 if phi > 0 else -1)
        worst = max(worst, abs(xi2 - xi), abs(phi2 - phi))
    assert worst < 1e-12


def test_lambda_density_is_jacobian():
    # density of cos(phi)/2 dxi dphi pulled back to (lam, x0) by finite differences
    for lam, x0 in ((0.3, 1.5), (0.7, 1.2), (0.5, 1.9)):
        h = 1e-6
        def f(l, x):
            return np.array(lambda_to_incidence(l, x, -1))
        J = np.column_stack([(f(lam + h, x0) - f(lam - h, x0)) / (2 * h),
                             (f(lam, x0 + h) - f(lam, x0 - h)) / (2 * h)])
        phi = lambda_to_incidence(lam, x0)[1]
        assert 0.5 * math.cos(phi) * abs(np.linalg.det(J)) == pytest.approx(lambda_density(lam), rel=1e-7)


def test_compare_notched_small():
    rep = compare_notched(1e-2, 0.5, 1000, 0)
    assert rep.compared > 500
    assert rep.agreement >= 0.99
