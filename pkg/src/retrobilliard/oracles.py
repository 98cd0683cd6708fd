"""Analytic and symbolic models that predict what the tracer should do.

* rectangle: parity of the unfolded lateral travel decides retro vs mirror exit;
* triangle: unfolding the wedge around its apex gives the reflection count;
* rotation problem: gap statistics of an irrational circle rotation;
* notched angle: the one-dimensional log-coordinate dynamics of a staircase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .dynamics import TraceLimits, trace_arrays
from .errors import CapExceeded, Degenerate, DomainError
from .hollows import HollowGeometry, make_rectangle, make_reduced_notched_angle, make_triangle
from .measures import _rng, sample_incidence_arrays

DEGENERATE_BAND = 1e-9
# traced exits closer than this to +-phi count as exact retro/mirror exits
SIGN_TOL = 1e-7


def _near_integer(s: float) -> bool:
    return abs(s - round(s)) <= DEGENERATE_BAND * max(1.0, abs(s))


# -- rectangle -----------------------------------------------------------


def rect_parity(xi: float, phi: float, eps: float) -> int:
    """+1 if the rectangle of width 1 and depth 1/eps returns (xi, phi) retro, -1 if mirrored.

    The lateral coordinate is measured from the wall the particle moves
    toward, so the formula is applied to xi for phi < 0 and to 1 - xi for
    phi > 0.
    """
    if not (0.0 < xi < 1.0):
        raise DomainError(f"xi={xi} outside (0, 1)")
    if not (0.0 < abs(phi) < math.pi / 2):
        raise DomainError(f"phi={phi} must satisfy 0 < |phi| < pi/2")
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps={eps} outside (0, 1)")
    lateral = xi if phi < 0 else 1.0 - xi
    s = lateral + (2.0 / eps) * math.tan(abs(phi))
    if _near_integer(s):
        raise Degenerate(f"parity boundary at {s!r}")
    return 1 if math.floor(s) % 2 == 1 else -1


# -- triangle ------------------------------------------------------------


class Unfolding(NamedTuple):
    n: int
    sign: int
    x_plus: float


def tri_unfold(x: float, phi_c: float, eps: float) -> Unfolding:
    """Reflection count, exit parity and exit arc coordinate in the unfolded wedge.

    ``x`` is the arc coordinate where the line of motion crosses the circle
    about the apex through A and B, measured from the side the contact point
    moves away from; ``phi_c`` is the angle between the inward radius and the
    velocity there.
    """
    if not (0.0 < eps < math.pi):
        raise DomainError(f"eps={eps} out of range")
    if not (0.0 <= x <= eps):
        raise DomainError(f"x={x} outside [0, eps]")
    if not abs(phi_c) < math.pi / 2:
        raise DomainError(f"phi_c={phi_c} outside (-pi/2, pi/2)")
    x_plus = x + math.pi - 2.0 * phi_c
    s = x_plus / eps
    if _near_integer(s):
        raise Degenerate(f"parity boundary at {s!r}")
    n = math.floor(s)
    return Unfolding(n, 1 if n % 2 == 1 else -1, x_plus)


def triangle_circle_coords(eps: float, xi: float, phi: float):
    """Map an incidence into make_triangle(eps) to the unfolding coordinates (x, phi_c)."""
    h = 0.5 / math.tan(eps / 2)
    radius = 0.5 / math.sin(eps / 2)
    vx, vy = -math.sin(phi), math.cos(phi)
    wx, wy = xi - 0.5, -h  # entry point relative to the apex
    wv = wx * vx + wy * vy
    s = wv + math.sqrt(wv * wv - (wx * wx + wy * wy) + radius * radius)
    qx, qy = wx - s * vx, wy - s * vy
    x = math.atan2(-h, 0.5) - math.atan2(qy, qx)
    # inward radius at Q is -Q (apex minus Q)
    phi_c = math.atan2(-qx * vy + qy * vx, -qx * vx - qy * vy)
    return x, phi_c


def triangle_bound_ok(phi: float, phi_c: float, eps: float) -> bool:
    return abs(phi - phi_c) <= eps / 2 + 1e-12


def unfold_triangle_incidence(eps: float, xi: float, phi: float) -> Unfolding:
    """tri_unfold for an incidence into make_triangle(eps).

    The unfolding counts wedge sides crossed while the contact angle sweeps
    pi - 2|phi_c|, so x is taken from the side behind the angular motion:
    from B when phi_c > 0 and from A otherwise.
    """
    x, pc = triangle_circle_coords(eps, xi, phi)
    x = min(max(x, 0.0), eps)
    if pc <= 0:
        x = eps - x
    return tri_unfold(x, abs(pc), eps)


# -- circle rotation -------------------------------------------------------


@dataclass(frozen=True)
class RotationProblem:
    xi0: float
    alpha: float
    eps: float
    max_iter: int = 10**7

    def __post_init__(self):
        if not (0.0 < self.eps < 0.5):
            raise DomainError("eps must lie in (0, 1/2)")
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie in (0, 1)")
        if not (0.0 <= self.xi0 < 1.0):
            raise DomainError("xi0 must lie in [0, 1)")


@numba.njit(cache=True, nogil=True)
def _rotation_l(xi0, alpha, eps, max_iter):
    last = 0
    j = 0
    acc = 0  # alternating gap sum, exact in integers
    for n in range(1, max_iter + 1):
        x = (xi0 + alpha * n) % 1.0
        if x <= eps or x >= 1.0 - eps:
            gap = n - last
            last = n
            j += 1
            if j % 2 == 1:
                acc += gap
            else:
                acc -= gap
                if acc <= 0:
                    return j // 2
    return -1


@numba.njit(cache=True, nogil=True)
def _rotation_l_batch(xi0, alpha, eps, max_iter, out):
    for i in range(xi0.shape[0]):
        out[i] = _rotation_l(xi0[i], alpha[i], eps, max_iter)


def rotation_gaps(prob: RotationProblem, count: int) -> list:
    """First ``count`` gaps between successive visits to the window [-eps, eps] mod 1."""
    gaps, last = [], 0
    for n in range(1, prob.max_iter + 1):
        x = (prob.xi0 + prob.alpha * n) % 1.0
        if x <= prob.eps or x >= 1.0 - prob.eps:
            gaps.append(n - last)
            last = n
            if len(gaps) == count:
                return gaps
    raise CapExceeded(f"fewer than {count} visits in {prob.max_iter} steps")


def rotation_l(prob: RotationProblem) -> int:
    """Smallest l with n1 - n2 + ... + n_{2l-1} - n_{2l} <= 0."""
    l = _rotation_l(prob.xi0, prob.alpha, prob.eps, prob.max_iter)
    if l < 0:
        raise CapExceeded(f"no stopping index within {prob.max_iter} steps")
    return int(l)


class RotationLaw(NamedTuple):
    p_hat: np.ndarray  # p_hat[k-1] = empirical P(l = k)
    n_samples: int
    n_capped: int


def rotation_law(eps: float, N: int, seed: int, max_iter: int = 10**7) -> RotationLaw:
    """Empirical distribution of l over uniform random (xi0, alpha)."""
    rng = _rng(seed, 0)
    xi0 = rng.random(N)
    alpha = rng.random(N)
    alpha[alpha == 0.0] = 0.5
    out = np.empty(N, dtype=np.int64)
    _rotation_l_batch(xi0, alpha, eps, max_iter, out)
    good = out[out > 0]
    counts = np.bincount(good)[1:] if good.size else np.zeros(0)
    return RotationLaw(counts / max(good.size, 1), N, int(N - good.size))


# -- notched angle ----------------------------------------------------------


def zeta(z, delta: float):
    """Map a cell coordinate z in [0, 1] to the linear coordinate of its step."""
    return np.expm1(-delta * np.asarray(z)) / math.expm1(-delta)


def zeta_inv(w, delta: float):
    return -np.log1p(np.asarray(w) * math.expm1(-delta)) / delta


def f_delta(z, lam: float, delta: float):
    return zeta_inv(lam * zeta(z, delta), delta)


def f_delta_inv(z, lam: float, delta: float):
    w = zeta(z, delta) / lam
    if np.any(w > 1.0):
        raise DomainError("f_delta_inv undefined where zeta(z) > lam")
    return zeta_inv(w, delta)


def step_length(lam: float, delta: float) -> float:
    """Cell shift per step, (1/delta) ln(1/lam)."""
    return math.log(1.0 / lam) / delta


def _check_lam_delta(lam, delta):
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lam={lam} outside (0, 1)")
    if not delta > 0:
        raise DomainError(f"delta={delta} must be positive")


def notched_step_map(z_tilde: float, lam: float, delta: float) -> float:
    """One forward step: shift by the cell step and pull back through f_delta."""
    _check_lam_delta(lam, delta)
    z = z_tilde + step_length(lam, delta)
    n = math.floor(z)
    return n + float(f_delta_inv(z - n, lam, delta))


@dataclass(frozen=True)
class NotchedDynamics:
    z0_tilde: float
    lam: float
    delta: float
    max_steps: int = 10**6

    def __post_init__(self):
        _check_lam_delta(self.lam, self.delta)
        if not (-step_length(self.lam, self.delta) < self.z0_tilde < 0.0):
            raise DomainError("z0_tilde must lie in (-(1/delta) ln(1/lam), 0)")

    @property
    def x0_tilde(self) -> float:
        return math.exp(-self.delta * self.z0_tilde)


class NotchedRun(NamedTuple):
    m: int
    k_delta: int


class NotchedTrace(NamedTuple):
    m: int
    k_delta: int
    z: list
    z_tilde: list
    zeta: list
    n: list
    degenerate: bool


def _notched(z0, lam, delta, max_steps, record):
    L = step_length(lam, delta)
    em = math.expm1(-delta)
    zs, zts, zetas, ns = [], [], [], []
    zt = z0
    k = 0
    k_delta = 0
    degenerate = False
    while True:
        k += 1
        if k > max_steps:
            raise CapExceeded(f"no exit within {max_steps} steps")
        z = zt + L if k_delta == 0 else zt - L
        if k_delta and z < 0.0:
            if record:
                zs.append(z)
            return k, k_delta, zs, zts, zetas, ns, degenerate
        n = math.floor(z)
        w = math.expm1(-delta * (z - n)) / em
        if abs(w - lam) <= DEGENERATE_BAND or w <= DEGENERATE_BAND or w >= 1 - DEGENERATE_BAND:
            degenerate = True
        if k_delta == 0 and w < lam:
            wt = w / lam
        elif k_delta == 0:
            k_delta = k
            wt = 1.0 + lam - w
        else:
            wt = lam * w
        zt = n - math.log1p(wt * em) / delta
        if record:
            zs.append(z)
            zts.append(zt)
            zetas.append(w)
            ns.append(n)


def notched_run(nd: NotchedDynamics) -> NotchedRun:
    """Exit time m and transition time k_delta; m even means a retro exit."""
    m, kd, *_ = _notched(nd.z0_tilde, nd.lam, nd.delta, nd.max_steps, False)
    return NotchedRun(m, kd)


def notched_trace(nd: NotchedDynamics) -> NotchedTrace:
    m, kd, z, zt, w, n, deg = _notched(nd.z0_tilde, nd.lam, nd.delta, nd.max_steps, True)
    return NotchedTrace(m, kd, z, zt, w, n, deg)


def geometric_pmf(lam: float, k: int) -> float:
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lam={lam} outside (0, 1)")
    if int(k) != k or k < 1:
        raise DomainError(f"k={k} must be a positive integer")
    return lam ** (k - 1) * (1.0 - lam)


def k_delta_samples(lam: float, delta: float, N: int, seed: int) -> np.ndarray:
    """Transition times for starting points uniform on the unit cell (-1, 0)."""
    _check_lam_delta(lam, delta)
    z0 = -_rng(seed, 0).random(N)
    z0[z0 == 0.0] = -0.5
    L = step_length(lam, delta)
    out = np.empty(N, dtype=np.int64)
    for i, z in enumerate(z0):
        out[i] = _notched(float(z), lam, delta, 10**6, False)[1] if -L < z else 0
    return out


def k_delta_tv(samples: np.ndarray, lam: float) -> float:
    """Total variation distance between the empirical k law and the geometric law."""
    kmax = int(samples.max())
    emp = np.bincount(samples, minlength=kmax + 1)[1:] / samples.size
    ks = np.arange(1, kmax + 1)
    geo = lam ** (ks - 1) * (1 - lam)
    return 0.5 * (np.abs(emp - geo).sum() + lam**kmax)


def incidence_to_lambda(xi: float, phi: float):
    """(xi, phi) on the reduced right-angle opening to (lam, x0_tilde).

    Valid for steep incidences pi/4 < |phi| < pi/2.  For phi < 0 the particle
    drifts away from A and xi is measured from A; phi > 0 is the mirror image.
    """
    a = abs(phi)
    if not (math.pi / 4 < a < math.pi / 2):
        raise DomainError(f"|phi|={a} outside (pi/4, pi/2)")
    if not (0.0 <= xi <= 1.0):
        raise DomainError(f"xi={xi} outside [0, 1]")
    lam = math.tan(a - math.pi / 4)
    s = xi if phi < 0 else 1.0 - xi
    return lam, 1.0 + s * (1.0 - lam) / lam


def lambda_to_incidence(lam: float, x0_tilde: float, side: int = -1):
    """Inverse of incidence_to_lambda; ``side`` is the sign of phi."""
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lam={lam} outside (0, 1)")
    if not (1.0 <= x0_tilde <= 1.0 / lam):
        raise DomainError("x0_tilde outside [1, 1/lam]")
    s = lam / (1.0 - lam) * (x0_tilde - 1.0)
    phi = math.pi / 4 + math.atan(lam)
    return (s, -phi) if side < 0 else (1.0 - s, phi)


def lambda_density(lam: float) -> float:
    """Density of the incidence measure in (lam, x0_tilde) coordinates."""
    return lam / (2.0 * math.sqrt(2.0) * (1.0 + lam * lam) ** 1.5)


# -- comparison runs -------------------------------------------------------------


@dataclass
class OracleReport:
    shape: str
    N: int
    agree: int = 0
    disagree: int = 0
    degenerate: int = 0
    excluded: int = 0
    count_agree: int = 0

    @property
    def compared(self) -> int:
        return self.agree + self.disagree

    @property
    def agreement(self) -> float:
        return self.agree / self.compared if self.compared else math.nan

    def as_dict(self) -> dict:
        return {"shape": self.shape, "N": self.N, "agree": self.agree, "disagree": self.disagree,
                "degenerate": self.degenerate, "excluded": self.excluded,
                "count_agree": self.count_agree}


def traced_sign(phi, phi_plus, tol: float = SIGN_TOL):
    """+1 for a retro exit, -1 for a mirror exit, 0 for anything else."""
    phi = np.asarray(phi)
    phi_plus = np.asarray(phi_plus)
    return np.where(np.abs(phi_plus - phi) <= tol, 1, np.where(np.abs(phi_plus + phi) <= tol, -1, 0))


def compare_rectangle(eps: float, N: int, seed: int, lim: TraceLimits = TraceLimits()) -> OracleReport:
    h = make_rectangle(eps)
    xi, phi = sample_incidence_arrays(seed, N)
    tr = trace_arrays(h, xi, phi, lim)
    rep = OracleReport("rectangle", N)
    signs = traced_sign(phi, tr.phi_plus)
    for i in range(N):
        try:
            o = rect_parity(float(xi[i]), float(phi[i]), eps)
        except (Degenerate, DomainError):
            rep.degenerate += 1
            continue
        if tr.status[i] != 0:
            rep.excluded += 1
        elif o == signs[i]:
            rep.agree += 1
        else:
            rep.disagree += 1
    return rep


def compare_triangle(eps: float, N: int, seed: int, lim: TraceLimits = TraceLimits()) -> OracleReport:
    """Compare wedge unfolding against traces.

    The triangle only returns particles approximately, so a trace agrees when
    its exit angle lies within eps of the branch (phi or -phi) the parity
    predicts.  Exact reflection-count matches go to ``count_agree``.
    """
    h = make_triangle(eps)
    xi, phi = sample_incidence_arrays(seed, N)
    tr = trace_arrays(h, xi, phi, lim)
    rep = OracleReport("triangle", N)
    for i in range(N):
        try:
            u = unfold_triangle_incidence(eps, float(xi[i]), float(phi[i]))
        except (Degenerate, DomainError):
            rep.degenerate += 1
            continue
        if tr.status[i] != 0:
            rep.excluded += 1
            continue
        if abs(tr.phi_plus[i] - u.sign * phi[i]) <= eps:
            rep.agree += 1
        else:
            rep.disagree += 1
        if u.n == tr.n_reflections[i]:
            rep.count_agree += 1
    return rep


def compare_notched(delta: float, lam: float, N: int, seed: int, delta_cut: float = 1e-3,
                    lim: TraceLimits = TraceLimits(), hollow: HollowGeometry | None = None) -> OracleReport:
    """Exit parity of the log-coordinate dynamics against the reduced staircase trace.

    Starting points are uniform in z0_tilde on (-(1/delta) ln(1/lam), 0).
    Traces that touch the truncation cap or fail are excluded.
    """
    _check_lam_delta(lam, delta)
    h = hollow or make_reduced_notched_angle(delta, delta_cut)
    L = step_length(lam, delta)
    z0 = -L * _rng(seed, 0).random(N)
    rep = OracleReport("notched_angle", N)
    xi = np.empty(N)
    phi = np.empty(N)
    for i, z in enumerate(z0):
        xi[i], phi[i] = lambda_to_incidence(lam, min(math.exp(-delta * z), 1.0 / lam))
    tr = trace_arrays(h, xi, phi, lim)
    signs = traced_sign(phi, tr.phi_plus)
    for i in range(N):
        if not (-L < z0[i] < 0.0):
            rep.excluded += 1
            continue
        m, _, _, _, _, _, deg = _notched(float(z0[i]), lam, delta, 10**6, False)
        if deg:
            rep.degenerate += 1
            continue
        if tr.status[i] != 0 or tr.watched[i]:
            rep.excluded += 1
            continue
        if (1 if m % 2 == 0 else -1) == signs[i]:
            rep.agree += 1
        else:
            rep.disagree += 1
    return rep
