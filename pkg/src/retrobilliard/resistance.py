"""Resistance functionals per unit opening and for bodies made of hollows.

Hollow-level numbers use the diffuse resistance of the opening as unit, so a
retroreflecting hollow has R = 2 and a flat wall has R = 4/3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dynamics import TraceLimits, trace_arrays
from .errors import DomainError, RunFlagged, WeightError
from .hollows import BodyDecomposition, HollowGeometry
from .measures import FLAG_FRACTION, Measure, _rng, functional_F, sample_incidence_arrays

# Smallest normalized resistance of a planar body (known from the literature,
# quoted only for reference; nothing here recomputes it).
INF_R_2D = 0.6585

_TOL = 1e-12


@dataclass(frozen=True)
class ResistanceReport:
    R: float
    D: float
    r: float
    dim: int = 2

    def __post_init__(self):
        if not self.D > 0:
            raise DomainError("diffuse resistance must be positive")
        if not (-_TOL <= self.r <= 1 + _TOL):
            raise DomainError(f"normalized resistance {self.r} outside [0, 1]")
        if self.R > 2 * self.D * (1 + _TOL):
            raise DomainError("elastic resistance exceeds twice the diffuse one")
        if abs(self.r - self.R / (2 * self.D)) > 1e-9 * max(1.0, abs(self.r)):
            raise DomainError("r is not R / 2D")

    @classmethod
    def from_measure(cls, eta: Measure, perimeter: float = 1.0) -> "ResistanceReport":
        F = functional_F(eta)
        return cls(2 * F * perimeter, perimeter, F)


def R_from_scatter(eta: Measure) -> float:
    """Elastic resistance per unit opening: the mean of 1 + cos(phi - phi_plus)."""
    return 2.0 * functional_F(eta)


def r_of_body(decomp: BodyDecomposition | float, F_values: Sequence[float] = (),
              weights: Sequence[float] | None = None) -> float:
    """Normalized resistance 2/3 c0 + sum c_i F_i.

    Pass a BodyDecomposition (its hollow weights pair with ``F_values``) or
    a bare c0 with explicit ``weights``.
    """
    if isinstance(decomp, BodyDecomposition):
        c0 = decomp.c0
        cs = [c for c, _ in decomp.parts]
    else:
        c0 = float(decomp)
        cs = list(weights or ())
        if c0 < 0 or any(c < 0 for c in cs) or abs(c0 + sum(cs) - 1.0) > 1e-12:
            raise WeightError(f"weights c0={c0}, c={cs} do not form a partition of one")
    if len(cs) != len(F_values):
        raise WeightError("one F value per hollow is required")
    if any(not (0.0 <= F <= 1.0) for F in F_values):
        raise DomainError("F values must lie in [0, 1]")
    return 2.0 / 3.0 * c0 + sum(c * F for c, F in zip(cs, F_values))


def _dim(d) -> int:
    if int(d) != d or d < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {d}")
    return int(d)


def convex_r(d: int) -> Fraction:
    return Fraction(2, _dim(d) + 1)


def convex_RD_ratio(d: int) -> Fraction:
    return Fraction(4, _dim(d) + 1)


def maxwellian_resistance(R: float, D: float, alpha_acc: float) -> float:
    """Resistance when a fraction alpha_acc of particles reflects diffusely."""
    if not (0.0 <= alpha_acc <= 1.0):
        raise DomainError(f"accommodation {alpha_acc} outside [0, 1]")
    return alpha_acc * D + (1.0 - alpha_acc) * R


def convex_r_monte_carlo(N: int, seed: int) -> float:
    """r of a convex planar body estimated from sampled incidences: E[cos^2 phi]."""
    _, phi = sample_incidence_arrays(seed, N)
    return float(np.mean(np.cos(phi) ** 2))


def directional_resistance(h: HollowGeometry, phi: float, N: int, seed: int,
                           lim: TraceLimits = TraceLimits()) -> np.ndarray:
    """Integral of v - v_plus over the opening for a parallel flow at angle phi.

    Components are (along A->B, into the hollow), scaled by the opening length.
    """
    if not abs(phi) < math.pi / 2:
        raise DomainError(f"flow angle {phi} outside (-pi/2, pi/2)")
    xi = _rng(seed, 0).random(N)
    tr = trace_arrays(h, xi, np.full(N, float(phi)), lim)
    good = tr.status == 0
    bad = N - int(good.sum())
    if bad > FLAG_FRACTION * N:
        raise RunFlagged(f"{bad} of {N} trajectories pathological", bad / N)
    n = h.opening_normal
    v = (-n).rotate(phi)
    dv = np.array([v.x, v.y]) - tr.v_plus[good]
    mean = dv.mean(axis=0)
    t = np.subtract(h.B, h.A) / h.opening_length
    inward = -np.array([n.x, n.y])
    return h.opening_length * np.array([mean @ t, mean @ inward])
