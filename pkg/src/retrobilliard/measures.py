"""Incidence sampling, empirical scattering measures and their functionals.

A scattering measure lives on the square (-pi/2, pi/2)^2 of (phi, phi_plus)
pairs.  Random numbers come from Philox streams keyed by (seed, block), with
a fixed block size, so results do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _kernels as K
from ._io import write_csv, write_json
from .dynamics import IncidenceState, TraceLimits, trace_arrays
from .errors import DomainError, EmptyMeasure, RunFlagged
from .hollows import HollowGeometry

BLOCK = 1 << 15
SAMPLE_CAP = 10**6
HIST_BINS = 181
FLAG_FRACTION = 1e-3
HALF_PI = 0.5 * math.pi
# stream ids outside the range used by sample blocks
_MIX_STREAM = (1 << 32) - 2
_SUBSAMPLE_STREAM = (1 << 32) - 1


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def incidence_angle(u):
    """Inverse CDF of the density cos(phi)/2 on (-pi/2, pi/2)."""
    return np.arcsin(2.0 * np.asarray(u) - 1.0)


def _block_incidence(seed: int, block: int, n: int):
    rng = _rng(seed, block)
    xi = rng.random(n)
    u = rng.random(n)
    # u == 0 gives phi = -pi/2, a null event; redraw from the same stream
    bad = u == 0.0
    while bad.any():
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return xi, incidence_angle(u)


def _blocks(N: int):
    return [(b, min(BLOCK, N - b * BLOCK)) for b in range((N + BLOCK - 1) // BLOCK)]


def sample_incidence_arrays(seed: int, N: int):
    """Arrays (xi, phi) of N incidences drawn from cos(phi)/2 dxi dphi."""
    if N < 1:
        raise DomainError("N must be positive")
    parts = [_block_incidence(seed, b, n) for b, n in _blocks(N)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_incidence(seed: int, N: int) -> list[IncidenceState]:
    xi, phi = sample_incidence_arrays(seed, N)
    return [IncidenceState(float(a), float(b)) for a, b in zip(xi, phi)]


def default_threads() -> int:
    env = os.environ.get("RETRO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# measures


TEST_NAMES = ("one", "cos_diff", "sin_diff", "cos_sum", "sin_sum", "cos2_diff", "cos2_sum", "prod")

_E_PHI2 = math.pi**2 / 4 - 2.0


def _moments(phi, phi_plus):
    d = phi - phi_plus
    s = phi + phi_plus
    return np.array([
        1.0,
        np.mean(np.cos(d)),
        np.mean(np.sin(d)),
        np.mean(np.cos(s)),
        np.mean(np.sin(s)),
        np.mean(np.cos(2 * d)),
        np.mean(np.cos(2 * s)),
        np.mean(phi * phi_plus),
    ])


@dataclass
class ScatterMeasure:
    """Empirical measure: equally weighted (phi, phi_plus) pairs of good trajectories.

    ``n_total`` counts all traced particles, ``n_pathological`` those excluded
    (corner hits, tangencies, reflection cap, escapes).  If more than
    SAMPLE_CAP pairs were produced a seeded subsample is retained, while the
    scalar summaries in ``stats`` still cover every good sample.
    """

    phi: np.ndarray
    phi_plus: np.ndarray
    n_total: int
    n_pathological: int
    n_reflections: Optional[np.ndarray] = None
    label: str = ""
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None
    pathology: dict = field(default_factory=dict)
    n_watched: int = 0
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.phi_plus = np.asarray(self.phi_plus, dtype=float)
        if self.phi.shape != self.phi_plus.shape:
            raise DomainError("phi and phi_plus differ in length")
        if self.phi.size and (np.abs(self.phi).max() > HALF_PI or np.abs(self.phi_plus).max() > HALF_PI):
            raise DomainError("samples outside the square")

    def __len__(self):
        return self.phi.size

    @property
    def n_ok(self) -> int:
        return self.n_total - self.n_pathological

    @property
    def pathological_fraction(self) -> float:
        return self.n_pathological / self.n_total if self.n_total else 0.0

    @property
    def mean_reflections(self) -> float:
        if "mean_refl" in self.stats:
            return self.stats["mean_refl"]
        if self.n_reflections is None or not self.n_reflections.size:
            return math.nan
        return float(np.mean(self.n_reflections))

    def histogram(self, bins: int = HIST_BINS) -> np.ndarray:
        edges = np.linspace(-HALF_PI, HALF_PI, bins + 1)
        h, _, _ = np.histogram2d(self.phi, self.phi_plus, bins=[edges, edges])
        return h.astype(np.int64)

    def moments(self) -> np.ndarray:
        _nonempty(self)
        return _moments(self.phi, self.phi_plus)

    def to_csv(self, path, config) -> None:
        write_csv(path, ("phi", "phi_plus"), zip(self.phi.tolist(), self.phi_plus.tolist()), config)

    def summary(self, tol: float = 1e-6) -> dict:
        return {
            "shape": self.label,
            "params": self.params,
            "N": self.n_total,
            "seed": self.seed,
            "F": functional_F(self),
            "retro_fraction": retro_fraction(self, tol),
            "elastic_fraction": elastic_fraction(self, tol),
            "n_pathological": self.n_pathological,
            "pathology": self.pathology,
            "mean_reflections": self.mean_reflections,
            "test_moments": dict(zip(TEST_NAMES, test_moments(self).tolist())),
        }

    def to_json(self, path, config, tol: float = 1e-6, timestamp: bool = True) -> None:
        write_json(path, self.summary(tol), config, timestamp)


_REF_MOMENTS = {
    "retro": np.array([1.0, 1.0, 0.0, 1 / 3, 0.0, 1.0, -1 / 15, _E_PHI2]),
    "elastic": np.array([1.0, 1 / 3, 0.0, 1.0, 0.0, -1 / 15, 1.0, -_E_PHI2]),
}
_REF_MOMENTS["semi"] = 0.5 * (_REF_MOMENTS["retro"] + _REF_MOMENTS["elastic"])

_REF_F = {"retro": 1.0, "elastic": 2 / 3, "semi": 5 / 6}


@dataclass(frozen=True)
class ReferenceMeasure:
    """Analytic reference measures.

    ``retro``: phi_plus = phi; ``elastic``: phi_plus = -phi; ``semi``: the
    equal mixture of the two.  phi has density cos(phi)/2 in all cases.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in _REF_F:
            raise DomainError(f"unknown reference measure {self.kind!r}")

    def moments(self) -> np.ndarray:
        return _REF_MOMENTS[self.kind].copy()

    def F(self) -> float:
        return _REF_F[self.kind]

    def band(self, tol: float) -> float:
        # probability that 2|phi| <= tol
        return math.sin(min(tol / 2, HALF_PI))

    def sample(self, seed: int, N: int) -> ScatterMeasure:
        _, phi = sample_incidence_arrays(seed, N)
        if self.kind == "retro":
            sign = np.ones(N)
        elif self.kind == "elastic":
            sign = -np.ones(N)
        else:
            sign = np.where(_rng(seed, _MIX_STREAM).random(N) < 0.5, 1.0, -1.0)
        return ScatterMeasure(phi, sign * phi, N, 0, label=f"reference-{self.kind}", seed=seed)


ETA_RETRO = ReferenceMeasure("retro")
ETA_ELASTIC = ReferenceMeasure("elastic")
ETA_SEMI = ReferenceMeasure("semi")

Measure = Union[ScatterMeasure, ReferenceMeasure]


def _nonempty(eta: ScatterMeasure):
    if len(eta) == 0:
        raise EmptyMeasure("measure has no samples")


def functional_F(eta: Measure) -> float:
    """Mean of (1 + cos(phi - phi_plus)) / 2."""
    if isinstance(eta, ReferenceMeasure):
        return eta.F()
    if "F" in eta.stats:
        return eta.stats["F"]
    _nonempty(eta)
    return float(np.mean(0.5 * (1.0 + np.cos(eta.phi - eta.phi_plus))))


def _fraction(eta: Measure, tol: float, which: str) -> float:
    if not tol > 0:
        raise DomainError("tol must be positive")
    if isinstance(eta, ReferenceMeasure):
        if eta.kind == which:
            return 1.0
        b = eta.band(tol)
        return 0.5 * (1 + b) if eta.kind == "semi" else b
    _nonempty(eta)
    d = eta.phi_plus - eta.phi if which == "retro" else eta.phi_plus + eta.phi
    return float(np.count_nonzero(np.abs(d) <= tol)) / len(eta)


def retro_fraction(eta: Measure, tol: float = 1e-6) -> float:
    return _fraction(eta, tol, "retro")


def elastic_fraction(eta: Measure, tol: float = 1e-6) -> float:
    return _fraction(eta, tol, "elastic")


def test_moments(eta: Measure) -> np.ndarray:
    """Expectations of the fixed test family TEST_NAMES."""
    return eta.moments()


test_moments.__test__ = False  # keep pytest from collecting it when imported


def semi_retro_distance(eta: Measure) -> float:
    """Largest moment gap between ``eta`` and the retro/elastic mixture."""
    return float(np.max(np.abs(test_moments(eta) - _REF_MOMENTS["semi"])))


# ---------------------------------------------------------------------------
# estimation


def _trace_block(h, seed, lim, b, n):
    xi, phi = _block_incidence(seed, b, n)
    return phi, trace_arrays(h, xi, phi, lim)


def estimate_measure(h: HollowGeometry, N: int, seed: int, lim: TraceLimits = TraceLimits(),
                     threads: Optional[int] = None, flag: bool = True,
                     cap: int = SAMPLE_CAP) -> ScatterMeasure:
    """Trace N sampled incidences into ``h`` and collect the good (phi, phi_plus) pairs.

    Raises RunFlagged when more than FLAG_FRACTION of the particles were
    pathological and ``flag`` is set; the measure is attached as ``exc.measure``.
    """
    if N < 1:
        raise DomainError("N must be positive")
    threads = threads or default_threads()
    blocks = _blocks(N)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda bn: _trace_block(h, seed, lim, *bn), blocks))
    else:
        parts = [_trace_block(h, seed, lim, b, n) for b, n in blocks]

    phi = np.concatenate([p[0] for p in parts])
    status = np.concatenate([p[1].status for p in parts])
    phi_plus = np.concatenate([p[1].phi_plus for p in parts])
    refl = np.concatenate([p[1].n_reflections for p in parts])
    watched = np.concatenate([p[1].watched for p in parts])
    good = status == K.OK
    pathology = {K.STATUS_NAMES[s]: int(np.count_nonzero(status == s))
                 for s in np.unique(status) if s != K.OK}
    phi, phi_plus, refl = phi[good], phi_plus[good], refl[good]
    stats = {}
    if phi.size:
        stats = {"F": float(np.mean(0.5 * (1.0 + np.cos(phi - phi_plus)))),
                 "mean_refl": float(np.mean(refl))}
    if phi.size > cap:
        keep = np.sort(_rng(seed, _SUBSAMPLE_STREAM).choice(phi.size, cap, replace=False))
        phi, phi_plus, refl = phi[keep], phi_plus[keep], refl[keep]
    eta = ScatterMeasure(phi, phi_plus, N, int(N - good.sum()), refl, h.label, dict(h.params), seed,
                         pathology, int(np.count_nonzero(watched & good)), stats)
    if flag and eta.pathological_fraction > FLAG_FRACTION:
        exc = RunFlagged(f"{eta.n_pathological} of {N} trajectories pathological ({pathology})",
                         eta.pathological_fraction)
        exc.measure = eta
        raise exc
    return eta
