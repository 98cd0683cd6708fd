"""Parameter schedules and convergence sweeps over families of hollows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ._io import write_csv
from .dynamics import TraceLimits
from .errors import ConfigError, RunFlagged
from .hollows import (
    HollowGeometry,
    make_double_parabola,
    make_mushroom,
    make_notched_angle,
    make_rectangle,
    make_reduced_notched_angle,
    make_triangle,
    make_tube,
)
from .measures import elastic_fraction, estimate_measure, functional_F, retro_fraction

BUILDERS = {
    "rectangle": make_rectangle,
    "triangle": make_triangle,
    "mushroom": make_mushroom,
    "tube": make_tube,
    "double_parabola": make_double_parabola,
    "notched_angle": make_notched_angle,
    "reduced_notched_angle": make_reduced_notched_angle,
}


def build_hollow(shape: str, params: dict) -> HollowGeometry:
    try:
        builder = BUILDERS[shape]
    except KeyError:
        raise ConfigError(f"unknown shape {shape!r}; choose from {sorted(BUILDERS)}") from None
    try:
        return builder(**params)
    except TypeError as e:
        raise ConfigError(f"bad parameters for {shape}: {e}") from None


def tube_schedule(eps: float) -> dict:
    """Notch depth eps^2 and tube length 4/eps."""
    return {"eps": eps, "delta": eps * eps, "a": 4.0 / eps}


def notched_schedule(alpha: float) -> dict:
    """Gap angle and truncation both alpha^2."""
    return {"alpha": alpha, "beta": alpha * alpha, "delta_cut": alpha * alpha}


DRIVERS = {"rectangle": "eps", "triangle": "eps", "mushroom": "eps", "tube": "eps",
           "notched_angle": "alpha", "reduced_notched_angle": "delta"}


@dataclass(frozen=True)
class SweepSpec:
    shape: str
    grid: tuple  # of parameter dicts
    N: int
    seed: int
    out: Optional[str] = None
    tol: float = 1e-6
    lim: TraceLimits = field(default_factory=TraceLimits)

    def __post_init__(self):
        if not self.grid:
            raise ConfigError("sweep grid is empty")
        if self.N < 1:
            raise ConfigError("N must be positive")
        key = DRIVERS.get(self.shape)
        if key and all(key in p for p in self.grid):
            vals = [p[key] for p in self.grid]
            inc = all(a < b for a, b in zip(vals, vals[1:]))
            dec = all(a > b for a, b in zip(vals, vals[1:]))
            if not (inc or dec):
                raise ConfigError(f"grid must be monotone in {key}")

    @classmethod
    def default(cls, shape: str, values, N: int, seed: int, **kw) -> "SweepSpec":
        if shape == "tube":
            grid = tuple(tube_schedule(e) for e in values)
        elif shape == "notched_angle":
            grid = tuple(notched_schedule(a) for a in values)
        elif shape in DRIVERS:
            grid = tuple({DRIVERS[shape]: v} for v in values)
        else:
            raise ConfigError(f"no one-parameter schedule for {shape!r}")
        return cls(shape, grid, N, seed, **kw)


@dataclass
class ConvergenceTable:
    shape: str
    rows: list

    def column(self, name):
        return [r[name] for r in self.rows]

    def param_names(self):
        names = []
        for r in self.rows:
            for k in r["params"]:
                if k not in names:
                    names.append(k)
        return names

    def to_csv(self, path, config) -> None:
        pnames = self.param_names()
        header = ["shape", *pnames, "N", "seed", "F", "retro_frac", "elastic_frac", "mean_refl",
                  "n_path", "flagged"]
        rows = ([self.shape, *(r["params"].get(k, "") for k in pnames), r["N"], r["seed"], r["F"],
                 r["retro_frac"], r["elastic_frac"], r["mean_refl"], r["n_path"], int(r["flagged"])]
                for r in self.rows)
        write_csv(path, header, rows, config)


def run_sweep(spec: SweepSpec, threads: Optional[int] = None) -> ConvergenceTable:
    """Estimate the measure at every grid point; flagged points are recorded, not fatal."""
    rows = []
    for params in spec.grid:
        h = build_hollow(spec.shape, dict(params))
        flagged = False
        try:
            eta = estimate_measure(h, spec.N, spec.seed, spec.lim, threads)
        except RunFlagged as e:
            eta, flagged = e.measure, True
        rows.append({
            "params": dict(params),
            "N": spec.N,
            "seed": spec.seed,
            "F": functional_F(eta),
            "retro_frac": retro_fraction(eta, spec.tol),
            "elastic_frac": elastic_fraction(eta, spec.tol),
            "mean_refl": eta.mean_reflections,
            "n_path": eta.n_pathological,
            "flagged": flagged,
        })
    table = ConvergenceTable(spec.shape, rows)
    if spec.out:
        table.to_csv(spec.out, {"shape": spec.shape, "grid": list(spec.grid), "N": spec.N,
                                "seed": spec.seed, "tol": spec.tol})
    return table
