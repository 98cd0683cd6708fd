import csv

import pytest

from retrobilliard.errors import ConfigError
from retrobilliard.hollows import HollowGeometry
from retrobilliard.schedules import (
    BUILDERS,
    SweepSpec,
    build_hollow,
    notched_schedule,
    run_sweep,
    tube_schedule,
)


def test_default_schedules():
    assert tube_schedule(0.1) == pytest.approx({"eps": 0.1, "delta": 0.01, "a": 40.0})
    s = notched_schedule(0.2)
    assert s == pytest.approx({"alpha": 0.2, "beta": 0.04, "delta_cut": 0.04})
    ratios = [notched_schedule(a)["beta"] / a for a in (0.4, 0.2, 0.1, 0.01)]
    assert ratios == sorted(ratios, reverse=True)


def test_schedules_build_valid_hollows():
    for eps in (0.2, 0.1, 0.05):
        assert isinstance(build_hollow("tube", tube_schedule(eps)), HollowGeometry)
    for a in (0.4, 0.2, 0.1):
        assert isinstance(build_hollow("notched_angle", notched_schedule(a)), HollowGeometry)


def test_build_hollow_errors():
    with pytest.raises(ConfigError):
        build_hollow("sphere", {})
    with pytest.raises(ConfigError):
        build_hollow("rectangle", {"width": 2})
    assert set(BUILDERS) >= {"rectangle", "triangle", "mushroom", "tube", "double_parabola", "notched_angle"}


def test_sweep_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec("mushroom", (), 10, 0)
    with pytest.raises(ConfigError):
        SweepSpec("mushroom", ({"eps": 0.1}, {"eps": 0.2}, {"eps": 0.05}), 10, 0)
    with pytest.raises(ConfigError):
        SweepSpec("mushroom", ({"eps": 0.1},), 0, 0)
    with pytest.raises(ConfigError):
        SweepSpec.default("double_parabola", [1.0], 10, 0)
    spec = SweepSpec.default("tube", [0.2, 0.1], 10, 0)
    assert spec.grid[1] == tube_schedule(0.1)


def test_mushroom_sweep_increases(tmp_path):
    spec = SweepSpec.default("mushroom", [0.2, 0.1, 0.05, 0.01], 10**4, 0, out=str(tmp_path / "s.csv"))
    table = run_sweep(spec)
    F = table.column("F")
    assert F == sorted(F) and F[-1] < 1
    with open(tmp_path / "s.csv") as f:
        first = f.readline()
        rows = list(csv.DictReader(f))
    assert first.startswith("# config=")
    assert list(rows[0]) == ["shape", "eps", "N", "seed", "F", "retro_frac", "elastic_frac",
                             "mean_refl", "n_path", "flagged"]
    assert [float(r["F"]) for r in rows] == F


def test_tube_sweep_retro_increases():
    table = run_sweep(SweepSpec.default("tube", [0.2, 0.1, 0.05], 4000, 1))
    r = table.column("retro_frac")
    assert r[0] < r[1] < r[2]
    for a, b in zip(r, table.column("elastic_frac")):
        assert abs(a + b - 1) < 1e-9


def test_notched_sweep_retro_increases():
    table = run_sweep(SweepSpec.default("notched_angle", [0.4, 0.2, 0.1], 10**4, 0))
    r = table.column("retro_frac")
    assert r[0] < r[1] < r[2]


def test_sweep_deterministic():
    spec = SweepSpec.default("rectangle", [0.2, 0.1], 2000, 5)
    assert run_sweep(spec).rows == run_sweep(spec, threads=3).rows


def test_flagged_points_recorded():
    from retrobilliard.dynamics import TraceLimits
    spec = SweepSpec.default("rectangle", [0.2, 0.05], 2000, 0, lim=TraceLimits(max_reflections=3))
    rows = run_sweep(spec).rows
    assert all(r["flagged"] for r in rows)
    assert all(r["n_path"] > 0 for r in rows)
