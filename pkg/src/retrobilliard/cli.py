"""Command-line front end.

    retrobilliard <command> --config run.json [--out DIR] [--threads N] [--dump-paths]

Exit codes: 0 success, 1 bad configuration, 2 run flagged (too many
pathological trajectories; outputs are still written), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import jsonschema
import numpy as np

from . import dynamics as dyn
from . import measures as ms
from . import oracles as orc
from . import resistance as res
from ._io import clean, ensure_dir, write_csv, write_json
from .errors import ConfigError, DomainError, OutputError, RunFlagged, WeightError
from .geometry import Ray, UnitVec
from .schedules import SweepSpec, build_hollow, run_sweep

COMMANDS = ("trace", "measure", "sweep", "support", "resistance", "oracle-check", "rotation")

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_vec = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "shape": {"type": "string"},
        "params": {"type": "object", "additionalProperties": _num},
        "N": _pos_int,
        "seed": {"type": "integer", "minimum": 0},
        "xi": _num,
        "phi": _num,
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["parabola_exterior", "orthant_corner", "quarter_angle_polygon"]},
                "p": {"type": "number", "exclusiveMinimum": 0},
                "arm": {"type": "number", "exclusiveMinimum": 0},
                "a": {"type": "array", "items": _num, "minItems": 2},
            },
        },
        "ray": {
            "type": "object",
            "additionalProperties": False,
            "required": ["origin", "direction"],
            "properties": {"origin": _vec, "direction": _vec},
        },
        "values": {"type": "array", "items": _num, "minItems": 1},
        "grid": {"type": "array", "items": {"type": "object", "additionalProperties": _num}, "minItems": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_reflections": _pos_int,
        "histogram_bins": _pos_int,
        "dump_paths": {"type": "boolean"},
        "oracle": {"enum": ["rectangle", "triangle", "notched", "k_delta"]},
        "eps": _num,
        "lam": _num,
        "delta": _num,
        "delta_cut": _num,
        "max_iter": _pos_int,
        "flow_angle": _num,
        "alpha_acc": _num,
        "c0": _num,
        "weights": {"type": "array", "items": _num},
        "F_values": {"type": "array", "items": _num},
        "perimeter": {"type": "number", "exclusiveMinimum": 0},
    },
}

PATH_DUMP_LIMIT = 100


def load_config(path, command: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            cfg = json.load(f)
    except OSError as e:
        raise OutputError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return validate_config(cfg, command)


def validate_config(cfg: dict, command: str) -> dict:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}") from None
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    cfg = dict(cfg)
    cfg["command"] = command
    return cfg


def _need(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"{cfg['command']} needs {', '.join(missing)}")


def _limits(cfg) -> dyn.TraceLimits:
    return dyn.TraceLimits(max_reflections=cfg.get("max_reflections", 10**6))


def _hollow(cfg):
    _need(cfg, "shape")
    return build_hollow(cfg["shape"], cfg.get("params", {}))


def _path_rows(paths):
    for t, p in paths:
        for j, (x, y) in enumerate(p.tolist()):
            yield (t, j, x, y) if t is not None else (j, x, y)


# -- commands ---------------------------------------------------------------


def cmd_trace(cfg, out, threads, dump):
    if "scene" in cfg:
        sc = cfg["scene"]
        _need(cfg, "ray")
        if sc["kind"] == "parabola_exterior":
            scene = dyn.ParabolaExterior(sc.get("p", 1.0))
        elif sc["kind"] == "orthant_corner":
            scene = dyn.OrthantCorner(sc.get("arm", math.inf))
        else:
            if "a" not in sc:
                raise ConfigError("quarter_angle_polygon needs the constants a")
            scene = dyn.QuarterAnglePolygon(tuple(sc["a"]))
        ray = Ray(tuple(cfg["ray"]["origin"]), UnitVec.of(*cfg["ray"]["direction"]))
        r = dyn.trace_unbounded(scene, ray, _limits(cfg))
        doc = {"v": list(ray.dir), "v_plus": list(r.v_plus), "n_reflections": r.n_reflections,
               "status": r.status, "path": r.path.tolist(),
               "reversal_error": math.hypot(r.v_plus.x + ray.dir.x, r.v_plus.y + ray.dir.y)}
        if isinstance(scene, dyn.ParabolaExterior) and r.n_reflections >= 2:
            doc["chord_focus_distance"] = dyn.chord_focus_distance(r.path, scene.focus)
        path = r.path
    else:
        _need(cfg, "xi", "phi")
        h = _hollow(cfg)
        rec = dyn.trace_hollow(h, dyn.IncidenceState(cfg["xi"], cfg["phi"]), _limits(cfg))
        doc = {"xi": rec.xi, "phi": rec.phi, "phi_plus": rec.phi_plus, "xi_plus": rec.xi_plus,
               "n_reflections": rec.n_reflections, "status": rec.status, "watched": rec.watched}
        path = rec.path
    write_json(os.path.join(out, "trace.json"), doc, cfg)
    if dump:
        write_csv(os.path.join(out, "path.csv"), ("segment_index", "x", "y"), _path_rows([(None, path)]), cfg)
    print(json.dumps(clean({k: v for k, v in doc.items() if k != "path"}), sort_keys=True))
    return 0


def _measure(cfg, threads):
    _need(cfg, "N", "seed")
    h = _hollow(cfg)
    try:
        return h, ms.estimate_measure(h, cfg["N"], cfg["seed"], _limits(cfg), threads), False
    except RunFlagged as e:
        return h, e.measure, True


def _dump_sample_paths(cfg, h, out):
    xi, phi = ms.sample_incidence_arrays(cfg["seed"], min(cfg["N"], PATH_DUMP_LIMIT))
    paths = [(i, dyn.trace_hollow(h, dyn.IncidenceState(float(a), float(b)), _limits(cfg)).path)
             for i, (a, b) in enumerate(zip(xi, phi))]
    write_csv(os.path.join(out, "paths.csv"), ("trajectory", "segment_index", "x", "y"), _path_rows(paths), cfg)


def cmd_measure(cfg, out, threads, dump):
    h, eta, flagged = _measure(cfg, threads)
    doc = eta.summary(cfg.get("tol", 1e-6))
    doc["flagged"] = flagged
    write_json(os.path.join(out, "measure.json"), doc, cfg)
    if "histogram_bins" in cfg:
        hist = eta.histogram(cfg["histogram_bins"])
        write_csv(os.path.join(out, "histogram.csv"), [f"b{j}" for j in range(hist.shape[1])],
                  hist.tolist(), cfg)
    if dump:
        _dump_sample_paths(cfg, h, out)
    print(f"F={doc['F']!r} retro={doc['retro_fraction']!r} pathological={eta.n_pathological}")
    return 2 if flagged else 0


def cmd_support(cfg, out, threads, dump):
    h, eta, flagged = _measure(cfg, threads)
    eta.to_csv(os.path.join(out, "support.csv"), cfg)
    if dump:
        _dump_sample_paths(cfg, h, out)
    print(f"{len(eta)} pairs, {eta.n_pathological} pathological")
    return 2 if flagged else 0


def cmd_sweep(cfg, out, threads, dump):
    _need(cfg, "shape", "N", "seed")
    kw = {"tol": cfg.get("tol", 1e-6), "lim": _limits(cfg)}
    if "grid" in cfg:
        spec = SweepSpec(cfg["shape"], tuple(cfg["grid"]), cfg["N"], cfg["seed"], **kw)
    else:
        _need(cfg, "values")
        spec = SweepSpec.default(cfg["shape"], cfg["values"], cfg["N"], cfg["seed"], **kw)
    table = run_sweep(spec, threads)
    table.to_csv(os.path.join(out, "sweep.csv"), cfg)
    for r in table.rows:
        print(r["params"], f"F={r['F']:.6f} retro={r['retro_frac']:.4f}")
    return 2 if any(r["flagged"] for r in table.rows) else 0


def cmd_resistance(cfg, out, threads, dump):
    doc = {}
    code = 0
    if "shape" in cfg:
        h, eta, flagged = _measure(cfg, threads)
        rep = res.ResistanceReport.from_measure(eta, cfg.get("perimeter", 1.0))
        doc.update({"F": ms.functional_F(eta), "R": rep.R, "D": rep.D, "r": rep.r, "flagged": flagged})
        code = 2 if flagged else 0
        if "alpha_acc" in cfg:
            doc["maxwellian"] = res.maxwellian_resistance(rep.R, rep.D, cfg["alpha_acc"])
        if "flow_angle" in cfg:
            try:
                doc["directional"] = res.directional_resistance(
                    h, cfg["flow_angle"], cfg["N"], cfg["seed"], _limits(cfg)).tolist()
            except RunFlagged:
                code = 2
    if "c0" in cfg:
        doc["r_body"] = res.r_of_body(cfg["c0"], cfg.get("F_values", []), cfg.get("weights", []))
    if not doc:
        raise ConfigError("resistance needs a shape or body weights c0/weights/F_values")
    write_json(os.path.join(out, "resistance.json"), doc, cfg)
    print(json.dumps(clean(doc), sort_keys=True))
    return code


def cmd_oracle_check(cfg, out, threads, dump):
    _need(cfg, "oracle", "N", "seed")
    kind = cfg["oracle"]
    lim = _limits(cfg)
    if kind == "rectangle":
        _need(cfg, "eps")
        doc = orc.compare_rectangle(cfg["eps"], cfg["N"], cfg["seed"], lim).as_dict()
    elif kind == "triangle":
        _need(cfg, "eps")
        doc = orc.compare_triangle(cfg["eps"], cfg["N"], cfg["seed"], lim).as_dict()
    elif kind == "notched":
        _need(cfg, "delta", "lam")
        doc = orc.compare_notched(cfg["delta"], cfg["lam"], cfg["N"], cfg["seed"],
                                  cfg.get("delta_cut", 1e-3), lim).as_dict()
    else:
        _need(cfg, "delta", "lam")
        ks = orc.k_delta_samples(cfg["lam"], cfg["delta"], cfg["N"], cfg["seed"])
        counts = np.bincount(ks)[1:]
        doc = {"shape": "notched_dynamics", "N": cfg["N"], "tv": orc.k_delta_tv(ks, cfg["lam"]),
               "counts": counts.tolist()}
    write_json(os.path.join(out, "oracle.json"), doc, cfg)
    print(json.dumps(clean({k: v for k, v in doc.items() if k != "counts"}), sort_keys=True))
    return 0


def cmd_rotation(cfg, out, threads, dump):
    _need(cfg, "eps", "N", "seed")
    law = orc.rotation_law(cfg["eps"], cfg["N"], cfg["seed"], cfg.get("max_iter", 10**7))
    write_csv(os.path.join(out, "rotation.csv"), ("k", "p_hat"),
              ((k + 1, float(p)) for k, p in enumerate(law.p_hat)), cfg)
    print(f"{law.n_samples} samples, {law.n_capped} capped, p_hat[:5]={law.p_hat[:5].tolist()}")
    return 0


HANDLERS = {
    "trace": cmd_trace, "measure": cmd_measure, "sweep": cmd_sweep, "support": cmd_support,
    "resistance": cmd_resistance, "oracle-check": cmd_oracle_check, "rotation": cmd_rotation,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="retrobilliard", description="Billiard retroreflector experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: RETRO_THREADS or CPU count)")
    p.add_argument("--dump-paths", action="store_true", help="also write trajectory polylines")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        dump = args.dump_paths or cfg.get("dump_paths", False)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        ensure_dir(args.out)
        return HANDLERS[args.command](cfg, args.out, args.threads, dump)
    except (ConfigError, DomainError, WeightError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except RunFlagged as e:
        print(f"flagged: {e}", file=sys.stderr)
        return 2
    except OutputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
