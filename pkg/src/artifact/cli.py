"""Command-line driver.

A job is a JSON document::

    {"surface": {"type": "sphere"},
     "curve": {"type": "parallel", "colatitude": 1.0471975511965976},
     "command": "tc",
     "params": {"rounds": 6}}

Exit codes: 0 success, 1 validation error, 2 computation error,
3 non-convergence (or a failing ``verify`` check).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, bv, curve, polygonal, transport
from .expr import ExpressionError
from .surface import Plane, make_surface

COMMANDS = ("tc", "euclid-tc", "transport", "energy", "gauss-bonnet", "develop", "verify")
CURVE_TYPES = ("parallel", "geodesic-polygon", "chart-smooth", "cantor-graph", "piecewise")
PIECE_TYPES = ("smooth", "geodesic", "cantor")
SURFACE_TYPES = ("sphere", "flat-polar", "custom-polar", "plane")
FORMATS = ("json", "csv", "both")
STRATEGIES = polygonal.STRATEGIES

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION, EXIT_NONCONVERGENCE = 0, 1, 2, 3
DEGREE_HINT = "angles are in radians; convert degrees with x * pi / 180"


class SpecError(ValueError):
    """A job document does not follow the schema."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class JobSpec:
    command: str
    surface: dict | None
    curve: dict | None
    params: dict = field(default_factory=dict)
    out: str = "out"
    format: str = "both"


# ---------------------------------------------------------------------------
# parsing

def _number(value, path, angle=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        if isinstance(value, str) and angle and ("deg" in value.lower() or "°" in value):
            raise SpecError(path, f"degree input {value!r} rejected; {DEGREE_HINT}")
        raise SpecError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise SpecError(path, "expected a finite number")
    return float(value)


def _check_units(obj, path):
    for key in ("units", "unit", "angle_units"):
        if key in obj and str(obj[key]).lower() not in ("rad", "radian", "radians"):
            raise SpecError(f"{path}.{key}", f"unsupported unit {obj[key]!r}; {DEGREE_HINT}")


def _expr_field(obj, key, path):
    if key not in obj:
        raise SpecError(f"{path}.{key}", "missing required field")
    value = obj[key]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(float(value))
    if not isinstance(value, str):
        raise SpecError(f"{path}.{key}", "expected an expression string")
    if "deg" in value.lower() or "°" in value:
        raise SpecError(f"{path}.{key}", f"degree input rejected; {DEGREE_HINT}")
    return value


def _point(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SpecError(path, "expected a coordinate pair [r, phi]")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]", angle=True))


def _validate_curve(spec, path="curve"):
    if not isinstance(spec, dict):
        raise SpecError(path, "expected an object")
    _check_units(spec, path)
    kind = spec.get("type")
    if kind not in CURVE_TYPES:
        raise SpecError(f"{path}.type",
                        f"unknown curve type {kind!r}; valid types: {', '.join(CURVE_TYPES)}")
    if kind == "parallel":
        if "colatitude" not in spec:
            raise SpecError(f"{path}.colatitude", "missing required field")
        th = _number(spec["colatitude"], f"{path}.colatitude", angle=True)
        if not 0.0 < th < math.pi:
            hint = f"; {DEGREE_HINT}" if math.pi <= th <= 360.0 else ""
            raise SpecError(f"{path}.colatitude",
                            f"colatitude {th} must lie strictly between 0 and pi "
                            f"(the pole may not lie on the curve){hint}")
    elif kind == "geodesic-polygon":
        verts = spec.get("vertices")
        if not isinstance(verts, list) or len(verts) < 2:
            raise SpecError(f"{path}.vertices", "expected a list of at least two [r, phi] pairs")
        for i, v in enumerate(verts):
            _point(v, f"{path}.vertices[{i}]")
        if "closed" in spec and not isinstance(spec["closed"], bool):
            raise SpecError(f"{path}.closed", "expected true or false")
    elif kind == "chart-smooth":
        _expr_field(spec, "r", path)
        _expr_field(spec, "phi", path)
        for key in ("t0", "t1"):
            if key not in spec:
                raise SpecError(f"{path}.{key}", "missing required field")
            _number(spec[key], f"{path}.{key}")
    elif kind == "cantor-graph":
        depth = spec.get("depth")
        if isinstance(depth, bool) or not isinstance(depth, int) or not 1 <= depth <= 14:
            raise SpecError(f"{path}.depth", "expected an integer between 1 and 14")
    elif kind == "piecewise":
        pieces = spec.get("pieces")
        if not isinstance(pieces, list) or not pieces:
            raise SpecError(f"{path}.pieces", "expected a non-empty list")
        for i, p in enumerate(pieces):
            pp = f"{path}.pieces[{i}]"
            if not isinstance(p, dict) or p.get("type") not in PIECE_TYPES:
                raise SpecError(f"{pp}.type", f"valid piece types: {', '.join(PIECE_TYPES)}")
            if p["type"] == "smooth":
                _validate_curve(dict(p, type="chart-smooth"), pp)
            elif p["type"] == "geodesic":
                _point(p.get("from"), f"{pp}.from")
                _point(p.get("to"), f"{pp}.to")
            else:
                _validate_curve(dict(p, type="cantor-graph"), pp)


def _needs_plane(spec):
    if spec is None:
        return False
    if spec.get("type") == "cantor-graph":
        return True
    return spec.get("type") == "piecewise" and any(
        p.get("type") == "cantor" for p in spec.get("pieces", []))


def parse_spec(document, nodes=None, rounds=None, out=None, fmt=None):
    """Validate a job document (``dict`` or JSON text) and fill defaults."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError("$", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(document, dict):
        raise SpecError("$", "job document must be a JSON object")
    command = document.get("command")
    if command not in COMMANDS:
        raise SpecError("command", f"unknown command {command!r}; valid: {', '.join(COMMANDS)}")
    params = dict(document.get("params") or {})
    if not isinstance(document.get("params", {}), dict):
        raise SpecError("params", "expected an object")
    surface = document.get("surface")
    crv = document.get("curve")
    if command != "verify":
        if crv is None:
            raise SpecError("curve", "missing required field")
        _validate_curve(crv)
        if surface is None:
            surface = {"type": "plane"} if _needs_plane(crv) else None
            if surface is None and crv.get("type") == "parallel":
                surface = {"type": "sphere"}
            if surface is None:
                raise SpecError("surface", "missing required field")
        if not isinstance(surface, dict):
            raise SpecError("surface", "expected an object")
        if surface.get("type") not in SURFACE_TYPES:
            raise SpecError("surface.type", f"unknown surface type {surface.get('type')!r}; "
                            f"valid types: {', '.join(SURFACE_TYPES)}")
        if surface["type"] == "custom-polar":
            _expr_field(surface, "g", "surface")
        if crv["type"] == "parallel" and surface["type"] != "sphere" and command != "develop":
            raise SpecError("surface.type", "parallel curves live on the sphere chart")
        if _needs_plane(crv) and surface["type"] != "plane":
            raise SpecError("surface.type", "Cantor curves are planar; use the plane surface")
    output = document.get("output") or {}
    if nodes is not None:
        params["nodes"] = nodes
    if rounds is not None:
        params["rounds"] = rounds
    params.setdefault("nodes", 4096)
    params.setdefault("rounds", 6)
    params.setdefault("strategy", "uniform-doubling")
    params.setdefault("seed", 0)
    for key in ("nodes", "rounds", "seed"):
        v = params[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise SpecError(f"params.{key}", "expected an integer")
    if params["nodes"] < 64:
        raise SpecError("params.nodes", "must be at least 64")
    if params["rounds"] < 3:
        raise SpecError("params.rounds", "must be at least 3 (extrapolation uses three rows)")
    if params["strategy"] not in STRATEGIES:
        raise SpecError("params.strategy", f"valid strategies: {', '.join(STRATEGIES)}")
    if params["strategy"] == "modulus-target":
        targets = params.get("targets")
        if not isinstance(targets, list) or not targets:
            raise SpecError("params.targets", "modulus-target needs a list of targets")
        params["targets"] = [_number(t, f"params.targets[{i}]") for i, t in enumerate(targets)]
    fmt = fmt or output.get("format", "both")
    if fmt not in FORMATS:
        raise SpecError("output.format", f"valid formats: {', '.join(FORMATS)}")
    return JobSpec(command, surface, crv, params, out or output.get("path", "out"), fmt)


# ---------------------------------------------------------------------------
# building

def _pieces(spec):
    kind = spec["type"]
    if kind == "parallel":
        return curve.parallel(spec["colatitude"]), None
    if kind == "geodesic-polygon":
        closed = spec.get("closed", True)
        return curve.geodesic_polygon(spec["vertices"], closed=closed), closed
    if kind == "chart-smooth":
        return [curve.SmoothPiece(_expr_field(spec, "r", "curve"),
                                  _expr_field(spec, "phi", "curve"),
                                  spec["t0"], spec["t1"])], None
    if kind == "cantor-graph":
        return curve.cantor_graph(spec["depth"]), False
    out = []
    for p in spec["pieces"]:
        if p["type"] == "smooth":
            out.append(curve.SmoothPiece(_expr_field(p, "r", "piece"),
                                         _expr_field(p, "phi", "piece"), p["t0"], p["t1"]))
        elif p["type"] == "geodesic":
            out.append(curve.GeodesicPiece(p["from"], p["to"]))
        else:
            out.append(curve.CantorPiece(p["depth"]))
    return out, None


def build(job):
    """Surface and sampled curve of a job (validation errors raise ``ValueError``)."""
    surface = make_surface(job.surface)
    pieces, closed = _pieces(job.curve)
    return surface, curve.arc_length_param(surface, pieces, n=job.params["nodes"], closed=closed)


# ---------------------------------------------------------------------------
# output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


class _Writer:
    def __init__(self, job):
        self.dir = Path(job.out)
        self.format = job.format
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def json(self, name, payload):
        if self.format in ("json", "both"):
            text = json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"
            self._write(name + ".json", text)

    def csv(self, name, header, rows, always=False):
        if always or self.format in ("csv", "both"):
            self._write(name + ".csv", _csv(header, rows))

    def _write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        self.written.append(str(path))


# ---------------------------------------------------------------------------
# commands

def _cmd_tc(job, surface, crv, w):
    p = job.params
    rep = analysis.total_intrinsic_curvature(
        crv, p["strategy"], rounds=p["rounds"], start=p.get("start"), targets=p.get("targets"),
        seed=p["seed"])
    rows = rep.refinement.rows
    mod = rep.refinement.column("modulus")
    rot = rep.refinement.column("rotation")
    running = [analysis.extrapolate(mod[: k + 1], rot[: k + 1]).estimate
               for k in range(len(rows))]
    w.csv("refinement", polygonal.REPORT_COLUMNS,
          [[getattr(r, c) for c in polygonal.REPORT_COLUMNS] for r in rows])
    w.csv("tc", polygonal.REPORT_COLUMNS + ("estimate",),
          [[getattr(r, c) for c in polygonal.REPORT_COLUMNS] + [e] for r, e in zip(rows, running)])
    w.csv("energy", ("ac", "jump", "cantor", "total"),
          [[rep.energy.ac, rep.energy.jump, rep.energy.cantor, rep.energy.total]])
    w.json("tc", rep.as_dict())
    print(f"TC estimate {rep.estimate:.12g} ({rep.status}); F(tau) {rep.energy.total:.12g}; "
          f"gap {rep.equality_gap:.3g}")
    return EXIT_NONCONVERGENCE if rep.status == "oscillating" else EXIT_OK


def _cmd_euclid(job, surface, crv, w):
    rows = analysis.euclidean_tc_rows(crv)
    ext = analysis.euclidean_total_curvature(crv, detail=True)
    w.csv("euclid_tc", ("mesh", "rotation"), rows)
    w.json("euclid_tc", {"estimate": ext.estimate, "status": ext.status,
                         "rows": [{"mesh": m, "rotation": r} for m, r in rows]})
    print(f"Euclidean TC {ext.estimate:.12g} ({ext.status})")
    return EXIT_OK


def _cmd_transport(job, surface, crv, w):
    state, series = transport.transport_curve(crv)
    lifted = transport.optimal_lift(series)
    w.csv("theta", ("s", "theta", "is_jump", "theta_minus", "theta_plus"), lifted.rows())
    summary = {"length": crv.length, "theta_start": float(lifted.theta(0)[0]),
               "theta_end": float(lifted.theta(len(lifted.pieces) - 1)[-1]),
               "span": lifted.span(), "variation": lifted.variation(),
               "norm_drift": state.norm_drift(), "backend": state.backend,
               "closing_jump": lifted.closing}
    if getattr(surface, "kind", None) == "sphere":
        summary["identity_residual"] = transport.transport_identity_check(state, crv)
    w.json("transport", summary)
    print(f"Theta(L) = {summary['theta_end']:.12g}; norm drift {summary['norm_drift']:.3g}")
    return EXIT_OK


def _cmd_energy(job, surface, crv, w):
    e = bv.energy_functional(crv)
    w.csv("energy", ("ac", "jump", "cantor", "total"), [[e.ac, e.jump, e.cantor, e.total]])
    w.json("energy", e.as_dict())
    print(f"F(tau) = {e.total:.12g} (ac {e.ac:.6g}, jump {e.jump:.6g}, cantor {e.cantor:.6g})")
    return EXIT_OK


def _cmd_gauss_bonnet(job, surface, crv, w):
    rep = analysis.gauss_bonnet_check(crv, nodes=job.params.get("quadrature", 512))
    d = rep.as_dict()
    w.csv("gauss_bonnet", tuple(d), [list(d.values())])
    w.json("gauss_bonnet", d)
    print(f"area integral {rep.area_integral:.12g}; residual {rep.residual:.3g}")
    return EXIT_OK


def _cmd_develop(job, surface, crv, w):
    if job.curve["type"] == "parallel":
        _, crv = analysis.envelope_chart_of_parallel(job.curve["colatitude"], job.params["nodes"])
    dev = analysis.develop(crv)
    tan = dev.tangent_nodes()
    w.csv("developed", ("s", "x", "y", "tx", "ty"),
          [[s, p[0], p[1], t[0], t[1]] for s, p, t in zip(dev.s, dev.points, tan)])
    tc = analysis.euclidean_total_curvature(dev)
    kint = bv.energy_functional(crv).total
    w.json("develop", {"length": dev.length, "euclidean_tc": tc, "intrinsic_energy": kint,
                       "closed": dev.closed})
    print(f"developed length {dev.length:.12g}; TC {tc:.12g}; int |kappa_g| {kint:.12g}")
    return EXIT_OK


def _cmd_verify(job, w):
    from .verify import golden_checks

    checks = golden_checks(nodes=job.params["nodes"], rounds=job.params["rounds"])
    for c in checks:
        print(c.line())
    w.csv("verify", ("name", "value", "expected", "tolerance", "relation", "passed"),
          [[c.name, c.value, c.expected, c.tolerance, c.relation, int(c.passed)] for c in checks],
          always=True)
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NONCONVERGENCE


HANDLERS = {"tc": _cmd_tc, "euclid-tc": _cmd_euclid, "transport": _cmd_transport,
            "energy": _cmd_energy, "gauss-bonnet": _cmd_gauss_bonnet, "develop": _cmd_develop}


def run(job):
    """Execute a validated job; returns the exit status."""
    if job.command == "verify":
        return _cmd_verify(job, _Writer(job))
    try:
        surface, crv = build(job)
    except (ValueError, ExpressionError) as exc:
        print(f"error: invalid curve: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if job.command == "develop" and not isinstance(surface, Plane) and \
            job.curve["type"] != "parallel" and surface.kind != "flat":
        print("error: develop needs a flat-polar surface (or a sphere parallel)", file=sys.stderr)
        return EXIT_VALIDATION
    w = _Writer(job)
    try:
        return HANDLERS[job.command](job, surface, crv, w)
    except analysis.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {job.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION


def build_parser():
    p = argparse.ArgumentParser(prog="artifact",
                                description="Total intrinsic curvature of curves on surfaces.")
    p.add_argument("--spec", required=True, help="job document (JSON)")
    p.add_argument("--out", default=None, help="output directory (default ./out)")
    p.add_argument("--nodes", type=int, default=None, help="arc-length nodes (default 4096)")
    p.add_argument("--rounds", type=int, default=None, help="refinement rounds (default 6)")
    p.add_argument("--format", choices=FORMATS, default=None, help="report format")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.spec).read_text()
    except OSError as exc:
        print(f"error: cannot read spec: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        job = parse_spec(text, nodes=args.nodes, rounds=args.rounds, out=args.out,
                         fmt=args.format)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(job)


if __name__ == "__main__":
    sys.exit(main())
