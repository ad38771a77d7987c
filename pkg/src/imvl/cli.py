"""Command-line front end.

    imvl coeffs --preset HOS4
    imvl run --example ex1 --preset HOS1 --J 40 --dt h4
    imvl convergence --example ex1 --preset HOS1 --J 15,20,30,40 --dt h4
    imvl mass --example ex1 --preset HOS1 --J 30 --dt 0.005
    imvl sweep --example ex1 --J 20 --dt h3
    imvl breakthrough --variant both
    imvl plot out/breakthrough/breakthrough.csv

Every run-type command accepts ``--config FILE`` (YAML or JSON, validated
against ``schema/config.schema.json``); flags override fields of the file.
Outputs go to ``$IMVL_OUTPUT_ROOT/<output_dir>`` (default ``./imvl-out``).

Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import __version__
from .cases import ManufacturedCase, UnknownCaseError, builtin_case
from .coefficients import (
    PRESETS,
    SchemeParams,
    SchemeValidationError,
    eighth_order_params,
    get_scheme,
)
from .grid_ops import GridOpError
from .harness import (
    HarnessError,
    breakthrough,
    convergence_study,
    mass_report,
    parameter_sweep,
    resolve_dt,
)
from .isotherms import from_config as isotherm_from_config
from .plotting import PlotInputError, plot_csv
from .solver import (
    Dirichlet,
    DirichletInletZeroFluxOutlet,
    Periodic,
    SolverConfig,
    SolverError,
    run,
)

log = logging.getLogger("imvl")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
OUTPUT_ROOT_ENV = "IMVL_OUTPUT_ROOT"
NON_SEMANTIC = ("output_dir", "workers")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


def write_atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path


def write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return write_atomic(path, buf.getvalue())


def write_json(path: Path, doc) -> Path:
    return write_atomic(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, Fraction):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def output_dir(doc: dict, command: str) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "imvl-out"))
    sub = Path(doc.get("output_dir") or command)
    return sub if sub.is_absolute() else root / sub


def config_hash(doc: dict) -> str:
    semantic = {k: v for k, v in doc.items() if k not in NON_SEMANTIC}
    blob = json.dumps(semantic, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def load_schema() -> dict:
    return json.loads(resources.files("imvl").joinpath("schema/config.schema.json").read_text())


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return doc


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def _split_list(text: str, conv=float) -> list:
    try:
        return [conv(s) for s in str(text).replace(" ", "").split(",") if s]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def _dt_flag(text: str):
    t = text.strip().lower().replace("^", "")
    if t in ("h3", "h4"):
        return t
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"--dt must be h3, h4 or a number, got {text!r}") from None


def merge_flags(doc: dict, args: argparse.Namespace, command: str) -> dict:
    doc = copy.deepcopy(doc)
    if doc.get("command") not in (None, command):
        raise ConfigError(f"config is for command {doc['command']!r}, not {command!r}")
    doc["command"] = command
    if getattr(args, "example", None):
        doc.pop("problem", None)
        doc["example"] = args.example
    if getattr(args, "preset", None):
        doc["scheme"] = args.preset
    for flag, key in (("stepper", "stepper"), ("T", "T"), ("out", "output_dir"), ("workers", "workers")):
        v = getattr(args, flag, None)
        if v is not None:
            doc[key] = v
    if getattr(args, "J", None):
        js = _split_list(args.J, int)
        doc["J"] = js if command in ("convergence",) else js[0]
    if getattr(args, "dt", None):
        doc["dt"] = _dt_flag(args.dt)
    if getattr(args, "times", None):
        doc["report_times"] = _split_list(args.times)
    if command == "sweep":
        sw = doc.setdefault("sweep", {})
        if args.m_node_range:
            sw["m_node_range"] = _split_list(args.m_node_range)
        if args.m_stag_range:
            sw["m_stag_range"] = _split_list(args.m_stag_range)
        if args.spacing:
            sw["spacing"] = args.spacing
    if command == "breakthrough":
        bt = doc.setdefault("breakthrough", {})
        if args.variant:
            bt["variants"] = ["hos1d", "hos2d"] if args.variant == "both" else [args.variant]
        if args.lengths:
            bt["lengths"] = _split_list(args.lengths)
        for flag in ("resolution", "horizon"):
            if getattr(args, flag) is not None:
                bt[flag] = getattr(args, flag)
        if args.step is not None:
            bt["dt"] = args.step
    return doc


_DIRICHLET_EXAMPLES = {"ex3", "ex4", "ex5", "ex6"}
_DEFAULT_J = {"run": 20, "convergence": [15, 20, 30, 40], "mass": 30, "sweep": 20}


def apply_defaults(doc: dict) -> dict:
    """Fill every unset field so that the resolved document (and its hash)
    does not depend on which defaults were spelled out."""
    cmd = doc["command"]
    doc = copy.deepcopy(doc)
    if cmd == "breakthrough":
        bt = doc.setdefault("breakthrough", {})
        bt.setdefault("lengths", [5.0, 10.0, 15.0])
        bt.setdefault("variants", ["hos1d", "hos2d"])
        bt.setdefault("resolution", 0.5)
        bt.setdefault("dt", 1.0)
        bt.setdefault("horizon", 1800.0)
        doc.setdefault("workers", 1)
        return doc
    if "problem" not in doc:
        doc.setdefault("example", "ex1")
    dirichlet = doc.get("example") in _DIRICHLET_EXAMPLES or (
        "problem" in doc and doc["problem"]["bc"]["type"] != "periodic"
    )
    if cmd == "sweep":
        doc.setdefault("stepper", "cn")
        doc.setdefault("dt", "h3")
        tn, _ = eighth_order_params("node")
        ts, _ = eighth_order_params("staggered")
        sw = doc.setdefault("sweep", {})
        sw.setdefault("m_node_range", [tn - 0.25, tn + 0.25])
        sw.setdefault("m_stag_range", [ts - 0.25, ts + 0.25])
        sw.setdefault("spacing", 0.05)
    else:
        doc.setdefault("scheme", "HOS1-D" if dirichlet else "HOS1")
        doc.setdefault("stepper", "euler")
        if doc.get("example") == "ex6":
            doc.setdefault("dt", 1.0)
            doc.setdefault("J", 10)
        doc.setdefault("dt", "h4")
    if doc.get("stepper") == "cn":
        doc.setdefault("cn_source", "midpoint")
    doc.setdefault("J", _DEFAULT_J[cmd])
    if cmd == "mass":
        doc.setdefault("report_times", [0.2, 0.4, 0.6, 0.8])
    newton = doc.setdefault("newton", {})
    newton.setdefault("tol", 1e-12)
    newton.setdefault("max_iters", 50)
    doc.setdefault("workers", 1)
    return doc


def build_case(doc: dict) -> ManufacturedCase:
    if "example" in doc:
        try:
            return builtin_case(doc["example"])
        except UnknownCaseError as exc:
            raise ConfigError(str(exc)) from None
    p = doc["problem"]
    lo, hi = p["domain"]
    if not hi > lo:
        raise ConfigError("problem.domain must be increasing")
    bc = p["bc"]
    if bc["type"] == "periodic":
        boundary = Periodic()
    elif bc["type"] == "dirichlet":
        left, right = float(bc.get("left", 0.0)), float(bc.get("right", 0.0))
        boundary = Dirichlet(lambda t, v=left: v, lambda t, v=right: v)
    else:
        boundary = DirichletInletZeroFluxOutlet(float(bc.get("c_in", 1.0)))
    try:
        iso = isotherm_from_config(p["isotherm"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem.isotherm: {exc}") from None

    def const(v):
        return lambda x, *_: np.full_like(np.asarray(x, dtype=float), float(v))

    zero = const(0.0)
    return ManufacturedCase(
        id="custom",
        x_left=float(lo),
        x_right=float(hi),
        T=float(doc.get("T", 1.0)),
        periodic=bc["type"] == "periodic",
        velocity=const(p["velocity"]),
        velocity_dx=zero,
        diffusion=const(p["diffusion"]),
        diffusion_dx=zero,
        isotherm=iso,
        source=const(p.get("source", 0.0)),
        initial=const(p.get("initial", 0.0)),
        boundary=boundary,
        description="custom constant-coefficient problem",
    )


def _scheme(doc: dict) -> SchemeParams:
    try:
        return get_scheme(doc["scheme"])
    except SchemeValidationError as exc:
        raise ConfigError(f"invalid scheme: {exc}") from None


def _check_compat(case: ManufacturedCase, scheme: SchemeParams, doc: dict) -> None:
    if case.periodic and scheme.closure != "periodic":
        raise ConfigError(f"scheme {scheme.name} is a Dirichlet variant; the problem is periodic")
    if not case.periodic:
        if scheme.closure == "periodic":
            raise ConfigError("Dirichlet problems need scheme HOS1-D or HOS2-D")
        if doc.get("stepper") == "cn":
            raise ConfigError("Crank-Nicolson is only available for periodic problems")


def _solver_config(doc: dict, scheme: SchemeParams, dt: float) -> SolverConfig:
    return SolverConfig(
        scheme,
        doc["stepper"],
        dt,
        newton_tol=doc["newton"]["tol"],
        newton_max_iters=doc["newton"]["max_iters"],
        cn_source=doc.get("cn_source", "midpoint"),
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _offset_str(o) -> str:
    return str(Fraction(o)) if not isinstance(o, float) else fmt(o)


def _exact_str(v) -> str:
    return str(v) if isinstance(v, (Fraction, int)) else ""


def coefficient_rows(scheme: SchemeParams) -> list[list]:
    name = scheme.name or "custom"
    rows = []

    def add(role, offsets, values):
        for o, v in zip(offsets, values):
            rows.append([name, role, _offset_str(o), _exact_str(v), float(v)])

    a, an = scheme.mass_stag, scheme.mass_node
    add("mass_stag", a.offsets, a.a)
    add("delta", scheme.delta.offsets, scheme.delta.full)
    add("mass_node", an.offsets, an.a)
    add("node_deriv", scheme.node_deriv.offsets, scheme.node_deriv.full)
    if scheme.closure != "periodic":
        b, bn = scheme.boundary, scheme.node_boundary
        add("boundary_l", b.l_offsets, b.l)
        if scheme.closure == "hos1d":
            add("boundary_k", bn.k_offsets, bn.k)
        else:
            add("boundary_g", b.g_offsets, b.g)
    return rows


def truncation_report(scheme: SchemeParams) -> dict:
    out = {}
    for kind, tc in scheme.truncation().items():
        entry = {"e4": float(tc.e4), "e6": float(tc.e6), "e8": float(tc.e8), "order": tc.order}
        if all(isinstance(v, Fraction) for v in (tc.e4, tc.e6, tc.e8)):
            entry["exact"] = {k: str(getattr(tc, k)) for k in ("e4", "e6", "e8")}
        out[kind] = entry
    return {"scheme": scheme.name or "custom", "order": scheme.order(), "kinds": out, "stability_margin": scheme.stability_margin()}


def cmd_coeffs(args) -> int:
    explicit = [args.m_stag, args.a2_stag, args.m_node, args.a2_node]
    if args.preset and any(v is not None for v in explicit):
        raise ConfigError("give either --preset or the four explicit parameters, not both")
    if args.preset:
        scheme = _scheme({"scheme": args.preset})
    elif all(v is not None for v in explicit):
        scheme = _scheme({"scheme": dict(zip(("m_stag", "a2_stag", "m_node", "a2_node"), explicit))})
    else:
        raise ConfigError("coeffs needs --preset or all of --m-stag --a2-stag --m-node --a2-node")
    doc = {"command": "coeffs", "scheme": args.preset or dict(zip(("m_stag", "a2_stag", "m_node", "a2_node"), explicit))}
    if args.out:
        doc["output_dir"] = args.out
    out = output_dir(doc, "coeffs")
    t0 = time.perf_counter()
    files = [
        write_csv(out / "coeffs.csv", ("scheme", "role", "offset", "value_exact", "value_float"), coefficient_rows(scheme)),
        write_json(out / "truncation.json", truncation_report(scheme)),
    ]
    _manifest(out, doc, t0, files, {})
    rep = truncation_report(scheme)
    print(f"{rep['scheme']}: order {rep['order']} " + " ".join(f"{k}={v['order']}" for k, v in rep["kinds"].items()))
    return EXIT_OK


def _manifest(out: Path, doc: dict, t0: float, files, newton: dict, status: str = "ok", extra: dict | None = None) -> Path:
    man = {
        "tool": "imvl",
        "version": __version__,
        "command": doc.get("command"),
        "config": doc,
        "config_hash": config_hash(doc),
        "wall_time_s": round(time.perf_counter() - t0, 6),
        "newton": newton,
        "status": status,
        "outputs": sorted(Path(f).name for f in files),
    }
    if extra:
        man.update(extra)
    return write_json(out / "manifest.json", man)


def cmd_run(doc: dict, out: Path, t0: float) -> int:
    case = build_case(doc)
    scheme = _scheme(doc)
    _check_compat(case, scheme, doc)
    J = doc["J"]
    problem = case.problem(J)
    T = doc.get("T", case.T)
    dt = resolve_dt(doc["dt"], problem.grid.h)
    res = run(problem, _solver_config(doc, scheme, dt), T, report_times=doc.get("report_times", ()))
    rows = []
    for k, t in enumerate(res.times):
        led = res.ledger[k] if res.ledger else None
        rows.append([k + 1, t, res.newton_iters[k]] + ([led.mass_c, led.mass_phi, led.source, led.eps_mass] if led else [None] * 4))
    files = [write_csv(out / "steps.csv", ("step", "t", "newton_iters", "mass_c", "mass_phi", "source", "eps_mass"), rows)]
    g = problem.grid
    xs = g.node_points(problem.periodic)
    ex_c = problem.exact_c(xs, res.final.t) if problem.exact_c else None
    ex_z = problem.exact_z(g.faces, res.final.t) if problem.exact_z else None
    term = []
    for i, x in enumerate(xs):
        e = None if ex_c is None else ex_c[i]
        term.append(["C", x, res.final.C[i], e, None if e is None else res.final.C[i] - e])
    for i, x in enumerate(g.faces):
        e = None if ex_z is None else ex_z[i]
        term.append(["Z", x, res.final.Z[i], e, None if e is None else res.final.Z[i] - e])
    files.append(write_csv(out / "terminal.csv", ("field", "x", "value", "exact", "error"), term))
    extra = {}
    if res.errors:
        extra["errors"] = dict(zip(("eps_c_2", "eps_c_inf", "eps_z_2", "eps_z_inf"), res.errors.as_tuple()))
        print("eps_c2={:.4e} eps_cinf={:.4e} eps_z2={:.4e} eps_zinf={:.4e}".format(*res.errors.as_tuple()))
    newton = {"max": int(res.newton_iters.max()), "total": int(res.newton_iters.sum()), "steps": int(res.times.size)}
    _manifest(out, doc, t0, files, newton, extra=extra)
    return EXIT_OK


def cmd_convergence(doc: dict, out: Path, t0: float) -> int:
    case = build_case(doc)
    if case.exact_c is None:
        raise ConfigError("convergence studies need an example with an exact solution")
    scheme = _scheme(doc)
    _check_compat(case, scheme, doc)
    Js = doc["J"] if isinstance(doc["J"], list) else [doc["J"]]
    if len(Js) < 2:
        raise ConfigError("convergence needs at least two J values")
    tab = convergence_study(case, scheme, Js, doc["dt"], doc["stepper"], T=doc.get("T"), workers=doc["workers"])
    rows = [[None if isinstance(v, float) and math.isnan(v) else v for v in r.as_list()] for r in tab.rows]
    files = [write_csv(out / "convergence.csv", tab.COLUMNS, rows)]
    for r in tab.rows:
        print("  ".join(fmt_short(v) for v in r.as_list()))
    newton = {"max": max(r.newton_max for r in tab.rows)}
    _manifest(out, doc, t0, files, newton, extra={"finest_rates": tab.finest_rates})
    return EXIT_OK


def fmt_short(v) -> str:
    if isinstance(v, float):
        return "-" if math.isnan(v) else f"{v:.4e}" if abs(v) < 0.1 else f"{v:.4f}"
    return str(v)


def cmd_mass(doc: dict, out: Path, t0: float) -> int:
    case = build_case(doc)
    if not case.periodic:
        raise ConfigError("mass reports are only supported for periodic problems")
    scheme = _scheme(doc)
    J = doc["J"]
    problem = case.problem(J)
    dt = resolve_dt(doc["dt"], problem.grid.h)
    times = doc["report_times"]
    res = run(problem, _solver_config(doc, scheme, dt), max(times), report_times=times)
    rows = [[scheme.name or "custom", r.t, r.mass_c, r.mass_phi, r.source, r.eps_mass] for r in mass_report(res, times)]
    files = [write_csv(out / "mass.csv", ("scheme", "t", "mass_c", "mass_phi", "source", "eps_mass"), rows)]
    for r in rows:
        print(f"t={r[1]:.4g} eps_mass={r[-1]:.4e}")
    _manifest(out, doc, t0, files, {"max": int(res.newton_iters.max()), "total": int(res.newton_iters.sum())})
    return EXIT_OK


def cmd_sweep(doc: dict, out: Path, t0: float) -> int:
    case = build_case(doc)
    if case.exact_c is None or not case.periodic:
        raise ConfigError("sweeps need a periodic example with an exact solution")
    sw = doc["sweep"]
    surf = parameter_sweep(
        case,
        sw["m_node_range"],
        sw["m_stag_range"],
        grid_density=sw["spacing"],
        J=doc["J"],
        dt_rule=doc["dt"],
        stepper=doc["stepper"],
        T=doc.get("T"),
        workers=doc["workers"],
    )
    files = [write_csv(out / "sweep.csv", ("m_node", "m_stag", "eps_c2", "eps_z2"), surf.long_rows())]
    argmin = {k: dict(zip(("m_node", "m_stag"), surf.argmin(k))) for k in ("c2", "z2")}
    status = "partial" if surf.failures else "ok"
    extra = {
        "argmin": argmin,
        "missing_cells": [{"m_node": a, "m_stag": b, "reason": why} for (a, b), why in sorted(surf.failures.items())],
    }
    print(f"argmin eps_c2 at {argmin['c2']}, eps_z2 at {argmin['z2']}; {len(surf.failures)} missing cells")
    _manifest(out, doc, t0, files, {"max": surf.newton_max}, status=status, extra=extra)
    return EXIT_OK


def cmd_breakthrough(doc: dict, out: Path, t0: float) -> int:
    bt = doc["breakthrough"]
    rows, nmax = [], 0
    for variant in bt["variants"]:
        curves = breakthrough(bt["lengths"], variant, bt["resolution"], bt["dt"], bt["horizon"], workers=doc["workers"])
        for c in curves:
            nmax = max(nmax, c.newton_max)
            rows.extend([t, c.length, variant, v] for t, v in zip(c.t, c.c_rel))
            print(f"{variant} {c.length:g} m: C/C0(end)={c.c_rel[-1]:.4f} t(0.5)={c.crossing_time(0.5):.1f} d")
    files = [write_csv(out / "breakthrough.csv", ("t_days", "length_m", "variant", "c_rel"), rows)]
    _manifest(out, doc, t0, files, {"max": nmax})
    return EXIT_OK


def cmd_plot(args) -> int:
    out_dir = Path(args.out) if args.out else None
    for src in args.inputs:
        src = Path(src)
        dest = (out_dir or src.parent) / (src.stem + ".svg")
        dest.parent.mkdir(parents=True, exist_ok=True)
        plot_csv(src, dest, args.kind)
        print(dest)
    return EXIT_OK


RUNNERS = {
    "run": cmd_run,
    "convergence": cmd_convergence,
    "mass": cmd_mass,
    "sweep": cmd_sweep,
    "breakthrough": cmd_breakthrough,
}


def run_command(command: str, args) -> int:
    doc = apply_defaults(merge_flags(load_config(args.config), args, command))
    validate(doc)
    out = output_dir(doc, command)
    t0 = time.perf_counter()
    try:
        return RUNNERS[command](doc, out, t0)
    except (SolverError, HarnessError, np.linalg.LinAlgError) as exc:
        _manifest(out, doc, t0, [], {}, status="failed", extra={"error": str(exc)})
        raise


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, J_help: str = "grid size J") -> None:
    p.add_argument("--config", help="YAML or JSON config document")
    p.add_argument("--example", help="built-in case id (ex1..ex6)")
    p.add_argument("--preset", help=f"scheme preset ({', '.join(PRESETS)})")
    p.add_argument("--stepper", choices=("euler", "cn"))
    p.add_argument("--J", help=J_help)
    p.add_argument("--dt", help="time step rule: h3, h4 or a number")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--workers", type=int, help="parallel runs")
    p.add_argument("--out", help="output directory (relative to $%s)" % OUTPUT_ROOT_ENV)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="imvl", description="High-order block-centered transport solver laboratory.")
    ap.add_argument("--version", action="version", version=f"imvl {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="coefficient table and truncation report")
    p.add_argument("--preset")
    p.add_argument("--m-stag", type=float)
    p.add_argument("--a2-stag", type=float)
    p.add_argument("--m-node", type=float)
    p.add_argument("--a2-node", type=float)
    p.add_argument("--out")

    p = sub.add_parser("run", help="single run with per-step and terminal CSVs")
    _common(p)
    p.add_argument("--times", help="comma-separated report times")

    p = sub.add_parser("convergence", help="error/rate table over several J")
    _common(p, "comma-separated J values")

    p = sub.add_parser("mass", help="mass error ledger at report times")
    _common(p)
    p.add_argument("--times", help="comma-separated report times")

    p = sub.add_parser("sweep", help="(m_node, m_stag) error surface on the sixth-order subfamily")
    _common(p)
    p.add_argument("--m-node-range", help="lo,hi")
    p.add_argument("--m-stag-range", help="lo,hi")
    p.add_argument("--spacing", type=float)

    p = sub.add_parser("breakthrough", help="lead column outlet curves")
    p.add_argument("--config")
    p.add_argument("--variant", choices=("hos1d", "hos2d", "both"))
    p.add_argument("--lengths", help="comma-separated column lengths (m)")
    p.add_argument("--resolution", type=float)
    p.add_argument("--step", type=float, help="time step (days)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")

    p = sub.add_parser("plot", help="render CSV outputs as SVG")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--kind", default="auto", choices=("auto", "breakthrough", "sweep", "convergence"))
    p.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "coeffs":
            return cmd_coeffs(args)
        if args.command == "plot":
            return cmd_plot(args)
        return run_command(args.command, args)
    except (ConfigError, SchemeValidationError, UnknownCaseError, PlotInputError, GridOpError) as exc:
        print(f"imvl: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, HarnessError, np.linalg.LinAlgError) as exc:
        print(f"imvl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
