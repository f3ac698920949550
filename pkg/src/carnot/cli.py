"""Command-line drivers: ``carnot <subcommand> [options]``.

Every subcommand writes CSV (or an SVG polyline plot where a curve is
involved) to ``--out`` or standard output.  Options can also come from a
JSON file given with ``--config``; flags given on the command line win.
Exit status is 0 on success, 1 when a checked property fails (the first
witness goes to stderr) and 2 on invalid input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from . import correction as cor
from . import extremal as ext
from . import hgeom
from .algebra import (
    engel,
    g_rank2_step4,
    group_inverse,
    bch_product,
    homogeneous_norm,
    project_abelianization,
    resolve_group,
)
from .distance import provider_for
from .errors import CarnotError, NotQuasiGeodesicError

OUTPUT_DIR_ENV = "CARNOT_OUTPUT_DIR"


class CheckFailed(Exception):
    """A verified property does not hold; the message names the witness."""


@dataclass
class Result:
    header: list
    rows: list
    summary: dict = field(default_factory=dict)
    curves: list = field(default_factory=list)  # abelianized polylines for svg
    failure: str | None = None


# --- argument parsing helpers ---------------------------------------------------
def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _vector(text):
    return np.array(_floats(text), dtype=float)


def _read_points(spec):
    """Points from ``@path`` (CSV or whitespace rows) or inline ``a,b;c,d``."""
    if isinstance(spec, list):
        return np.atleast_2d(np.asarray(spec, dtype=float))
    spec = str(spec)
    if spec.startswith("@"):
        with open(spec[1:], encoding="utf-8") as fh:
            text = fh.read()
        rows = [ln.replace(",", " ").split() for ln in text.splitlines()]
        rows = [r for r in rows if r and not r[0].startswith("#")]
    else:
        rows = [r.split(",") for r in spec.split(";") if r.strip()]
    try:
        return np.atleast_2d(np.array(rows, dtype=float))
    except ValueError as exc:
        raise CarnotError(f"malformed points: {exc}") from None


def _positive(name, value):
    if not value > 0:
        raise CarnotError(f"--{name.replace('_', '-')} must be positive, got {value}")
    return value


# --- subcommands ------------------------------------------------------------------
# Each entry: option name -> (type, default, help).  Defaults are applied after
# merging the config file so that explicit flags always take precedence.
COMMON = {
    "group": (str, None, "catalog name or path to an algebra JSON file"),
    "seed": (int, 0, "random seed"),
    "out": (str, None, "output file (default: stdout)"),
    "format": (str, "csv", "csv or svg"),
}


def cmd_integrate(cfg):
    A = resolve_group(cfg["group"] or "engel")
    lam = _vector(cfg["lambda"]) if cfg["lambda"] is not None else None
    if lam is None:
        raise CarnotError("--lambda is required")
    g0 = _vector(cfg["g0"]) if cfg["g0"] is not None else None
    step = _positive("step", cfg["step"])
    pair = ext.CovectorPair(lam, cfg["xi"])
    if cfg["dry_run"]:
        ext.control(A, pair, np.zeros(A.dim) if g0 is None else g0, g0)
        return None
    curve = ext.integrate_extremal(A, pair, g0, (cfg["t0"], cfg["t1"]), step)
    header = ["t"] + [f"x{lab}" for lab in A.labels] + [f"u{i + 1}" for i in range(A.rank)] + ["speed"]
    rows = np.column_stack([curve.times, curve.points, curve.controls, curve.speed])
    return Result(header, rows, curves=[project_abelianization(A, curve.points)])


def cmd_width(cfg):
    P = _read_points(cfg["points"])
    if cfg["dry_run"]:
        hgeom._as_tuple(P)
        return None
    w, idx = hgeom.min_height(P, return_index=True)
    return Result(["width", "index"], [[w, idx]])


def cmd_fit_plane(cfg):
    P = _read_points(cfg["points"])
    m = cfg["m"] if cfg["m"] is not None else P.shape[1]
    if cfg["dry_run"]:
        if not 1 <= m <= P.shape[1]:
            raise CarnotError(f"need 1 <= m <= {P.shape[1]}")
        return None
    plane, K = hgeom.fit_hyperplane(P, m)
    d = plane.distance(P)
    rows = [[i, d[i], int(i in plane.support)] for i in range(len(P))]
    return Result(["index", "distance", "in_support"], rows, {"K": K})


def _instances(cfg):
    A = resolve_group(cfg["group"] or "engel")
    n = int(_positive("instances", cfg["instances"]))
    return A, n, np.random.default_rng(cfg["seed"])


def cmd_correct(cfg):
    A, n, rng = _instances(cfg)
    if cfg["dry_run"]:
        cor.bracket_system(A)
        return None
    header = ["instance", "size", "z_hom", "y_hom_max", "identity_residual",
              "word_residual", "added_cost", "cost_bound"]
    rows, failure = [], None
    for i in range(n):
        xs, Z = cor.random_instance(A, rng, cfg["min_size"])
        sol = cor.solve_correction(A, xs, Z)
        tr = cor.perturbation_product(A, xs, Z)
        res = float(np.max(np.abs(sol.residual)))
        yh = float(np.max(homogeneous_norm(A, sol.Y)))
        rows.append([i, sol.size, float(homogeneous_norm(A, Z)), yh, res, tr.residual,
                     tr.added_cost, tr.cost_bound])
        if failure is None and (res > 1e-10 or tr.residual > 1e-12 or tr.added_cost > tr.cost_bound):
            failure = f"instance {i}: identity residual {res:.3g}, word residual {tr.residual:.3g}"
    return Result(header, rows, failure=failure)


def cmd_triangle(cfg):
    A, n, rng = _instances(cfg)
    if cfg["dry_run"]:
        cor.triangle_constant(A)
        return None
    header = ["instance", "ell", "size", "lhs_lower", "lhs_upper", "rhs_lower", "rhs_upper"]
    rows, failure = [], None
    r = A.rank
    for i in range(n):
        ell = cfg["ell"] if cfg["ell"] is not None else int(rng.integers(1, r + 3))
        while True:
            E = rng.normal(size=(r + 3, A.dim))
            if hgeom.size(A, np.delete(E, [ell - 1, ell], axis=0)) >= cfg["min_size"]:
                break
        rhs, lhs, terms = cor.modified_triangle_rhs(A, E, ell, details=True)
        rows.append([i, ell, terms["size"], lhs[0], lhs[1], rhs[0], rhs[1]])
        if failure is None and lhs[0] > rhs[1]:
            failure = f"instance {i}: lower bound {lhs[0]:.6g} of the left side exceeds {rhs[1]:.6g}"
    return Result(header, rows, failure=failure)


def _curve_source(cfg, A, needed):
    name = cfg["curve"]
    if name == "engel-beta":
        return ext.engel_beta, (-math.inf, math.inf), engel()
    if name == "lift-alpha":
        return ext.lift_alpha, (-math.inf, math.inf), g_rank2_step4()
    if name == "extremal":
        if cfg["lambda"] is None:
            raise CarnotError("--curve extremal needs --lambda")
        pair = ext.CovectorPair(_vector(cfg["lambda"]), 1.0)
        lo, hi = needed
        lo, hi = min(lo, 0.0), max(hi, 0.0)
        pieces = [ext.integrate_extremal(A, pair, None, (0.0, e), cfg["step"]) for e in (lo, hi) if e != 0.0]
        times = np.concatenate([p.times[::-1] if p.times[-1] < 0 else p.times for p in pieces])
        pts = np.concatenate([p.points[::-1] if p.times[-1] < 0 else p.points for p in pieces])
        times, keep = np.unique(times, return_index=True)
        src, dom = asy.sampled_source(ext.SampledCurve(times, pts[keep], np.zeros((len(times), A.rank))))
        return src, dom, A
    raise CarnotError(f"unknown curve {name!r}; choose engel-beta, lift-alpha or extremal")


def cmd_blowdown(cfg):
    hs = np.array(_floats(cfg["hs"]))
    w = _floats(cfg["window"])
    if len(w) != 3 or w[2] < 2:
        raise CarnotError("--window needs tmin,tmax,count")
    window = np.linspace(w[0], w[1], int(w[2]))
    A = resolve_group(cfg["group"]) if cfg["group"] else None
    if cfg["curve"] == "extremal" and A is None:
        raise CarnotError("--curve extremal needs --group")
    needed = (cfg["t_bar"] + hs.max() * min(w[0], 0.0), cfg["t_bar"] + hs.max() * max(w[1], 0.0))
    if cfg["dry_run"]:
        if np.any(hs <= 0) or np.any(np.diff(hs) <= 0):
            raise CarnotError("--hs must be positive and increasing")
        return None
    source, dom, A = _curve_source(cfg, A, needed)
    rep = asy.blowdown_estimate(A, source, hs, window, t_bar=cfg["t_bar"], domain=dom)
    header = ["h", "t"] + [f"x{lab}" for lab in A.labels]
    rows = [[h, t, *p] for h, block in zip(hs, rep.samples) for t, p in zip(window, block)]
    summary = {f"cauchy_{j}": f"[{lo:.6g}, {hi:.6g}]" for j, (lo, hi) in enumerate(rep.cauchy)}
    summary["direction"] = ",".join(f"{x:.6g}" for x in rep.horizontal_directions[-1])
    return Result(header, rows, summary, [project_abelianization(A, s) for s in rep.samples])


def cmd_lines(cfg):
    if cfg["preset"] == "lift":
        A = g_rank2_step4()
        L1, L2 = asy.lift_asymptote(A, +1), asy.lift_asymptote(A, -1)
    else:
        A = resolve_group(cfg["group"] or "engel")
        vecs = {k: _vector(cfg[k]) if cfg[k] is not None else np.zeros(A.dim)
                for k in ("base1", "dir1", "base2", "dir2")}
        L1 = asy.Line(A, vecs["base1"], vecs["dir1"])
        L2 = asy.Line(A, vecs["base2"], vecs["dir2"])
    if cfg["dry_run"]:
        return None
    found = asy.lines_finite_distance(A, L1, L2)
    header = ["finite", "c"] + [f"k{lab}" for lab in A.labels]
    if found is None:
        return Result(header, [[0, math.nan] + [math.nan] * A.dim])
    c, k = found
    return Result(header, [[1, c, *k]])


def cmd_tangent_check(cfg):
    _positive("delta", cfg["delta"])
    n = int(_positive("pairs", cfg["pairs"]))
    if cfg["dry_run"]:
        return None
    rep = asy.quantified_tangent_check(engel(), ext.engel_beta, cfg["t_bar"], cfg["delta"], n, cfg["seed"])
    gap = np.abs(rep.a - rep.b)
    rows = np.column_stack([rep.a, rep.b, gap, rep.quotient_distance])
    failure = None
    if rep.upper_violations:
        j = int(np.argmax(rep.quotient_distance - gap))
        failure = f"pair a={rep.a[j]:.6g}, b={rep.b[j]:.6g}: quotient distance exceeds |a-b|"
    return Result(["a", "b", "gap", "quotient_distance"], rows, {"C": rep.C}, failure=failure)


def cmd_verify_engel(cfg):
    tmax = _positive("tmax", cfg["tmax"])
    n = int(_positive("grid", cfg["grid"]))
    if cfg["dry_run"]:
        return None
    t = np.linspace(-tmax, tmax, n)
    res = ext.engel_residuals(t)
    keys = list(res)
    rows = np.column_stack([t] + [res[k] for k in keys])
    worst = {k: float(np.max(np.abs(res[k]))) for k in keys}
    failure = None
    for k in keys:
        if worst[k] >= cfg["tol"]:
            j = int(np.argmax(np.abs(res[k])))
            failure = f"{k} residual {res[k][j]:.3g} at t={t[j]:.6g}"
            break
    beta = ext.engel_beta(t)
    return Result(["t"] + keys, rows, worst, [beta[:, :2]], failure)


def cmd_verify_lift(cfg):
    tmax = _positive("tmax", cfg["tmax"])
    n = int(_positive("grid", cfg["grid"]))
    if cfg["dry_run"]:
        return None
    A = g_rank2_step4()
    t = np.linspace(-tmax, tmax, n)
    zp = asy.asymptote_residual(A, ext.lift_alpha, asy.lift_asymptote(A, +1), t)
    zm = asy.asymptote_residual(A, ext.lift_alpha, asy.lift_asymptote(A, -1), t)
    header = ["t"] + [f"zplus{lab}" for lab in A.labels] + [f"zminus{lab}" for lab in A.labels]
    rows = np.column_stack([t, zp, zm])
    failure = None
    pos, neg = t >= 0, t <= 0
    growth = np.abs(zp[neg, 5]) - (4.0 / 3.0 * np.abs(t[neg]) - 10.0)
    if np.max(np.abs(zp[pos])) > cfg["bound"]:
        failure = f"z for L+ leaves the box of radius {cfg['bound']} on t >= 0"
    elif np.any(growth < 0):
        j = int(np.argmin(growth))
        failure = f"1122-component below (4/3)|t| - 10 at t={t[neg][j]:.6g}"
    summary = {"sup_plus_matched": float(np.max(np.abs(zp[pos]))),
               "sup_minus_matched": float(np.max(np.abs(zm[neg])))}
    return Result(header, rows, summary, failure=failure)


def _synthetic_rough(cfg, A):
    rng = np.random.default_rng(cfg["seed"])
    n = int(_positive("samples", cfg["samples"]))
    C = cfg["C"]
    if cfg["curve"] == "line":
        t = np.linspace(-cfg["tmax"], cfg["tmax"], n)
        pts = np.zeros((n, A.dim))
        pts[:, 0] = t
        return t, pts
    if cfg["curve"] == "noisy-line":
        t = np.linspace(-cfg["tmax"], cfg["tmax"], n)
        base = np.zeros((n, A.dim))
        base[:, 0] = t
        noise = np.zeros((n, A.dim))
        # horizontal noise of length <= C/2 keeps the (1, C) bounds
        ang = rng.uniform(0, 2 * np.pi, n)
        rad = rng.uniform(0, C / 2, n)
        noise[:, 0], noise[:, 1] = rad * np.cos(ang), rad * np.sin(ang)
        return t, bch_product(A, base, noise)
    if cfg["curve"] == "circle":
        lam = np.zeros(A.dim)
        lam[0], lam[A.rank] = 1.0, 1.0
        period = 2 * np.pi
        curve = ext.integrate_extremal(A, ext.CovectorPair(lam), None, (0.0, period * 0.999), cfg["step"])
        idx = np.linspace(0, len(curve.times) - 1, n).astype(int)
        return curve.times[idx], curve.points[idx]
    raise CarnotError(f"unknown curve {cfg['curve']!r}; choose line, noisy-line or circle")


def cmd_rough_check(cfg):
    A = resolve_group(cfg["group"] or "heisenberg")
    if cfg["points"] is not None:
        data = _read_points(cfg["points"])
        if data.shape[1] != A.dim + 1:
            raise CarnotError(f"rows must hold t and {A.dim} coordinates")
        t, pts = data[:, 0], data[:, 1:]
    else:
        t, pts = _synthetic_rough(cfg, A)
    if cfg["dry_run"]:
        return None
    try:
        rep = asy.rough_projection_check(A, t, pts, cfg["C"])
    except NotQuasiGeodesicError as exc:
        return Result(["t"], [], failure=f"{exc} (witness {exc.witness})")
    h = project_abelianization(A, pts)
    rows = np.column_stack([t, h])
    summary = {"horn": rep.horn, "C_prime": rep.C_prime}
    if rep.K is not None:
        summary["K"] = rep.K
    return Result(["t"] + [f"x{lab}" for lab in A.labels[: A.rank]], rows, summary, [h])


COMMANDS = {
    "integrate": (cmd_integrate, "integrate a normal extremal", {
        "lambda": (str, None, "covector coefficients, comma separated"),
        "xi": (float, 1.0, "normal multiplier"),
        "g0": (str, None, "starting point (default identity)"),
        "t0": (float, 0.0, "start time"),
        "t1": (float, 1.0, "end time"),
        "step": (float, 1e-3, "RK4 step"),
    }),
    "width": (cmd_width, "minimal height of a tuple of vectors", {
        "points": (str, None, "@file or inline rows a,b;c,d"),
    }),
    "fit-plane": (cmd_fit_plane, "fit an (m-1)-dimensional subspace", {
        "points": (str, None, "@file or inline rows"),
        "m": (int, None, "tuple length; the plane has dimension m-1"),
    }),
    "correct": (cmd_correct, "random error-correction instances", {
        "instances": (int, 200, "number of instances"),
        "min_size": (float, 0.1, "minimal configuration size"),
    }),
    "triangle": (cmd_triangle, "modified triangle inequality on random configurations", {
        "instances": (int, 100, "number of instances"),
        "min_size": (float, 0.1, "minimal size of the reduced configuration"),
        "ell": (int, None, "replaced step (default random)"),
    }),
    "blowdown": (cmd_blowdown, "dilates of a curve for increasing factors", {
        "curve": (str, "engel-beta", "engel-beta, lift-alpha or extremal"),
        "lambda": (str, None, "covector for --curve extremal"),
        "step": (float, 1e-2, "RK4 step for --curve extremal"),
        "hs": (str, "1,10,100", "dilation factors"),
        "window": (str, "-1,1,21", "tmin,tmax,count"),
        "t_bar": (float, 0.0, "base parameter"),
    }),
    "lines": (cmd_lines, "decide whether two lines stay at finite distance", {
        "preset": (str, None, "'lift' for the two step-4 asymptotes"),
        "base1": (str, None, "base point of the first line"),
        "dir1": (str, None, "direction of the first line"),
        "base2": (str, None, "base point of the second line"),
        "dir2": (str, None, "direction of the second line"),
    }),
    "tangent-check": (cmd_tangent_check, "quotient distances along the Engel geodesic", {
        "t_bar": (float, 0.0, "centre of the window"),
        "delta": (float, 0.5, "half-width of the window"),
        "pairs": (int, 200, "number of random pairs"),
    }),
    "verify-engel": (cmd_verify_engel, "residuals of the explicit Engel geodesic", {
        "tmax": (float, 10.0, "half-width of the grid"),
        "grid": (int, 10000, "number of grid points"),
        "tol": (float, 1e-9, "residual tolerance"),
    }),
    "verify-lift": (cmd_verify_lift, "distance of the step-4 lift to its two asymptotes", {
        "tmax": (float, 40.0, "half-width of the grid"),
        "grid": (int, 801, "number of grid points"),
        "bound": (float, 10.0, "box radius on the matched half-line"),
    }),
    "rough-check": (cmd_rough_check, "abelianization of a rough geodesic in step 2", {
        "points": (str, None, "@file with rows t,coordinates (default: synthetic)"),
        "curve": (str, "noisy-line", "line, noisy-line or circle"),
        "C": (float, 0.5, "additive constant"),
        "samples": (int, 121, "number of synthetic samples"),
        "tmax": (float, 30.0, "synthetic half-window"),
        "step": (float, 1e-3, "RK4 step for the circle"),
    }),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="carnot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        for key, (typ, default, h) in {**COMMON, **opts}.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ,
                           default=argparse.SUPPRESS, help=f"{h} (default: {default})")
        p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option values")
        p.add_argument("--dry-run", dest="dry_run", action="store_true", default=False,
                       help="validate inputs and stop")
    return parser


def resolve_config(command, given):
    """Defaults, then the config file, then explicit flags."""
    opts = {**COMMON, **COMMANDS[command][2]}
    cfg = {k: v[1] for k, v in opts.items()}
    path = given.pop("config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CarnotError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise CarnotError("config must be a JSON object")
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in opts:
                raise CarnotError(f"unknown config key {k!r} for {command}")
            cfg[key] = v if v is None or isinstance(v, list) else opts[key][0](v)
    cfg.update(given)
    if cfg["format"] not in ("csv", "svg"):
        raise CarnotError(f"unknown format {cfg['format']!r}")
    return cfg


def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def render_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.header)
    for row in result.rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def render_svg(curves, size=480, pad=30):
    """Polylines of planar curves, horizontal axis ``x2`` and vertical ``-x1``."""
    pts = [np.column_stack([c[:, 1], -c[:, 0]]) for c in curves]
    allp = np.vstack(pts)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = float(max(np.max(hi - lo), 1e-12))
    scale = (size - 2 * pad) / span

    def xy(p):
        return pad + (p[0] - lo[0]) * scale, size - pad - (p[1] - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    ox, oy = xy(np.clip(np.zeros(2), lo, hi))
    out.append(f'<line x1="{pad}" y1="{oy:.3f}" x2="{size - pad}" y2="{oy:.3f}" stroke="gray"/>')
    out.append(f'<line x1="{ox:.3f}" y1="{pad}" x2="{ox:.3f}" y2="{size - pad}" stroke="gray"/>')
    for p in pts:
        coords = " ".join("{:.3f},{:.3f}".format(*xy(q)) for q in p)
        out.append(f'<polyline fill="none" stroke="black" points="{coords}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _output_path(path):
    if path is None:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    return path


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "dry_run")}
    try:
        cfg = resolve_config(ns.command, given)
        cfg["dry_run"] = ns.dry_run
        result = COMMANDS[ns.command][0](cfg)
        if result is None:
            print("ok", file=stderr)
            return 0
        if cfg["format"] == "svg":
            if not result.curves:
                raise CarnotError(f"{ns.command} has no curve to plot")
            text = render_svg(result.curves)
        else:
            text = render_csv(result)
        path = _output_path(cfg["out"])
        if path is None:
            stdout.write(text)
        else:
            try:
                with open(path, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            except OSError as exc:
                raise CarnotError(f"cannot write {path}: {exc}") from None
    except (CarnotError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    for k, v in result.summary.items():
        print(f"{k}: {v}", file=stderr)
    if result.failure:
        print(f"FAILED: {result.failure}", file=stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
