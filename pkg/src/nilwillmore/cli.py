"""Command-line reports, verification suites, generation and minimization.

Every command builds a :class:`ReportEnvelope` and writes it as CSV (header
row, ``#`` metadata lines carrying parameters, tolerances and assertion
outcomes) and optionally as JSON with the same field names. Exit codes:
0 when every assertion passes, 1 on an assertion failure, 2 on a usage
error or unreadable input.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cmc_family, revolution, s2xr, variational, weierstrass

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

DEFAULT_QUAD_TOL = 1e-10
DEFAULT_ODE_TOL = 1e-10
DEFAULT_ORDER = 4

ENERGY_TOL = 1e-8
CLOSED_QUAD_RTOL = 1e-8
ISO_TOL = 1e-8
ORDER_SLACK = 0.3
EXACT_IDENTITY_TOL = 1e-12
DISTANCE_TOL = 1e-6
MEAN_CURVATURE_TOL = 1e-6
IDENTITY_TOL = 1e-6
IMAG_TOL = 1e-6
LOWER_BOUND_SLACK = 1e-9
S2XR_TOL = 1e-6


class UsageError(Exception):
    pass


@dataclass
class Assertion:
    name: str
    passed: bool
    value: float
    tol: float


@dataclass
class ReportEnvelope:
    """Command name, parameters, result table, tolerances and assertion outcomes."""

    command: str
    params: dict
    columns: list
    rows: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    def check(self, name: str, value: float, tol: float, passed: bool | None = None) -> None:
        """Record an assertion; by default it passes when |value| <= tol."""
        if passed is None:
            passed = bool(np.isfinite(value) and abs(value) <= tol)
        self.assertions.append(Assertion(name, bool(passed), float(value), float(tol)))

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def failures(self) -> list:
        return [a for a in self.assertions if not a.passed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# command={self.command}\n")
        for k, v in self.params.items():
            buf.write(f"# param.{k}={_fmt_meta(v)}\n")
        for k, v in self.tolerances.items():
            buf.write(f"# tol.{k}={_fmt(v)}\n")
        for a in self.assertions:
            status = "PASS" if a.passed else "FAIL"
            buf.write(f"# assert.{a.name}={status} value={_fmt(a.value)} tol={_fmt(a.tol)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        obj = {
            "command": self.command,
            "params": self.params,
            "tolerances": self.tolerances,
            "columns": self.columns,
            "rows": [{c: _json_value(row[c]) for c in self.columns} for row in self.rows],
            "assertions": [{"name": a.name, "passed": a.passed, "value": _json_value(a.value),
                            "tol": a.tol} for a in self.assertions],
        }
        return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _fmt_meta(v) -> str:
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return _fmt(v)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _fan_out(fn, items, jobs: int) -> list:
    """Ordered map, in worker processes when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- cmc-report -------------------------------------------------------------------

def _cmc_row(args: tuple) -> dict:
    H, tol = args
    a_c = cmc_family.area(H, "closed_form").value
    a_q = cmc_family.area(H, "quadrature", tol=tol)
    v_c = cmc_family.volume(H, "closed_form").value
    v_q = cmc_family.volume(H, "quadrature", tol=tol)
    e = cmc_family.spinor_energy(H, tol=tol)
    w = cmc_family.willmore(H, "quadrature")
    iso = v_q.value - 4 * np.pi / H + (4 * H * H - 3) / (8 * H) * a_q.value
    iso_exact = iso + 2 * np.pi / H
    err = max(a_q.err_estimate, v_q.err_estimate, e.err_estimate, w.err_estimate)
    return {"H": H, "A_closed": a_c, "A_quad": a_q.value, "V_closed": v_c, "V_quad": v_q.value,
            "E": e.value, "W_quad": w.value, "iso_residual": iso,
            "iso_residual_exact": iso_exact, "err": err}


def cmd_cmc_report(ns) -> ReportEnvelope:
    rep = ReportEnvelope(
        "cmc-report", {"H": ns.H, "quad_tol": ns.quad_tol, "iso_exact": ns.iso_exact},
        ["H", "A_closed", "A_quad", "V_closed", "V_quad", "E", "W_quad", "iso_residual",
         "iso_residual_exact", "err"],
        tolerances={"quadrature": ns.quad_tol, "energy": ENERGY_TOL,
                    "closed_vs_quadrature_rel": CLOSED_QUAD_RTOL, "isoperimetric": ISO_TOL})
    for H in ns.H:
        if not (math.isfinite(H) and H > 0):
            raise UsageError(f"H must be positive, got {H!r}")
    rep.rows = _fan_out(_cmc_row, [(H, ns.quad_tol) for H in ns.H], ns.jobs)
    iso_key = "iso_residual_exact" if ns.iso_exact else "iso_residual"
    for row in rep.rows:
        tag = f"H={_fmt(row['H'])}"
        rep.check(f"energy[{tag}]", row["E"] - np.pi, ENERGY_TOL)
        rep.check(f"area[{tag}]", (row["A_quad"] - row["A_closed"]) / row["A_closed"], CLOSED_QUAD_RTOL)
        rep.check(f"volume[{tag}]", (row["V_quad"] - row["V_closed"]) / row["V_closed"], CLOSED_QUAD_RTOL)
        rep.check(f"{iso_key}[{tag}]", row[iso_key], ISO_TOL)
    return rep


# -- verify-identities ------------------------------------------------------------

def _convergence_rows(study: dict, order: int, sizes: list, rep: ReportEnvelope,
                      exact: tuple = ()) -> None:
    rep.columns = ["name"] + [f"sup_n{m}" for m in sizes] + [f"order_{k}" for k in range(1, len(sizes))]
    for name, res in study.items():
        row = {"name": name}
        for m, v in zip(sizes, res["norms"]):
            row[f"sup_n{m}"] = v
        for k, o in enumerate(res["orders"], start=1):
            row[f"order_{k}"] = o
        rep.rows.append(row)
        if name in exact:
            rep.check(f"{name}[exact]", max(res["norms"]), EXACT_IDENTITY_TOL)
            continue
        for k, o in enumerate(res["orders"], start=1):
            rep.check(f"{name}[order_{k}]", o - order, ORDER_SLACK)


def _check_grid(ns) -> None:
    if ns.grid < 2 * ns.order + 5:
        raise UsageError(f"--grid must be at least {2 * ns.order + 5} for order {ns.order}")
    if not (math.isfinite(ns.H) and ns.H > 0):
        raise UsageError(f"H must be positive, got {ns.H!r}")


def cmd_verify_identities(ns) -> ReportEnvelope:
    _check_grid(ns)
    sizes = weierstrass.nested_sizes(ns.grid, ns.levels)
    rep = ReportEnvelope(
        "verify-identities", {"H": ns.H, "grid": ns.grid, "order": ns.order, "levels": ns.levels},
        [], tolerances={"order_slack": ORDER_SLACK, "exact_identity": EXACT_IDENTITY_TOL})
    study = weierstrass.sphere_identity_study(ns.H, ns.grid, ns.order, levels=ns.levels)
    _convergence_rows(study, ns.order, sizes, rep, exact=("metric",))
    return rep


# -- el-residual --------------------------------------------------------------------

def cmd_el_residual(ns) -> ReportEnvelope:
    _check_grid(ns)
    sizes = weierstrass.nested_sizes(ns.grid, ns.levels)
    rep = ReportEnvelope(
        "el-residual", {"H": ns.H, "grid": ns.grid, "order": ns.order, "levels": ns.levels},
        [], tolerances={"order_slack": ORDER_SLACK})
    study = {"el_residual": variational.el_residual_study(ns.H, ns.grid, ns.order, levels=ns.levels)}
    _convergence_rows(study, ns.order, sizes, rep)
    return rep


# -- profile-ode ------------------------------------------------------------------

def cmd_profile_ode(ns) -> ReportEnvelope:
    if not (math.isfinite(ns.H) and ns.H > 0):
        raise UsageError(f"H must be positive, got {ns.H!r}")
    curve = revolution.generate_cmc_profile(ns.H, tol=ns.tol, n=ns.n)
    dist = revolution.distance_to_closed_form(curve, ns.H)
    dev = float(np.max(np.abs(revolution.geometry_fields(curve).H - ns.H)))
    rep = ReportEnvelope(
        "profile-ode", {"H": ns.H, "ode_tol": ns.tol, "n": ns.n, "topology": curve.topology,
                        "closed_form_distance": dist},
        ["s", "u", "v", "sigma"],
        tolerances={"ode": ns.tol, "distance": DISTANCE_TOL, "mean_curvature": MEAN_CURVATURE_TOL})
    rep.rows = [{"s": a, "u": b, "v": c, "sigma": d}
                for a, b, c, d in zip(curve.s, curve.u, curve.v, curve.sigma)]
    rep.check("closed_form_distance", dist, DISTANCE_TOL)
    rep.check("mean_curvature_deviation", dev, MEAN_CURVATURE_TOL)
    return rep


# -- energy -------------------------------------------------------------------------

def _load_profile(path: str) -> revolution.ProfileCurve:
    try:
        curve = revolution.read_profile_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except revolution.ProfileFormatError as exc:
        raise UsageError(f"malformed profile CSV {path}: {exc}") from exc
    diag = revolution.closure_and_topology(curve)
    if not diag.closed:
        raise UsageError("; ".join(diag.messages) or "open meridian")
    return curve


def cmd_energy(ns) -> ReportEnvelope:
    curve = _load_profile(ns.profile)
    r = revolution.report(curve)
    vals = r.as_dict()
    cols = ["E_direct", "E_reduced", "E_imag", "W", "area", "volume", "chi"]
    rep = ReportEnvelope(
        "energy", {"profile": ns.profile, "n": curve.n, "topology": curve.topology},
        cols + [f"err_{c}" for c in cols if c != "chi"],
        tolerances={"identity": IDENTITY_TOL, "imaginary_part": IMAG_TOL,
                    "lower_bound_slack": LOWER_BOUND_SLACK})
    row = dict(vals)
    for c in cols:
        if c != "chi":
            row[f"err_{c}"] = r.errors.get(c, float("nan"))
    rep.rows = [row]
    rep.check("direct_vs_reduced", vals["E_direct"] - vals["E_reduced"], IDENTITY_TOL)
    rep.check("imaginary_part", vals["E_imag"], IMAG_TOL)
    if curve.topology == "sphere":
        gap = vals["E_reduced"] - np.pi
        rep.check("lower_bound", gap, LOWER_BOUND_SLACK, passed=gap >= -LOWER_BOUND_SLACK)
    return rep


# -- minimize -------------------------------------------------------------------------

def cmd_minimize(ns) -> ReportEnvelope:
    curve = _load_profile(ns.profile)
    if curve.topology != "sphere":
        raise UsageError("minimize needs a sphere meridian")
    opts = variational.MinimizeOptions(max_iter=ns.iters, n_modes=ns.modes)
    final, trace = variational.minimize_energy(curve, opts)
    rep = ReportEnvelope(
        "minimize", {"profile": ns.profile, "iters": ns.iters, "modes": ns.modes,
                     "converged": trace.converged, "message": trace.message,
                     "final_E": float(trace.energies[-1])},
        ["iter", "E", "violation", "step"],
        tolerances={"energy_change": opts.tol_E, "gradient": opts.tol_grad,
                    "closure": opts.tol_c, "fd_step": opts.fd_step})
    rep.rows = [{"iter": it, "E": E, "violation": v, "step": st}
                for it, E, v, st in trace.iterations]
    rep.check("monotone", float(np.max(np.diff(trace.energies), initial=0.0)), 0.0,
              passed=trace.is_monotone())
    rep.check("no_failure", float(trace.failed), 0.0, passed=not trace.failed)
    if ns.curve_out:
        revolution.write_profile_csv(final, ns.curve_out)
    return rep


# -- s2xr-report ------------------------------------------------------------------------

def _s2xr_row(args: tuple) -> dict:
    h, tol = args
    area, ik = s2xr.closed_forms(h)
    value = s2xr.willmore_type_value(h)
    prof = s2xr.generate_sphere(h, tol)
    a_q, ik_q = s2xr.area_quadrature(prof), s2xr.khat_quadrature(prof)
    return {"h": h, "area": area, "int_khat": ik, "willmore_type": value,
            "abs_err": abs(value - 16 * np.pi), "area_quad": a_q, "int_khat_quad": ik_q,
            "willmore_type_quad": (h * h + 1) * a_q + ik_q}


def cmd_s2xr_report(ns) -> ReportEnvelope:
    for h in ns.h:
        if not (math.isfinite(h) and h > 0):
            raise UsageError(f"h must be positive, got {h!r}")
    rep = ReportEnvelope(
        "s2xr-report", {"h": ns.h, "ode_tol": ns.tol},
        ["h", "area", "int_khat", "willmore_type", "abs_err", "area_quad", "int_khat_quad",
         "willmore_type_quad"],
        tolerances={"ode": ns.tol, "willmore_type": S2XR_TOL, "closed_vs_quadrature": S2XR_TOL})
    rep.rows = _fan_out(_s2xr_row, [(h, ns.tol) for h in ns.h], ns.jobs)
    for row in rep.rows:
        tag = f"h={_fmt(row['h'])}"
        rep.check(f"willmore_type[{tag}]", row["abs_err"], S2XR_TOL)
        rep.check(f"area_quadrature[{tag}]", row["area_quad"] - row["area"], S2XR_TOL)
        rep.check(f"int_khat_quadrature[{tag}]", row["int_khat_quad"] - row["int_khat"], S2XR_TOL)
    return rep


# -- parser -----------------------------------------------------------------------------

COMMANDS = {
    "cmc-report": cmd_cmc_report,
    "verify-identities": cmd_verify_identities,
    "profile-ode": cmd_profile_ode,
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "s2xr-report": cmd_s2xr_report,
    "el-residual": cmd_el_residual,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _output_flags(p) -> None:
    p.add_argument("--out", help="CSV report file (default: standard output)")
    p.add_argument("--json", nargs="?", const="-", default=None, metavar="FILE",
                   help="also write the JSON mirror (to FILE, or standard output without one)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nilwillmore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cmc-report", help="closed-form vs quadrature functionals of S_H")
    p.add_argument("--H", type=float, nargs="+", required=True)
    p.add_argument("--quad-tol", type=float, default=DEFAULT_QUAD_TOL, help="default 1e-10")
    p.add_argument("--iso-exact", action="store_true",
                   help="assert the area-volume relation with constant 2 pi instead of 4 pi")
    p.add_argument("--jobs", type=int, default=1)
    _output_flags(p)

    for name, hlp in (("verify-identities", "Weierstrass identity residuals under refinement"),
                      ("el-residual", "Euler-Lagrange residual under refinement")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--H", type=float, required=True)
        p.add_argument("--grid", type=int, required=True, help="coarsest grid size per side")
        p.add_argument("--order", type=int, choices=(2, 4), default=DEFAULT_ORDER)
        p.add_argument("--levels", type=int, default=3)
        _output_flags(p)

    p = sub.add_parser("profile-ode", help="cmc meridian by shooting, compared with the closed form")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_ODE_TOL, help="default 1e-10")
    p.add_argument("--n", type=int, default=4001, help="number of arclength samples")
    _output_flags(p)

    p = sub.add_parser("energy", help="functionals of a profile CSV")
    p.add_argument("--profile", required=True)
    _output_flags(p)

    p = sub.add_parser("minimize", help="descend the spinor energy from a sphere profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--modes", type=int, default=12)
    p.add_argument("--curve-out", help="CSV file for the final meridian")
    _output_flags(p)

    p = sub.add_parser("s2xr-report", help="cmc spheres in S^2 x R")
    p.add_argument("--h", type=float, nargs="+", required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_ODE_TOL, help="default 1e-10")
    p.add_argument("--jobs", type=int, default=1)
    _output_flags(p)
    return parser


def _write(text: str, path: str | None, stdout) -> None:
    if path is None or path == "-":
        stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def run(argv=None, stdout=None, stderr=None) -> int:
    """Run one command; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        ns = build_parser().parse_args(argv)
        rep = COMMANDS[ns.command](ns)
    except UsageError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_PASS if exc.code in (0, None) else EXIT_USAGE
    if ns.json != "-" or ns.out is not None:
        _write(rep.to_csv(), ns.out, stdout)
    if ns.json is not None:
        _write(rep.to_json(), ns.json, stdout)
    for a in rep.failures():
        stderr.write(f"FAIL {a.name}: value {_fmt(a.value)} exceeds tolerance {_fmt(a.tol)}\n")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())
