"""Command-line front end.

Exit codes: 0 success, 1 failed checks, 2 bad input, 3 hyperbolicity
violation, 4 germ fit failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .birkhoff import classical_bnf, diophantine_check, interpolating_hamiltonian, non_resonance_check
from .geometry import (
    CertificationError,
    GeometryError,
    GermExtractionError,
    GlancingError,
    HyperbolicityError,
    escape_partition,
    kappa_germ,
    load_obstacles,
    phase_grid,
    poincare_linearization,
    trapped_ray,
)
from .lattice import (
    assign_clusters,
    cluster,
    enumerate_strings,
    records_to_csv,
    records_to_json,
)
from .model import LatticeWindow, NormalFormData, NormalFormError, solve_string

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_HYPERBOLIC, EXIT_FIT = 0, 1, 2, 3, 4


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_normal_form(path: str, validate: bool = True) -> NormalFormData:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return NormalFormData.from_dict(data, validate=validate)


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _window(args) -> LatticeWindow:
    A, B = args.window
    if not (A > 0 and B > 0):
        raise InputError(f"window needs A, B > 0, got {A}, {B}")
    return LatticeWindow(A, B)


# -- geometry ---------------------------------------------------------------------------

def _overlay(path: str | None, r: int, n: int):
    """Quantum corrections ``F_1..F_r`` from an overlay file, else zero."""
    F = [dict() for _ in range(r + 1)]
    if path is None:
        print(f"notice: no overlay given; quantum corrections F_1..F_{r} set to zero", file=sys.stderr)
        return F
    data = _read_json(path)
    blocks = data.get("F", []) if isinstance(data, dict) else data
    for block in blocks:
        j = int(block["j"])
        if not 1 <= j <= r:
            raise InputError(f"{path}: overlay block j = {j} outside 1..{r}")
        for t in block.get("terms", []):
            a = tuple(int(e) for e in t["iexp"])
            if len(a) != n:
                raise InputError(f"{path}: overlay exponent {list(a)} has wrong length")
            F[j][a] = F[j].get(a, 0) + complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))
    return F


def cmd_geometry(args) -> int:
    try:
        c1, c2 = load_obstacles(args.obstacles)
    except OSError as exc:
        raise InputError(f"cannot read {args.obstacles}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.obstacles}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except ValueError as exc:  # TOML decode errors carry line/column in the message
        raise InputError(f"{args.obstacles}: {exc}") from exc
    P = trapped_ray(c1, c2)
    lin = poincare_linearization(P)
    r = args.order
    germ_order = min(2 * r, 8)
    germ = kappa_germ(P, germ_order, method=args.germ_method, rtol=args.tol_fit, lin=lin)
    mu = math.log(lin.nu)
    report = {
        "d": P.d,
        "a1": [float(v) for v in P.foot1],
        "a2": [float(v) for v in P.foot2],
        "t1": P.t1,
        "t2": P.t2,
        "s1": P.s1,
        "nu": lin.nu,
        "mu": mu,
        "det": lin.det,
        "step_agreement": lin.step_agreement,
        "germ": {
            "method": args.germ_method,
            "order": germ_order,
            "symplectic_defect": float(germ.symplectic_defect()),
            "terms": [[{"exp": list(e), "re": complex(c).real}
                       for (e, _), c in sorted(comp.terms().items()) if sum(e) <= 3]
                      for comp in germ.components],
        },
    }
    F0 = None
    if germ_order >= 4:
        p = interpolating_hamiltonian(germ)
        F0 = classical_bnf(p, germ_order // 2).F0
        report["F0"] = [{"iexp": list(e), "re": complex(c).real}
                        for (e, _), c in sorted(F0.series().terms().items())]
        # the germ's own exponent, consistent with the linear part of F0
        report["mu_germ"] = float(F0.mu[0])
    if args.emit_nf:
        F = _overlay(args.overlay, r, 1)
        F[0] = {} if F0 is None else {e: complex(c).real for (e, _), c in F0.series().terms().items()}
        mu_nf = mu if F0 is None else float(F0.mu[0])
        nf = NormalFormData.from_terms(P.d, [mu_nf], F, r)
        with open(args.emit_nf, "w") as fh:
            fh.write(nf.dumps() + "\n")
    if args.format == "json":
        text = json.dumps(report, indent=1) + "\n"
    else:
        lines = [
            f"d = {P.d:#.10g}",
            f"a1 = ({P.foot1[0]:#.10g}, {P.foot1[1]:#.10g})  t1 = {P.t1:#.10g}",
            f"a2 = ({P.foot2[0]:#.10g}, {P.foot2[1]:#.10g})  t2 = {P.t2:#.10g}",
            f"nu = {lin.nu:#.10g}  mu = ln nu = {mu:#.10g}",
            f"det Dkappa - 1 = {lin.det - 1:.3e}  step agreement = {lin.step_agreement:.3e}",
            f"germ ({args.germ_method}, order {germ_order}): symplectic defect {report['germ']['symplectic_defect']:.3e}",
        ]
        if F0 is not None:
            coeffs = ", ".join(f"iota^{e[0]}: {_num(complex(c).real)}"
                               for (e, _), c in sorted(F0.series().terms().items()))
            lines.append(f"F0 = {coeffs}")
        text = "\n".join(lines) + "\n"
    if args.escape_grid:
        n = args.escape_grid
        s, xi = phase_grid(P, n, n)
        part = escape_partition(P, s, xi, args.escape_returns, shape=(n, n))
        # the partition table owns stdout; the report moves to stderr
        if args.output:
            _emit(text, args.output)
        else:
            sys.stderr.write(text)
        part.to_csv(sys.stdout)
        if args.svg:
            from .plotting import escape_svg
            escape_svg(part, args.svg)
        return EXIT_OK
    _emit(text, args.output)
    return EXIT_OK


# -- strings ----------------------------------------------------------------------------

def _coeff_rows(nf, alphas, r):
    rows = []
    for alpha in alphas:
        s = solve_string(nf, alpha, r=r)
        rows.append({"alpha": ";".join(map(str, alpha)),
                     "a": [[complex(c).real, complex(c).imag] for c in s.a]})
    return rows


def cmd_strings(args) -> int:
    nf = load_normal_form(args.nf)
    r = args.order or nf.r
    if r < 1:
        raise InputError("--order must be >= 1")
    use = nf.weight_filter(r) if r < nf.r else nf
    window = _window(args)
    need = math.ceil(window.B * nf.d / math.pi)
    if args.kmax < need:
        raise InputError(f"--kmax {args.kmax} is below ceil(B d / pi) = {need}")
    records = enumerate_strings(use, window, args.kmax, args.alpha_log_const, args.oracle,
                                tol_newton=args.tol_newton, r=r)
    if records:
        reports = cluster(use, records, rel_tol=args.tol_cluster)
        records = assign_clusters(records, reports)
    alphas = sorted({rec.alpha for rec in records})
    ratio = r if args.oracle else None
    if args.format == "json":
        text = records_to_json(records, ratio, d=nf.d, r=r, mu=[float(m) for m in nf.mu],
                               strings=_coeff_rows(use, alphas, r)) + "\n"
    else:
        text = records_to_csv(records, ratio)
        if args.coefficients:
            lines = ["alpha,j,re,im"]
            for row in _coeff_rows(use, alphas, r):
                for j, (re, im) in enumerate(row["a"]):
                    lines.append(f"{row['alpha']},{j},{_num(re)},{_num(im)}")
            _emit("\n".join(lines) + "\n", args.coefficients)
    _emit(text, args.output)
    if args.svg:
        from .plotting import lattice_svg
        lattice_svg(records, args.svg)
    if args.oracle:
        failed = sum(rec.oracle_error is not None for rec in records)
        ratios = [rec.ratio(r) for rec in records if rec.ratio(r) is not None]
        worst = max(ratios) if ratios else float("nan")
        print(f"oracle: {len(records) - failed}/{len(records)} converged, max ratio {worst:.3e}",
              file=sys.stderr)
    return EXIT_OK


# -- check ------------------------------------------------------------------------------

def cmd_check(args) -> int:
    nf = load_normal_form(args.nf, validate=False)
    lines, ok = [], True

    def line(name, passed, detail=""):
        nonlocal ok
        ok = ok and passed
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}" + (f": {detail}" if detail else ""))

    if np.any(nf.mu <= 0):
        line("exponents", False, f"mu must be positive, got {list(map(float, nf.mu))}")
    nr = non_resonance_check(nf.mu, args.resonance_order)
    line(f"non-resonance |k| <= {args.resonance_order}", nr.passed,
         "" if nr.passed else f"witness k = {nr.witness}, |k.mu| = {nr.value:.3e}")
    dio = diophantine_check(nf.mu, args.dioph_m, args.dioph_D, args.dioph_C)
    line(f"diophantine m = {args.dioph_m}, D = {args.dioph_D:g}, C = {args.dioph_C:g}", dio.passed,
         f"min |mu.gamma| = {dio.value:.6g} >= {dio.bound:.6g}" if dio.passed
         else f"witness {dio.witness}, |mu.gamma| = {dio.value:.3e} < {dio.bound:.3e}")
    f10 = complex(nf.F1_0()) if nf.r >= 1 else 0j
    real = abs(f10.imag) <= 1e-12 * max(1.0, abs(f10))
    line("F1(0) real", real,
         "" if real else f"Im F1(0) = {f10.imag:g}; flux conservation (unitarity of the scattering data) forces F1(0) real")
    A, B = args.window
    need = math.ceil(B * nf.d / math.pi) if B > 0 else 0
    sane = A > 0 and B > 0 and nf.d > 0 and args.kmax >= need
    line("window", sane, f"A = {A:g}, B = {B:g}, kmax = {args.kmax} (needs >= {need})")
    try:
        nf.validate()
        line("normal form fields", True)
    except NormalFormError as exc:
        if exc.field != "F[1]":
            line("normal form fields", False, str(exc))
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resforge", description="Resonance strings for two convex obstacles.")
    ap.add_argument("--version", action="version", version=f"resforge {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--order", type=int, default=None, help="order r of the expansion")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
        p.add_argument("--svg", default=None, metavar="PATH", help="write an SVG figure")

    g = sub.add_parser("geometry", help="trapped ray, linearization, germ and normal form of an obstacle pair")
    g.add_argument("obstacles", help="JSON or TOML obstacle file")
    common(g)
    g.add_argument("--germ-method", choices=("jet", "fit"), default="jet")
    g.add_argument("--tol-fit", type=float, default=1e-6, help="stencil agreement for --germ-method fit")
    g.add_argument("--emit-nf", default=None, metavar="PATH", help="write the normal-form file")
    g.add_argument("--overlay", default=None, metavar="PATH", help="quantum corrections F_j, j >= 1")
    g.add_argument("--escape-grid", type=int, default=0, metavar="N", help="N x N escape partition CSV on stdout")
    g.add_argument("--escape-returns", type=int, default=5, metavar="J")

    s = sub.add_parser("strings", help="string coefficients and the resonance lattice of a normal form")
    s.add_argument("nf", help="normal-form JSON file")
    common(s)
    s.add_argument("--window", nargs=2, type=float, default=(1.0, 10.0), metavar=("A", "B"))
    s.add_argument("--kmax", type=int, default=100)
    s.add_argument("--alpha-log-const", type=float, default=1.0, help="C in |alpha| <= C ln k")
    s.add_argument("--oracle", action="store_true", help="attach Newton roots and the ratio column")
    s.add_argument("--tol-newton", type=float, default=1e-12)
    s.add_argument("--tol-cluster", type=float, default=1e-9, help="relative clustering tolerance")
    s.add_argument("--coefficients", default=None, metavar="PATH", help="CSV of a_j per alpha (csv format)")

    c = sub.add_parser("check", help="non-resonance, Diophantine, F1(0) reality and window checks")
    c.add_argument("nf", help="normal-form JSON file")
    c.add_argument("--window", nargs=2, type=float, default=(1.0, 10.0), metavar=("A", "B"))
    c.add_argument("--kmax", type=int, default=100)
    c.add_argument("--resonance-order", type=int, default=6)
    c.add_argument("--dioph-m", type=int, default=6)
    c.add_argument("--dioph-D", type=float, default=1.0)
    c.add_argument("--dioph-C", type=float, default=1.0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "order", None) is None and args.command == "geometry":
        args.order = 2
    if getattr(args, "order", None) is not None and args.order < 1:
        print("error: --order must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    handlers = {"geometry": cmd_geometry, "strings": cmd_strings, "check": cmd_check}
    try:
        return handlers[args.command](args)
    except (InputError, NormalFormError, GeometryError, CertificationError, GlancingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HyperbolicityError as exc:
        print(f"error: hyperbolicity violated: {exc}", file=sys.stderr)
        return EXIT_HYPERBOLIC
    except GermExtractionError as exc:
        print(f"error: germ fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
