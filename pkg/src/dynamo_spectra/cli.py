"""Command-line interface: ``dynamo-spectra {toy,spectrum,sweep,critical,crossings}``.

CSV numbers are written with 17 significant digits so they round-trip
exactly; ``#`` lines carry the configuration.  Exit codes: 0 ok, 2 usage or
configuration error, 3 eigensolver failure, 4 bracketing failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import toy2x2
from .branch import (
    AffineFamily,
    LostBracket,
    NoSignChange,
    TransitionKind,
    critical_c,
    detect_transitions,
    figure_window,
    find_critical_bracket,
    match_branches,
    refine_ep,
    sweep_family,
)
from .eig import BACKENDS, NonConvergence, dense_spectrum
from .operator import AlphaProfile, BoundaryCondition, Scheme, assemble, make_grid
from .pencil import IllConditioned, NotDefective, ProfileVanishes, build_pencil, solve_keldysh_chain

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_BRACKET = 4


class UsageError(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- profiles ----------------------------------------------------------------------


def parse_alpha(spec: str) -> tuple[float, ...]:
    """``poly:a0,a1,...`` or ``const:v`` to polynomial coefficients."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise UsageError(f"alpha spec {spec!r} must look like poly:a0,a1,... or const:v")
    try:
        values = tuple(float(v) for v in body.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"bad number in alpha spec {spec!r}") from None
    if kind == "poly" and values:
        return values
    if kind == "const" and len(values) == 1:
        return values
    raise UsageError(f"alpha spec {spec!r} must look like poly:a0,a1,... or const:v")


def parse_profile_file(text: str) -> tuple[tuple[float, ...], float | None]:
    """Read ``coeffs=`` and ``C=`` lines (``#`` comments, optional brackets)."""
    coeffs, c = None, None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"profile file line {raw!r} is not key=value")
        key = key.strip()
        value = value.strip().strip("[]")
        try:
            if key == "coeffs":
                coeffs = tuple(float(v) for v in value.replace(" ", "").split(",") if v)
            elif key == "C":
                c = float(value)
            else:
                raise UsageError(f"unknown profile file key {key!r}")
        except ValueError:
            raise UsageError(f"bad number in profile file line {raw!r}") from None
    if not coeffs:
        raise UsageError("profile file has no coeffs= line")
    return coeffs, c


@dataclass(frozen=True)
class RunConfig:
    profile: AlphaProfile
    alpha_text: str
    l: int
    bc: BoundaryCondition
    n: int
    scheme: Scheme
    backend: str

    def header(self, command: str) -> list[str]:
        return [
            f"# dynamo-spectra {command}",
            f"# alpha={self.alpha_text}",
            f"# C={fmt(self.profile.c)}",
            f"# l={self.l}",
            f"# bc={self.bc}",
            f"# n={self.n}",
            f"# scheme={self.scheme}",
            f"# backend={self.backend}",
        ]

    def grid(self):
        return make_grid(self.n, self.scheme)

    def family(self) -> AffineFamily:
        return AffineFamily.from_profile(self.profile, self.l, self.grid(), self.bc)


def run_config(args) -> RunConfig:
    if args.alpha and args.profile_file:
        raise UsageError("give either --alpha or --profile-file, not both")
    c = 1.0
    if args.profile_file:
        try:
            with open(args.profile_file, encoding="utf-8") as fh:
                coeffs, file_c = parse_profile_file(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read profile file: {exc}") from None
        if file_c is not None:
            c = file_c
        text = "poly:" + ",".join(fmt(a) for a in coeffs)
    else:
        coeffs = parse_alpha(args.alpha or "const:1")
        text = args.alpha or "const:1"
    if args.C is not None:
        c = args.C
    if args.l < 1:
        raise UsageError("--l must be >= 1")
    if args.n < 8:
        raise UsageError("--n must be >= 8")
    profile = AlphaProfile(coeffs, c)
    return RunConfig(profile, text, args.l, BoundaryCondition(args.bc), args.n,
                     Scheme(args.scheme), args.backend)


# -- commands ----------------------------------------------------------------------


def cmd_toy(args, out: TextIO) -> int:
    p = toy2x2.ToyPoint(args.e0, args.f, args.b1, args.b2)
    cls = toy2x2.classify_point(p, args.tol)
    em, ep = toy2x2.eigenvalues(p)
    rows = [
        ("e_minus_re", fmt(em.real)), ("e_minus_im", fmt(em.imag)),
        ("e_plus_re", fmt(ep.real)), ("e_plus_im", fmt(ep.imag)),
        ("delta", fmt(cls.delta)), ("regime", str(cls.regime)),
        ("eta", toy2x2.eta_label(cls.eta)),
    ]
    if cls.krein_types is not None:
        rows += [("krein_minus", str(cls.krein_types[0])), ("krein_plus", str(cls.krein_types[1]))]
    if cls.regime is toy2x2.Regime.EXCEPTIONAL_CONE:
        jd = toy2x2.jordan_at_ep(p, args.tol)
        rows.append(("E", fmt(jd.d[0, 0].real)))
        for (i, j), v in np.ndenumerate(jd.s):
            rows.append((f"S{i + 1}{j + 1}", f"{fmt(v.real)}{'+' if v.imag >= 0 else '-'}{fmt(abs(v.imag))}j"))
        res = toy2x2.jordan_chain_check(jd.d, jd.d[0, 0])
        rows.append(("chain_residual", fmt(max(res))))
    if args.format == "csv":
        out.write("key,value\n")
        for k, v in rows:
            out.write(f"{k},{v}\n")
    else:
        width = max(len(k) for k, _ in rows)
        for k, v in rows:
            out.write(f"{k:<{width}}  {v}\n")
    return EXIT_OK


def _spectrum_rows(spec, out):
    out.write("index,re_lambda,im_lambda,residual\n")
    for i, (lam, res) in enumerate(zip(spec.eigenvalues, spec.residuals)):
        out.write(f"{i},{fmt(lam.real)},{fmt(lam.imag)},{fmt(res)}\n")


def cmd_spectrum(args, out: TextIO) -> int:
    cfg = run_config(args)
    op = assemble(cfg.profile, cfg.l, cfg.grid(), cfg.bc)
    for line in cfg.header("spectrum"):
        out.write(line + "\n")
    try:
        spec = dense_spectrum(op.matrix, vectors=not args.no_residuals, backend=cfg.backend)
    except NonConvergence as exc:
        out.write(f"# ERROR {exc}\n")
        if exc.partial is not None:
            _spectrum_rows(exc.partial, out)
        return EXIT_SOLVER
    _spectrum_rows(spec, out)
    return EXIT_OK


def _sweep_grid(args) -> np.ndarray | None:
    if args.c_max is None:
        return None
    if args.count < 1 or args.c_max < args.c_min or (args.count > 1 and args.c_max == args.c_min):
        raise UsageError("empty C range: need --c-max > --c-min and --count >= 2")
    return np.linspace(args.c_min, args.c_max, args.count)


def cmd_sweep(args, out: TextIO) -> int:
    cfg = run_config(args)
    grid_c = _sweep_grid(args)
    family = cfg.family()
    if grid_c is None:
        window = figure_window(family, m=args.branches, points=args.count,
                               threads=args.threads, backend=cfg.backend)
        res, branches = window.sweep, window.branches
    else:
        res = sweep_family(family, grid_c, threads=args.threads, backend=cfg.backend)
        branches = match_branches(res, min(args.branches, min(len(s) for s in res.spectra)))
    im_tol = args.im_tol if args.im_tol is not None else res.default_im_tol()
    for line in cfg.header("sweep"):
        out.write(line + "\n")
    out.write(f"# c_min={fmt(res.c_values[0])}\n# c_max={fmt(res.c_values[-1])}\n")
    out.write(f"# count={len(res.c_values)}\n# branches={len(branches)}\n# im_tol={fmt(im_tol)}\n")
    for i in res.failed:
        out.write(f"# NONCONVERGED C={fmt(res.c_values[i])}\n")
    out.write("branch_id,C,re_lambda,im_lambda\n")
    for b in branches:
        for c, lam in zip(b.c, b.values):
            out.write(f"{b.id},{fmt(c)},{fmt(lam.real)},{fmt(lam.imag)}\n")
    code = EXIT_SOLVER if res.failed else EXIT_OK
    if args.detect_transitions:
        for ev in detect_transitions(branches, im_tol):
            if args.refine:
                try:
                    ev = refine_ep(ev, family, backend=cfg.backend, fit=False)
                except LostBracket as exc:
                    out.write(f"# LOSTBRACKET {fmt(ev.c_low)} {fmt(ev.c_high)} {exc}\n")
                    code = max(code, EXIT_BRACKET)
            out.write(
                f"# EVENT {ev.kind} {fmt(ev.c_star)} {fmt(ev.lambda_star.real)} "
                f"{fmt(ev.lambda_star.imag)}\n"
            )
    return code


def cmd_critical(args, out: TextIO) -> int:
    cfg = run_config(args)
    family = cfg.family()
    if (args.c_low is None) != (args.c_high is None):
        raise UsageError("give both --c-low and --c-high, or neither")
    bracket = (args.c_low, args.c_high) if args.c_low is not None else None
    try:
        if bracket is None:
            bracket = find_critical_bracket(family, backend=cfg.backend)
        res = critical_c(family, bracket, backend=cfg.backend)
    except NoSignChange as exc:
        sys.stderr.write(f"NoSignChange: {exc}\n")
        return EXIT_BRACKET
    if args.format == "csv":
        for line in cfg.header("critical"):
            out.write(line + "\n")
        out.write("c_c,onset,re_lambda,im_lambda\n")
        out.write(f"{fmt(res.c_c)},{res.onset},{fmt(res.lambda_c.real)},{fmt(abs(res.lambda_c.imag))}\n")
    else:
        out.write(f"C_c = {fmt(res.c_c)}\nonset = {res.onset}\n")
        out.write(f"lambda = {fmt(res.lambda_c.real)} +/- {fmt(abs(res.lambda_c.imag))}i\n")
    return EXIT_OK


def cmd_crossings(args, out: TextIO) -> int:
    """Refined real-to-complex events, optionally with Keldysh chain residuals."""
    cfg = run_config(args)
    grid_c = _sweep_grid(args)
    if grid_c is None:
        raise UsageError("crossings needs --c-max")
    family = cfg.family()
    res = sweep_family(family, grid_c, threads=args.threads, backend=cfg.backend)
    branches = match_branches(res, min(args.branches, min(len(s) for s in res.spectra)))
    im_tol = args.im_tol if args.im_tol is not None else res.default_im_tol()
    for line in cfg.header("crossings"):
        out.write(line + "\n")
    out.write("kind,c_star,re_lambda,im_lambda,exponent,gap,chain_r1,chain_r2,chain_r3\n")
    code = EXIT_OK
    for ev in detect_transitions(branches, im_tol):
        if ev.kind is not TransitionKind.REAL_TO_COMPLEX:
            continue
        try:
            ev = refine_ep(ev, family, backend=cfg.backend)
        except LostBracket as exc:
            out.write(f"# LOSTBRACKET {exc}\n")
            code = EXIT_BRACKET
            continue
        chain = ["nan"] * 3
        if args.chain and ev.kind is TransitionKind.REAL_TO_COMPLEX:
            try:
                pen = build_pencil(cfg.profile.with_c(ev.c_star), cfg.l, cfg.grid(), cfg.bc)
                kc = solve_keldysh_chain(pen, ev.lambda_star)
                chain = [fmt(r) for r in kc.relative_residuals()]
            except (NotDefective, IllConditioned, ProfileVanishes) as exc:
                out.write(f"# CHAIN {type(exc).__name__}: {exc}\n")
        exponent = "nan" if ev.exponent is None else fmt(ev.exponent)
        gap = "nan" if ev.gap_star is None else fmt(ev.gap_star)
        out.write(
            f"{ev.kind},{fmt(ev.c_star)},{fmt(ev.lambda_star.real)},{fmt(ev.lambda_star.imag)},"
            f"{exponent},{gap},{','.join(chain)}\n"
        )
    return code


# -- parser ------------------------------------------------------------------------


def _profile_args(p: argparse.ArgumentParser):
    p.add_argument("--alpha", help="poly:a0,a1,... or const:v (default const:1)")
    p.add_argument("--profile-file", help="file with coeffs= and C= lines")
    p.add_argument("--C", type=float, default=None, help="profile scale (default 1 or file value)")
    p.add_argument("--l", type=int, default=1, help="angular mode number (>= 1)")
    p.add_argument("--bc", choices=[b.value for b in BoundaryCondition], default="idealized")
    p.add_argument("--n", type=int, default=64, help="interior grid nodes (>= 8)")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="fd2")
    p.add_argument("--backend", choices=BACKENDS, default="qr")
    p.add_argument("--output", "-o", help="write to this file instead of stdout")


def _sweep_args(p: argparse.ArgumentParser):
    p.add_argument("--c-min", type=float, default=0.0)
    p.add_argument("--c-max", type=float, default=None,
                   help="upper C; omit to auto-expand [0, C] until two transitions appear")
    p.add_argument("--count", type=int, default=400)
    p.add_argument("--branches", type=int, default=18, help="tracked leading eigenvalues")
    p.add_argument("--im-tol", type=float, default=None, help="default 1e-7 |H|")
    p.add_argument("--threads", type=int, default=None, help="default DYNAMO_THREADS or all cores")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynamo-spectra",
        description="Spectra, branches and exceptional points of the alpha^2-dynamo operator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="classify a point of the 2x2 pseudo-Hermitian model")
    for name in ("e0", "f", "b1", "b2"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--tol", type=float, default=toy2x2.DEFAULT_TOL)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("spectrum", help="full spectrum at one C")
    _profile_args(p)
    p.add_argument("--no-residuals", action="store_true", help="skip eigenvector certificates")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="branches over a C range")
    _profile_args(p)
    _sweep_args(p)
    p.add_argument("--detect-transitions", action="store_true")
    p.add_argument("--no-refine", dest="refine", action="store_false",
                   help="report bracket midpoints instead of refined collisions")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("critical", help="dynamo threshold C_c")
    _profile_args(p)
    p.add_argument("--c-low", type=float, default=None)
    p.add_argument("--c-high", type=float, default=None)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("crossings", help="refined exceptional points of a sweep")
    _profile_args(p)
    _sweep_args(p)
    p.add_argument("--chain", action="store_true", help="also solve the Keldysh chain at each point")
    p.set_defaults(func=cmd_crossings)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = None
    try:
        out = open(args.output, "w", encoding="utf-8", newline="\n") if args.output else sys.stdout
        return args.func(args, out)
    except (NoSignChange, LostBracket) as exc:
        sys.stderr.write(f"bracketing error: {exc}\n")
        return EXIT_BRACKET
    except NonConvergence as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    finally:
        if out is not None and out is not sys.stdout:
            out.close()
