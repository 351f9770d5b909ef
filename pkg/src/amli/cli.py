"""Command-line driver: ``amli solve``, ``amli theory`` and ``amli verify``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace

from . import experiments, verify
from .experiments import PRESETS, SOLVE_COLUMNS, ExperimentConfig

log = logging.getLogger("amli")

PATTERNS = {"const": "constant", "constant": "constant", "jump2d": "checkerboard2d", "jump3d": "checkerboard3d"}


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value + 0.0:.10g}"
    return str(value)


def format_table(rows: list[dict], columns, fmt: str = "csv", header: list[str] = (), footer: list[str] = ()) -> str:
    """CSV with ``#`` comment lines, or an aligned Markdown table."""
    cells = [[_fmt(r.get(c, "")) for c in columns] for r in rows]
    out = io.StringIO()
    if fmt == "csv":
        for line in header:
            out.write(f"# {line}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(cells)
        for line in footer:
            out.write(f"# {line}\n")
        return out.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown format {fmt!r}")
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    for line in header:
        out.write(f"<!-- {line} -->\n")
    out.write("| " + " | ".join(c.ljust(w) for c, w in zip(columns, widths)) + " |\n")
    out.write("|" + "|".join("-" * (w + 2) for w in widths) + "|\n")
    for row in cells:
        out.write("| " + " | ".join(v.rjust(w) for v, w in zip(row, widths)) + " |\n")
    for line in footer:
        out.write(f"\n{line}\n")
    return out.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# solve


def _solve_config(args) -> ExperimentConfig:
    if args.preset:
        cfg = experiments.preset(args.preset)
    elif args.config:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = ExperimentConfig(dim=args.dim or 2)
    over = {}
    if args.dim is not None:
        over["dim"] = args.dim
    if args.n0 is not None:
        over["n0"] = args.n0
    dim = over.get("dim", cfg.dim)
    n0 = over.get("n0", cfg.n0 if cfg.dim == dim else None) or (4 if dim == 2 else 2)
    over["n0"] = n0
    if args.levels is not None:
        over["inv_h"] = [n0 * 2**L for L in args.levels]
    if args.inv_h is not None:
        over["inv_h"] = args.inv_h
    for name in ("alpha", "beta", "kappa"):
        val = getattr(args, name)
        if val is not None:
            over[name] = val
    if args.pattern is not None:
        over["pattern"] = PATTERNS.get(args.pattern, args.pattern)
    method_flags = {k: getattr(args, k) for k in ("variant", "form", "cycle")}
    if any(v is not None for v in method_flags.values()):
        over["methods"] = None
        for k, v in method_flags.items():
            over[k] = v if v is not None else getattr(ExperimentConfig(), k)
    for name in ("gamma", "b", "tol", "max_it", "window", "rhs"):
        val = getattr(args, name)
        if val is not None:
            over[name] = val
    return replace(cfg, **over) if over else cfg


def cmd_solve(args) -> int:
    cfg = _solve_config(args)
    rows = experiments.run_experiment(cfg, jobs=args.jobs)
    if args.no_timing:
        for r in rows:
            r["seconds"] = float("nan")
    header = [
        f"amli solve: {cfg.title or 'custom sweep'}",
        f"dim={cfg.dim} n0={cfg.n0} rhs={cfg.rhs} gamma={cfg.gamma} b={cfg.b} tol={cfg.tol:g}",
    ]
    failed = [r for r in rows if not r["converged"]]
    footer = [
        f"not converged within {cfg.max_it} iterations: inv_h={r['inv_h']} alpha={r['alpha']:g} "
        f"beta={r['beta']:g} kappa={r['kappa']:g} {r['variant']} {r['form']} {r['cycle']}"
        for r in failed
    ]
    _emit(format_table(rows, SOLVE_COLUMNS, args.format, header, footer), args.out)
    return 0


# ---------------------------------------------------------------------------
# theory


def cmd_theory(args) -> int:
    e_values = args.e
    if args.table == "sequences":
        rows = experiments.emit_theory(e_values, args.lmax)
        from .theory import SEQUENCE_COLUMNS as cols

        header = ["amli theory: sequences a_l, b_l, r_l and CBS constants c_l^2 per e (curl and div)"]
    else:
        rows = experiments.condition_rows(e_values)
        cols = ("dim", "e", "cond_B11_macro", "cond_ilu_B11_global")
        header = ["amli theory: condition numbers of the difference block, raw and ILU(0)-preconditioned"]
    _emit(format_table(rows, cols, args.format, header), args.out)
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    names = [name for name, _ in verify.checks()]
    unknown = set(args.only or ()) - set(names)
    if unknown:
        raise SystemExit(f"unknown checks: {sorted(unknown)}; available: {names}")
    results = verify.run_verify(args.only, perturb=args.perturb)
    ok = all(c.passed for c in results)
    if args.format == "json":
        text = json.dumps({"passed": ok, "checks": [c.as_dict() for c in results]}, indent=2) + "\n"
    else:
        lines = [
            f"{'PASS' if c.passed else 'FAIL'}  {c.name:<28} measured={c.measured:.3e}  tol={c.tol:.0e}  {c.detail}"
            for c in results
        ]
        lines.append(f"{sum(c.passed for c in results)}/{len(results)} checks passed")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="amli", description="AMLI preconditioners for H(curl) and H(div) problems")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run a convergence sweep")
    s.add_argument("--preset", choices=sorted(PRESETS), help="start from a named experiment")
    s.add_argument("--config", help="JSON file with ExperimentConfig fields")
    s.add_argument("--dim", type=int, choices=(2, 3))
    s.add_argument("--n0", type=int, help="cells per side on the coarsest mesh")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--levels", type=_ints, help="refinement level counts L, comma separated")
    g.add_argument("--inv-h", type=_ints, help="finest 1/h values, comma separated")
    s.add_argument("--alpha", type=_floats)
    s.add_argument("--beta", type=_floats)
    s.add_argument("--pattern", choices=sorted(PATTERNS) + ["checkerboard2d", "checkerboard3d"])
    s.add_argument("--kappa", type=_floats, help="jump ratios for the checkerboard patterns")
    s.add_argument("--cycle", type=_words, help="v, w or both")
    s.add_argument("--variant", type=_words, help="linear-t, linear-x, nonlinear")
    s.add_argument("--form", type=_words, help="mult, add")
    s.add_argument("--gamma", choices=("bound", "level"))
    s.add_argument("--b", type=float, help="shift in the Chebyshev polynomial")
    s.add_argument("--tol", type=float)
    s.add_argument("--max-it", type=int)
    s.add_argument("--window", type=int, help="flexible CG orthogonalization window")
    s.add_argument("--rhs", choices=("manufactured", "ones"))
    s.add_argument("--jobs", type=int, default=1, help="worker processes for the sweep")
    s.add_argument("--no-timing", action="store_true", help="blank the seconds column for reproducible output")
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "md"), default="csv")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("theory", help="emit sequence and CBS data")
    t.add_argument("--table", choices=("sequences", "condition"), default="sequences")
    t.add_argument("--e", type=_floats, help="values of e = kappa h^2 (default 1e2 .. 1e-12)")
    t.add_argument("--lmax", type=int, default=30)
    t.add_argument("--out")
    t.add_argument("--format", choices=("csv", "md"), default="csv")
    t.set_defaults(func=cmd_theory)

    v = sub.add_parser("verify", help="run the named consistency checks")
    v.add_argument("--only", type=_words, help="comma separated check names")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--out")
    v.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"amli: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
