"""Command-line front end.

Subcommands: solve, compare, eigen, counterexample, explore, batch.  Exit codes:
0 ok, 2 bad flags or inputs, 3 solver or I/O failure, 4 a theorem check inside
its proven range failed.
"""

from __future__ import annotations

import argparse
import math
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import fem, verify
from .geometry import DomainSpec, Source, make_domain, mesh_generate, write_mesh
from .radial import write_radial_csv
from .rearrange import decreasing_rearrangement, write_profile_csv

EXIT_OK, EXIT_USAGE, EXIT_INFRA, EXIT_VIOLATION = 0, 2, 3, 4


class UsageError(ValueError):
    """Flag values that parse but describe an invalid experiment."""


# ---------------------------------------------------------------- flag grammar


def _number(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None
    if not math.isfinite(x):
        raise UsageError(f"not a finite number: {text!r}")
    return x


def _split_top(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise UsageError(f"unbalanced parentheses in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise UsageError(f"unbalanced parentheses in {text!r}")
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def parse_domain(text: str) -> DomainSpec:
    """``disk:R``, ``square:s``, ``rectangle:w:h``, ``ellipse:a:b``, ``ball:N:R``, ``union(...)``."""
    text = text.strip()
    try:
        if text.startswith("union(") and text.endswith(")"):
            comps = [parse_domain(p) for p in _split_top(text[6:-1])]
            return make_domain("union", components=comps)
        kind, *raw = text.split(":")
        vals = [_number(v) for v in raw]
        arity = {"disk": 1, "square": 1, "rectangle": 2, "ellipse": 2, "ball": 2}
        if kind not in arity:
            raise UsageError(f"unknown domain kind {kind!r}")
        if len(vals) != arity[kind]:
            raise UsageError(f"{kind} takes {arity[kind]} parameter(s), got {len(vals)}")
        if kind == "square":
            return make_domain("rectangle", vals[0], vals[0])
        if kind == "ball":
            n = vals[0]
            if n != int(n):
                raise UsageError("ball dimension must be an integer")
            return make_domain("ball", vals[1], dimension=int(n))
        return make_domain(kind, *vals)
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_source(text: str, domain: DomainSpec) -> Source:
    """``const:c`` or ``indicator:<component-index>:<value>``."""
    kind, *raw = text.strip().split(":")
    try:
        if kind == "const" and len(raw) == 1:
            return Source.const(domain, _number(raw[0]))
        if kind == "indicator" and len(raw) == 2:
            idx = _number(raw[0])
            if idx != int(idx):
                raise UsageError("component index must be an integer")
            return Source.indicator(domain, int(idx), _number(raw[1]))
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"bad source {text!r}: use const:c or indicator:i:v")


def parse_list(text: str) -> list[float]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if "/" in item:
            num, den = item.split("/", 1)
            out.append(_number(num) / _number(den))
        elif item.lower() in ("inf", "infinity"):
            out.append(math.inf)
        else:
            out.append(_number(item))
    return out


# ---------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    command: str
    domain: DomainSpec | None = None
    beta: float | None = None
    source: Source | None = None
    h: float | None = None
    grid: int = verify.GRID_SIZE
    cg_tol: float = verify.CG_TOL
    p_list: list = field(default_factory=list)
    q_mode: str = "q1"
    out: str = "."
    seed: int = 0

    def validate(self) -> None:
        for name in ("beta", "h", "cg_tol"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.grid < 256:
            raise UsageError("--grid must be at least 256")
        if any(not p > 0 for p in self.p_list):
            raise UsageError("--p values must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be nonnegative")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig(args.command)
    if getattr(args, "domain", None) is not None:
        cfg.domain = parse_domain(args.domain)
    if getattr(args, "f", None) is not None:
        cfg.source = parse_source(args.f, cfg.domain)
    for name in ("beta", "h", "grid", "cg_tol", "out", "seed"):
        if getattr(args, name, None) is not None:
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "p", None):
        cfg.p_list = parse_list(args.p)
    if getattr(args, "q", None):
        cfg.q_mode = args.q
    cfg.validate()
    return cfg


def _outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path!r} is not writable")
    return path


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: ExperimentConfig) -> int:
    if cfg.domain.dimension != 2:
        raise UsageError("solve meshes planar domains only")
    out = _outdir(cfg.out)
    mesh = mesh_generate(cfg.domain, cfg.h)
    sol = fem.solve(fem.assemble(mesh, cfg.beta, cfg.source), cfg.cg_tol)
    write_mesh(mesh, os.path.join(out, "mesh.txt"))
    fem.write_solution_csv(sol, os.path.join(out, "solution.csv"))
    line = ",".join("%.17g" % x for x in (sol.max, fem.boundary_min(sol), fem.energy(sol),
                                             fem.flux_residual(sol)))
    with open(os.path.join(out, "summary.csv"), "w") as fh:
        fh.write("max,u_m,energy,flux_residual\n" + line + "\n")
    print(line)
    return EXIT_OK


def _write_profiles(pair: verify.Pair, out: str) -> None:
    write_profile_csv(pair.mu, os.path.join(out, "mu.csv"), "t,mu")
    write_profile_csv(pair.phi, os.path.join(out, "phi.csv"), "t,phi")
    write_profile_csv(decreasing_rearrangement(pair.mu), os.path.join(out, "ustar.csv"), "s,ustar")
    write_radial_csv(pair.v, os.path.join(out, "v.csv"))


def _finish(report: verify.ComparisonReport, out: str, name: str = "report.json") -> int:
    verify.write_report(report, os.path.join(out, name))
    for line in report.summary_lines():
        print(line)
    if not report.ok:
        for c in report.failures():
            print(f"VIOLATION {report.id}: {c.name} slack={c.slack:.6g} tol={c.tol:.3g}",
                  file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg.out)
    dom = cfg.domain
    if dom.dimension == 2 and cfg.h is None:
        raise UsageError("--h is required for planar domains")
    if dom.dimension > 2 and any(not c.is_ball for c in dom.parts()):
        raise UsageError("N >= 3 supports balls and unions of balls only")
    h = cfg.h if dom.dimension == 2 else None
    pair = verify.make_pair(dom, cfg.beta, cfg.source, h, cfg.grid)
    if cfg.q_mode == "pointwise":
        if dom.dimension != 2 or not verify.is_constant_source(cfg.source):
            raise UsageError("pointwise comparison needs a planar domain and a constant source")
        report = verify.compare_pointwise_2d(dom, cfg.beta, h, pair=pair)
    else:
        if not cfg.p_list:
            raise UsageError("--p is required for Lorentz comparisons")
        report = verify.compare_lorentz(dom, cfg.beta, cfg.source, h, cfg.p_list, cfg.q_mode,
                                        pair=pair)
    report.checks.append(verify.check_vm_bound(pair))
    _write_profiles(pair, out)
    return _finish(report, out)


def cmd_eigen(cfg: ExperimentConfig) -> int:
    dom = cfg.domain
    if dom.dimension != 2 or len(dom.parts()) != 1:
        raise UsageError("eigen needs a connected planar domain")
    out = _outdir(cfg.out)
    report = verify.check_bossel_daners(dom, cfg.beta, cfg.h)
    report.env["pass"] = report.ok
    return _finish(report, out)


def cmd_counterexample(args) -> int:
    out = _outdir(args.out)
    rs = parse_list(args.r)
    if any(not 0 < r < 1 for r in rs):
        raise UsageError("--r values must lie in (0, 1)")
    if len(rs) < 2:
        raise UsageError("--r needs at least two values for the fit")
    report = verify.run_counterexample_suite(rs, args.which)
    return _finish(report, out)


def cmd_explore(args) -> int:
    out = _outdir(args.out)
    rs = parse_list(args.r)
    if any(not 0 < r < 1 for r in rs):
        raise UsageError("--r values must lie in (0, 1)")
    if not args.beta > 0:
        raise UsageError("--beta must be positive")
    report = verify.explore_open_problems(rs, args.beta)
    return _finish(report, out)


def _run_row(row: str) -> tuple[int, str, str]:
    import contextlib
    import io

    so, se = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(so), contextlib.redirect_stderr(se):
        code = main(shlex.split(row))
    return code, so.getvalue(), se.getvalue()


def read_batch(path: str) -> list[str]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append(line)
    return rows


def cmd_batch(args) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    rows = read_batch(args.file)
    for row in rows:
        if shlex.split(row)[0] == "batch":
            raise UsageError("batch files cannot nest batch commands")
    if args.jobs == 1:
        results = [_run_row(r) for r in rows]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_row, rows))
    worst = EXIT_OK
    for row, (code, so, se) in zip(rows, results):
        print(f"## {row} -> exit {code}")
        sys.stdout.write(so)
        sys.stderr.write(se)
        worst = max(worst, code)
    return worst


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robintalenti", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for any randomized step (default 0)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, h_required=True, source=True):
        p.add_argument("--domain", required=True,
                       help="disk:R | square:s | rectangle:w:h | ellipse:a:b | ball:N:R | "
                            "union(disk:1,disk:0.1)")
        p.add_argument("--beta", type=float, required=True)
        if source:
            p.add_argument("--f", required=True, help="const:c | indicator:i:v")
        p.add_argument("--h", type=float, required=h_required, help="target mesh size")
        p.add_argument("--cg-tol", type=float, default=verify.CG_TOL)
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("solve", help="FEM solve: mesh, solution CSV, summary line")
    common(p)
    p = sub.add_parser("compare", help="compare u and v in Lorentz norms or pointwise")
    common(p, h_required=False)
    p.add_argument("--p", help="comma-separated p values (fractions like 1/3 allowed)")
    p.add_argument("--q", choices=("q1", "q2", "pointwise"), default="q1")
    p.add_argument("--grid", type=int, default=verify.GRID_SIZE, help="radial grid size")
    p = sub.add_parser("eigen", help="first Robin eigenvalue against the equal-area disk")
    common(p, source=False)
    p = sub.add_parser("counterexample", help="two-component counterexamples")
    p.add_argument("--which", choices=("disks", "balls"), default="disks")
    p.add_argument("--r", default="0.05,0.1,0.2")
    p.add_argument("--out", default=".")
    p = sub.add_parser("explore", help="open questions for unions of balls in R^3")
    p.add_argument("--r", default="0.1,0.3,0.6")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--out", default=".")
    p = sub.add_parser("batch", help="run one command line per row of a file")
    p.add_argument("file")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "counterexample":
            return cmd_counterexample(args)
        if args.command == "explore":
            return cmd_explore(args)
        if args.command == "batch":
            return cmd_batch(args)
        cfg = _config(args)
        return {"solve": cmd_solve, "compare": cmd_compare, "eigen": cmd_eigen}[cfg.command](cfg)
    except UsageError as exc:
        print(f"robintalenti: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (fem.SolverError, OSError, ArithmeticError) as exc:
        print(f"robintalenti: failure: {exc}", file=sys.stderr)
        return EXIT_INFRA
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
