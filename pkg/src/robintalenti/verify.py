"""Comparison harness: FEM solution u against the radial solution v of the symmetrized problem."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from . import fem
from .geometry import (DomainSpec, Source, isoperimetric_constant, make_domain, mesh_generate,
                       schwarz_ball)
from .radial import (RadialProfile, counterexample_balls, counterexample_disks,
                     fit_leading_coefficient, radial_eigenvalue, radial_solve)
from .rearrange import (LorentzIndex, MonotoneProfile, decreasing_rearrangement,
                        distribution_function, lorentz_norm, source_rearrangement)

GRID_SIZE = 4096
CG_TOL = 1e-10
LEVELS = 512
_GL_X, _GL_W = roots_legendre(12)

EXPLORATORY = "exploratory"
EXPECTED_VIOLATION = "expected-violation"


@dataclass
class Check:
    name: str
    paper_ref: str
    lhs: float
    rhs: float
    tol: float
    status: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol

    @property
    def binding(self) -> bool:
        """Whether a failure of this check is a failure of the run."""
        return self.status not in (EXPLORATORY, EXPECTED_VIOLATION)

    def to_dict(self) -> dict:
        name = f"{self.name} [{self.status}]" if self.status else self.name
        return {"name": name, "paperRef": self.paper_ref, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "tol": self.tol, "pass": self.passed}


@dataclass
class ComparisonReport:
    id: str
    domain: str
    beta: float
    source: str
    h: float | None
    checks: list = field(default_factory=list)
    env: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.binding)

    def failures(self) -> list:
        return [c for c in self.checks if c.binding and not c.passed]

    def to_dict(self) -> dict:
        return {"id": self.id, "domain": self.domain, "beta": self.beta, "source": self.source,
                "h": self.h, "checks": [c.to_dict() for c in self.checks], "env": self.env}

    def summary_lines(self) -> list[str]:
        out = []
        for c in self.checks:
            flag = "PASS" if c.passed else ("NOTE" if not c.binding else "FAIL")
            out.append(f"{flag} {self.id} {c.to_dict()['name']}: lhs={c.lhs:.6g} "
                       f"rhs={c.rhs:.6g} slack={c.slack:.3g} tol={c.tol:.3g}")
        return out


def tolerance(h: float | None, scale: float) -> float:
    """One-sided discretization allowance h * max(|scale|, 1); quadrature-level when h is None."""
    scale = max(abs(scale), 1.0)
    if h is None:
        return 1e-8 * scale
    return h * scale


# ---------------------------------------------------------------- experiment pair


@dataclass(eq=False)
class Pair:
    """u on the domain and v on its symmetrized ball, with their distribution functions."""

    domain: DomainSpec
    beta: float
    source: Source
    h: float | None
    v: RadialProfile
    mu: MonotoneProfile
    phi: MonotoneProfile
    fstar: MonotoneProfile
    u_min: float
    u_max: float
    sol: fem.FemSolution | None = None

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def h_real(self) -> float | None:
        return self.sol.mesh.h if self.sol is not None else None

    def env(self) -> dict:
        e = {"radial_grid": GRID_SIZE, "cg_tol": CG_TOL}
        if self.sol is not None:
            e.update(h_mesh=self.sol.mesh.h, vertices=self.sol.mesh.n_vertices,
                     cg_iterations=self.sol.iterations, cg_residual=self.sol.residual)
        else:
            e["u_side"] = "closed-form radial per component"
        return e


def symmetrized(domain: DomainSpec, beta: float, source: Source, grid_size: int = GRID_SIZE):
    measures = [c.measure for c in domain.parts()]
    fstar = source_rearrangement(source.values, measures)
    ball = schwarz_ball(domain)
    return fstar, radial_solve(domain.dimension, ball.radius, fstar, beta, grid_size)


def _sum_distributions(profiles, total: float) -> MonotoneProfile:
    """Sum of distribution functions that are continuous on t > 0."""
    if not profiles:
        return MonotoneProfile([0.0], [0.0], "linear", total)
    t = np.unique(np.concatenate([p.x for p in profiles]))
    mu = sum(p(t) for p in profiles)
    mu = np.minimum.accumulate(mu)
    return MonotoneProfile(t, mu, "linear", total)


def radial_union_pair(domain: DomainSpec, beta: float, source: Source,
                      grid_size: int = GRID_SIZE) -> Pair:
    """Pair for a disjoint union of balls: u is radial on each component."""
    comps = domain.parts()
    if any(not c.is_ball for c in comps):
        raise ValueError("closed-form pairs need a union of balls")
    profiles, mins, maxs = [], [], []
    for c, val in zip(comps, source.values):
        if val == 0:
            mins.append(0.0)
            maxs.append(0.0)
            continue
        fs = source_rearrangement([val], [c.measure])
        vc = radial_solve(domain.dimension, c.radius, fs, beta, grid_size)
        profiles.append(vc.distribution())
        mins.append(vc.boundary_value)
        maxs.append(vc.max)
    mu = _sum_distributions(profiles, domain.measure)
    fstar, v = symmetrized(domain, beta, source, grid_size)
    return Pair(domain, beta, source, None, v, mu, v.distribution(), fstar, min(mins), max(maxs))


def fem_pair(domain: DomainSpec, beta: float, source: Source, h: float,
             grid_size: int = GRID_SIZE, tol: float = CG_TOL) -> Pair:
    mesh = mesh_generate(domain, h)
    sol = fem.solve(fem.assemble(mesh, beta, source), tol)
    mu = distribution_function(sol)
    fstar, v = symmetrized(domain, beta, source, grid_size)
    return Pair(domain, beta, source, h, v, mu, v.distribution(), fstar,
                fem.boundary_min(sol), sol.max, sol)


def make_pair(domain: DomainSpec, beta: float, source: Source, h: float | None = None,
              grid_size: int = GRID_SIZE) -> Pair:
    if domain.dimension == 2 and h is not None:
        return fem_pair(domain, beta, source, h, grid_size)
    return radial_union_pair(domain, beta, source, grid_size)


# ---------------------------------------------------------------- theorem ranges


def is_constant_source(source: Source) -> bool:
    return len(set(source.values)) == 1 and source.values[0] > 0


def p_limit(n: int, q_mode: str, constant_source: bool) -> float:
    """Largest p covered by the comparison theorems for the given family."""
    if constant_source:
        return math.inf if n == 2 else n / (n - 2)
    if q_mode == "q1":
        return n / (2 * n - 2)
    if q_mode == "q2":
        return n / (3 * n - 4)
    raise ValueError(f"unknown family {q_mode!r}")


def lorentz_index(p: float, q_mode: str) -> LorentzIndex:
    if q_mode == "q1":
        return LorentzIndex(p, 1.0)
    if q_mode == "q2":
        return LorentzIndex(2 * p, 2.0)
    raise ValueError(f"unknown family {q_mode!r}")


def lorentz_checks(pair: Pair, p_list, q_mode: str) -> list[Check]:
    limit = p_limit(pair.dimension, q_mode, is_constant_source(pair.source))
    base = "Theorem 1.2 (f = 1)" if is_constant_source(pair.source) else "Theorem 1.1"
    base += ", L^{p,1}" if q_mode == "q1" else ", L^{2p,2}"
    checks = []
    for p in p_list:
        idx = lorentz_index(p, q_mode)
        lhs = lorentz_norm(pair.mu, idx)
        rhs = lorentz_norm(pair.phi, idx)
        status = EXPLORATORY if p > limit * (1 + 1e-12) else ""
        at_end = math.isfinite(limit) and abs(p - limit) <= 1e-12 * limit
        ref = base + " (range endpoint)" if at_end else base
        checks.append(Check(f"lorentz_{q_mode}[p={p:.6g}]", ref, lhs, rhs,
                            tolerance(pair.h, rhs), status))
    return checks


def compare_lorentz(domain: DomainSpec, beta: float, source: Source, h: float | None,
                    p_list, q_mode: str = "q1", pair: Pair | None = None,
                    rerun: bool = True) -> ComparisonReport:
    """Lorentz-norm comparison of u and v for each p; out-of-range p are exploratory."""
    pair = pair or make_pair(domain, beta, source, h)
    checks = lorentz_checks(pair, p_list, q_mode)
    report = ComparisonReport(f"lorentz-{q_mode}", domain.describe(), beta, source.describe(),
                              h, checks, pair.env())
    if rerun and h is not None and not report.ok:
        finer = compare_lorentz(domain, beta, source, h / 2, p_list, q_mode, rerun=False)
        finer.env["rerun_from_h"] = h
        return finer
    return report


def median_level(pair: Pair) -> float:
    """Level at which the symmetrized solution's superlevel set has half the measure."""
    return float(decreasing_rearrangement(pair.phi)(0.5 * pair.domain.measure))


def pointwise_checks(pair: Pair, levels: int = LEVELS) -> list[Check]:
    measure = pair.domain.measure
    tol = tolerance(pair.h, measure)
    t = np.linspace(0.0, pair.v.max, levels)
    mu_t, phi_t = pair.mu(t), pair.phi(t)
    k = int(np.argmin(phi_t - mu_t))
    out = [Check("mu_le_phi[worst level]", "Theorem 1.2, mu(t) <= phi(t)",
                 float(mu_t[k]), float(phi_t[k]), tol)]

    s = np.linspace(0.0, measure, levels)
    # u*(|Omega|) = u_m is a left limit: read each rearrangement just inside
    # its own support so the closing jump to 0 is never sampled
    us, vs = decreasing_rearrangement(pair.mu), decreasing_rearrangement(pair.phi)
    ustar = us(np.minimum(s, np.nextafter(us.x[-1], 0.0)))
    vstar = vs(np.minimum(s, np.nextafter(vs.x[-1], 0.0)))
    j = int(np.argmin(vstar - ustar))
    out.append(Check("ustar_le_vstar[worst s]", "Theorem 1.2, u#(x) <= v(x)",
                     float(ustar[j]), float(vstar[j]), tolerance(pair.h, pair.v.max)))
    tm = median_level(pair)
    out.append(Check("mu_le_phi[median level]", "Theorem 1.2, mu(t) <= phi(t)",
                     float(pair.mu(tm)), float(pair.phi(tm)), tol))
    return out


def compare_pointwise_2d(domain: DomainSpec, beta: float, h: float, pair: Pair | None = None,
                         rerun: bool = True) -> ComparisonReport:
    """u* <= v* (equivalently mu <= phi) for f = 1 in the plane."""
    if domain.dimension != 2:
        raise ValueError("the pointwise comparison is a planar statement")
    source = Source.const(domain, 1.0)
    pair = pair or make_pair(domain, beta, source, h)
    report = ComparisonReport("pointwise-2d", domain.describe(), beta, source.describe(), h,
                              pointwise_checks(pair), pair.env())
    if rerun and not report.ok:
        finer = compare_pointwise_2d(domain, beta, h / 2, rerun=False)
        finer.env["rerun_from_h"] = h
        return finer
    return report


def check_vm_bound(pair: Pair) -> Check:
    vm = pair.v.boundary_value
    return Check("u_m_le_v_m", "Remark, u_m <= v_m", pair.u_min, vm, tolerance(pair.h, vm))


def boundary_lemma_checks(sol: fem.FemSolution, levels) -> list[Check]:
    """Integrated boundary term against (int f)/(2 beta) at each level, plus the t -> inf identity."""
    if fem.boundary_min(sol) < 0:
        raise ValueError("negative boundary values")
    beta = sol.beta
    total = float(sol.system.load.sum())
    rhs = total / (2.0 * beta)

    def truncated(t):
        def fn(u):
            u = np.asarray(u, float)
            safe = np.where(u > 0, u, 1.0)
            return np.where(u > 0, np.minimum(u, t) ** 2 / (2.0 * safe), 0.0)
        return fn

    h = sol.mesh.h
    out = []
    for t in levels:
        lhs = fem.boundary_integral(sol, truncated(float(t)))
        out.append(Check(f"boundary_lemma[t={t:.6g}]", "Lemma 3.3, boundary inequality",
                         lhs, rhs, tolerance(h, rhs)))
    terminal = 0.5 * fem.boundary_integral(sol)
    out.append(Check("boundary_lemma[terminal: |lhs-rhs|]", "Lemma 3.3, Fubini identity",
                     abs(terminal - rhs), 0.0, 1e-6 * rhs))
    return out


def check_boundary_lemma(sol: fem.FemSolution, levels) -> ComparisonReport:
    return ComparisonReport("boundary-lemma", "mesh", sol.beta, sol.system.source.describe(),
                            sol.mesh.h, boundary_lemma_checks(sol, levels))


def _stieltjes(mu: MonotoneProfile, fstar: MonotoneProfile, delta: float, tau: float) -> float:
    """int_0^tau -t mu^delta F(mu) dmu(t) with F(m) = int_0^m f*, over the pieces of mu."""
    xs, ys = mu.polyline()
    knots = np.asarray(fstar.x)
    total = 0.0
    for t0, t1, m0, m1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
        if t0 >= tau or m0 == m1:
            continue
        if t1 > tau:
            m1 = m0 + (m1 - m0) * (tau - t0) / (t1 - t0)
            t1 = tau
        cuts = np.unique(np.concatenate([[m1, m0], knots[(knots > m1) & (knots < m0)]]))
        for a, b in zip(cuts[:-1], cuts[1:]):
            m = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
            t = t0 if t1 == t0 else t0 + (t1 - t0) * (m - m0) / (m1 - m0)
            total += 0.5 * (b - a) * float(np.dot(_GL_W, t * m**delta * fstar.cumulative(m)))
    return total


def _moment(mu: MonotoneProfile, power: float, tau: float) -> float:
    """int_0^tau t mu(t)^power dt."""
    xs, ys = mu.polyline()
    total = 0.0
    for t0, t1, m0, m1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
        if t1 <= t0 or t0 >= tau:
            continue
        if t1 > tau:
            m1 = m0 + (m1 - m0) * (tau - t0) / (t1 - t0)
            t1 = tau
        t = 0.5 * (t1 - t0) * _GL_X + 0.5 * (t0 + t1)
        m = m0 + (m1 - m0) * (t - t0) / (t1 - t0)
        total += 0.5 * (t1 - t0) * float(np.dot(_GL_W, t * np.maximum(m, 0.0) ** power))
    return total


def check_fundamental_integrated(pair: Pair, p: float, tau: float | None = None) -> Check:
    """Integrated level-set inequality for u, multiplied by t mu^(1/p - (2N-2)/N)."""
    n = pair.dimension
    if p > n / (2 * n - 2) * (1 + 1e-12):
        raise ValueError("p is outside the range of the integrated inequality")
    vm = pair.v.boundary_value
    tau = pair.u_max if tau is None else tau
    if tau < vm:
        raise ValueError("tau must be at least v_m")
    delta = 1.0 / p - (2.0 * n - 2.0) / n
    gam = isoperimetric_constant(n)
    measure = pair.mu.total_mass
    mass = float(pair.fstar.cumulative(measure))
    lhs = gam * _moment(pair.mu, 1.0 / p, tau)
    rhs = (_stieltjes(pair.mu, pair.fstar, delta, tau)
           + measure**delta * mass**2 / (2.0 * pair.beta**2))
    return Check(f"fundamental_integrated[p={p:.6g},tau={tau:.6g}]",
                 "Lemma 3.2 integrated with Lemma 3.3", lhs, rhs, tolerance(pair.h, rhs))


def fem_eigenvalue(domain: DomainSpec, beta: float, h: float):
    mesh = mesh_generate(domain, h)
    lam, _ = fem.first_eigenpair(mesh, beta)
    return lam, mesh.h


def richardson(lam_coarse: float, h_coarse: float, lam_fine: float, h_fine: float):
    """Second-order extrapolation and the size of its correction."""
    ratio = (h_coarse / h_fine) ** 2
    corr = (lam_fine - lam_coarse) / (ratio - 1.0)
    return lam_fine + corr, abs(corr)


def check_bossel_daners(domain: DomainSpec, beta: float, h: float) -> ComparisonReport:
    """lambda(domain) >= lambda(ball of equal area), FEM value extrapolated over h and h/2."""
    if domain.dimension != 2 or len(domain.parts()) != 1:
        raise ValueError("Bossel-Daners check needs a connected planar domain")
    lam1, h1 = fem_eigenvalue(domain, beta, h)
    lam2, h2 = fem_eigenvalue(domain, beta, h / 2)
    lam_ext, err = richardson(lam1, h1, lam2, h2)
    lam_ball = radial_eigenvalue(2, schwarz_ball(domain).radius, beta)
    check = Check("bossel_daners", "Bossel-Daners inequality", lam_ball, lam_ext, err)
    return ComparisonReport("bossel-daners", domain.describe(), beta, "eigen", h, [check],
                            {"lambda_h": lam1, "lambda_h2": lam2, "h_mesh": [h1, h2],
                             "lambda_fem": lam_ext, "extrapolation_error": err,
                             "lambda_ball": lam_ball, "margin": lam_ext - lam_ball})


DISKS_CONSTANT = 0.25
BALLS_CONSTANT_STATED = 8.0 / 135.0
BALLS_CONSTANT_CLOSED_FORM = 8.0 * math.pi / 135.0


def run_counterexample_suite(rs, which: str = "disks") -> ComparisonReport:
    """Counterexamples with a small unloaded component; fits the leading constant of the gap."""
    rs = [float(r) for r in rs]
    if which == "disks":
        results = [counterexample_disks(r) for r in rs]
        power, refs = 2, [("stated", DISKS_CONSTANT)]
        label, pref = "sup norm", "Example 5.1"
        lhs_of = [(x.u_inf, x.v_inf) for x in results]
    elif which == "balls":
        results = [counterexample_balls(r) for r in rs]
        power = 3
        refs = [("stated", BALLS_CONSTANT_STATED), ("closed-form", BALLS_CONSTANT_CLOSED_FORM)]
        label, pref = "squared L2 norm", "Example 5.2"
        lhs_of = [(x.u_l2sq, x.v_l2sq) for x in results]
    else:
        raise ValueError("which must be 'disks' or 'balls'")
    checks = []
    for r, (u_val, v_val) in zip(rs, lhs_of):
        checks.append(Check(f"{label} u vs v [r={r:.6g}]", pref, u_val, v_val, 0.0,
                            EXPECTED_VIOLATION))
    diffs = [x.diff for x in results]
    c = fit_leading_coefficient(rs, diffs, power)
    for tag, ref in refs:
        checks.append(Check(f"leading_constant[{tag}: |c-{ref:.9g}|, c={c:.9g}]", pref,
                            abs(c - ref), 0.05 * ref, 0.0))
    domain = "union(disk:1,disk:r)" if which == "disks" else "union(ball:3:1,ball:3:r)"
    return ComparisonReport(f"counterexample-{which}", domain, 0.5, "indicator:0:1", None, checks,
                            {"r": rs, "diff": diffs, "fitted_constant": c, "power": power})


# ---------------------------------------------------------------- open problems


def explore_open_problems(rs=(0.1, 0.3, 0.6), beta: float = 0.5) -> ComparisonReport:
    """Record, without asserting, the two open questions for unions of balls in R^3.

    Pointwise u# <= v for f = 1, and ||u||_1 <= ||v||_1 for an indicator source.
    """
    checks = []
    for r in rs:
        dom = make_domain("union", components=[make_domain("ball", 1.0, dimension=3),
                                               make_domain("ball", r, dimension=3)])
        pair = radial_union_pair(dom, beta, Source.const(dom, 1.0))
        for c in pointwise_checks(pair)[:2]:
            c.name = f"{c.name}[N=3,r={r:g}]"
            c.status = EXPLORATORY
            c.paper_ref = "Open Problem 1"
            checks.append(c)
        pair = radial_union_pair(dom, beta, Source.indicator(dom, 0, 1.0))
        idx = LorentzIndex(1.0, 1.0)
        checks.append(Check(f"l1_norm[N=3,r={r:g}]", "Open Problem 2",
                            lorentz_norm(pair.mu, idx), lorentz_norm(pair.phi, idx),
                            tolerance(None, 1.0), EXPLORATORY))
    return ComparisonReport("open-problems", "union(ball:3:1,ball:3:r)", beta, "const/indicator",
                            None, checks, {"r": list(rs)})


def run_matrix(domains, betas, sources, h: float, p_q1=(0.25, 0.4, 0.5),
               p_q2=(0.25, 1 / 3, 0.5)) -> list[ComparisonReport]:
    """Every theorem-range check over a domain x beta x source matrix."""
    reports = []
    for dom in domains:
        for beta in betas:
            for src_kind in sources:
                src = Source.const(dom, 1.0) if src_kind == "const" else Source.indicator(dom, 0, 1.0)
                pair = make_pair(dom, beta, src, h)
                rep = ComparisonReport(f"matrix[{dom.describe()},beta={beta:g},{src_kind}]",
                                       dom.describe(), beta, src.describe(), h, [], pair.env())
                rep.checks += lorentz_checks(pair, p_q1, "q1")
                rep.checks += lorentz_checks(pair, p_q2, "q2")
                rep.checks.append(check_vm_bound(pair))
                if is_constant_source(src) and dom.dimension == 2:
                    rep.checks += pointwise_checks(pair)
                reports.append(rep)
    return reports


# ---------------------------------------------------------------- JSON


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written as %.17g; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "%.17g" % x if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_report(report: ComparisonReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(report.to_dict()) + "\n")
