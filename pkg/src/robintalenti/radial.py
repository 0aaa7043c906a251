"""The symmetrized problem on a ball, ball eigenvalues, and the two-component counterexamples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicHermiteSpline

from .geometry import isoperimetric_constant, unit_ball_volume
from .rearrange import MonotoneProfile, _inverse, source_rearrangement


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radially decreasing solution v on the ball of radius R, sampled on ``grid``."""

    dimension: int
    radius: float
    grid: np.ndarray
    values: np.ndarray
    beta: float
    fstar: MonotoneProfile
    segments: tuple = ()

    @property
    def omega(self) -> float:
        return unit_ball_volume(self.dimension)

    @property
    def measure(self) -> float:
        return self.omega * self.radius**self.dimension

    @property
    def perimeter(self) -> float:
        n = self.dimension
        return n * self.omega * self.radius ** (n - 1)

    @property
    def boundary_value(self) -> float:
        """v_m = v(R), the minimum of v."""
        return float(self.values[-1])

    @property
    def max(self) -> float:
        return float(self.values[0])

    def mass(self, rho):
        """Integral of the source over the ball of radius rho."""
        return self.fstar.cumulative(self.omega * np.asarray(rho, float) ** self.dimension)

    def derivative(self, rho):
        """v'(rho) = -mass(rho) / Per(B_rho), exact from the flux balance."""
        rho = np.asarray(rho, dtype=float)
        n = self.dimension
        per = n * self.omega * np.where(rho > 0, rho, 1.0) ** (n - 1)
        return np.where(rho > 0, -self.mass(rho) / per, 0.0)

    def __call__(self, rho):
        rho = np.clip(np.asarray(rho, dtype=float), 0.0, self.radius)
        spline = CubicHermiteSpline(self.grid, self.values, self.derivative(self.grid))
        out = spline(rho)
        return out if out.ndim else float(out)

    def rearranged(self) -> MonotoneProfile:
        """v*(s) on [0, |ball|] (v is its own Schwarz rearrangement)."""
        s = self.omega * self.grid**self.dimension
        return MonotoneProfile(s, np.maximum(self.values, 0.0), "linear", float(self.values[0]))

    def distribution(self) -> MonotoneProfile:
        """phi(t) = |{v > t}| by monotone piecewise-linear inversion."""
        return _inverse(self.rearranged())

    def lp_power(self, p: float = 2.0) -> float:
        """Integral of v**p over the ball, composite Simpson on each grid segment."""
        n = self.dimension
        w = n * self.omega * self.grid ** (n - 1) * self.values**p
        total = 0.0
        for lo, hi in self.segments or ((0, len(self.grid) - 1),):
            total += simpson(w[lo:hi + 1], x=self.grid[lo:hi + 1])
        return float(total)


def _radial_grid(radius: float, knots, size: int) -> np.ndarray:
    """Piecewise-uniform grid on [0, R] with every knot as a node, even count per piece.

    Returns the grid and the (first, last) node index of each uniform piece.
    """
    inner = [k for k in knots if 1e-12 * radius < k < radius * (1 - 1e-12)]
    edges = np.unique(np.concatenate([[0.0], inner, [radius]]))
    parts, segments, start = [], [], 0
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(2, int(math.ceil(size * (b - a) / radius)))
        m += m % 2
        parts.append(np.linspace(a, b, m + 1)[:-1])
        segments.append((start, start + m))
        start += m
    parts.append([radius])
    return np.concatenate(parts), tuple(segments)


def radial_solve(dimension: int, radius: float, fstar: MonotoneProfile, beta: float,
                 grid_size: int = 256) -> RadialProfile:
    """Solve the symmetrized Robin problem on the ball by integrating the flux balance.

    v(R) = (int f*) / (beta Per) and v(rho) = v(R) + int_rho^R mass(s)/Per(B_s) ds,
    with mass(s) exact on the steps of ``fstar`` and the outer integral done by
    composite Simpson on a grid aligned with the steps.
    """
    n = int(dimension)
    if n < 2:
        raise ValueError("dimension must be >= 2")
    if not radius > 0 or not beta > 0:
        raise ValueError("radius and beta must be positive")
    if grid_size < 256:
        raise ValueError("grid_size must be at least 256")
    omega = unit_ball_volume(n)
    measure = omega * radius**n
    if fstar.x[-1] > measure * (1 + 1e-12):
        raise ValueError("source rearrangement extends beyond the ball measure")

    knots = (np.asarray(fstar.x) / omega) ** (1.0 / n)
    grid, segments = _radial_grid(radius, knots, grid_size)
    mass = fstar.cumulative(omega * grid**n)
    per = n * omega * grid ** (n - 1)
    g = np.zeros_like(grid)
    g[1:] = mass[1:] / per[1:]

    cum = np.zeros_like(grid)
    for lo, hi in segments:
        cum[lo:hi + 1] = cum[lo] + cumulative_simpson(g[lo:hi + 1], x=grid[lo:hi + 1], initial=0.0)
    v_boundary = float(mass[-1]) / (beta * per[-1])
    values = v_boundary + (cum[-1] - cum)
    values = np.minimum.accumulate(values)
    return RadialProfile(n, float(radius), grid, values, float(beta), fstar, segments)


def fundamental_identity_residual(v: RadialProfile, fstar: MonotoneProfile, levels) -> float:
    """Largest relative defect of the level-set identity for v over ``levels``.

    At each level t the identity reads
    gamma_N phi^((2N-2)/N) = (-phi'(t) + boundary term) * int_0^phi f*,
    where the boundary term is Per/(beta v(R)) while the level set is the
    whole ball and 0 afterwards.
    """
    t = np.atleast_1d(np.asarray(levels, dtype=float))
    if v.max <= 0:
        raise ValueError("v vanishes identically: no level sets")
    if np.any(t >= v.max) or np.any(t <= 0):
        raise ValueError("levels must lie in (0, max v)")
    n, omega = v.dimension, v.omega
    gam = isoperimetric_constant(n)
    rho = np.interp(t, v.values[::-1], v.grid[::-1])
    below = t < v.boundary_value
    rho = np.where(below, v.radius, rho)
    phi = omega * rho**n
    dv = v.derivative(rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        dphi = np.where(below, 0.0, n * omega * rho ** (n - 1) / dv)
    bterm = np.where(below, v.perimeter / (v.beta * v.boundary_value), 0.0)
    lhs = gam * phi ** ((2.0 * n - 2.0) / n)
    rhs = (-dphi + bterm) * fstar.cumulative(phi)
    return float(np.max(np.abs(lhs - rhs) / lhs))


# ---------------------------------------------------------------- eigenvalues


def bessel_j0(x):
    """J0 by its power series (30 terms, accurate for |x| <= 12)."""
    x = np.asarray(x, dtype=float)
    z = -(x * 0.5) ** 2
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, 30):
        term = term * z / (k * k)
        total = total + term
    return total


def bessel_j1(x):
    x = np.asarray(x, dtype=float)
    z = -(x * 0.5) ** 2
    term = x * 0.5
    total = term.copy()
    for k in range(1, 30):
        term = term * z / (k * (k + 1))
        total = total + term
    return total


def bisect(fn, lo: float, hi: float, xtol: float = 0.0) -> float:
    """Root of ``fn`` in (lo, hi) given a sign change, to full double precision."""
    flo = fn(lo)
    if flo * fn(hi) > 0:
        raise ValueError("no sign change on the bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


J0_FIRST_ZERO = bisect(lambda x: float(bessel_j0(x)), 2.0, 3.0)


def radial_eigenvalue(dimension: int, radius: float, beta: float) -> float:
    """First Robin eigenvalue of the ball for N = 2 (Bessel) or N = 3 (spherical)."""
    if not beta > 0 or not radius > 0:
        raise ValueError("radius and beta must be positive")
    R = float(radius)
    if dimension == 2:
        def fn(k):
            return beta * float(bessel_j0(k * R)) - k * float(bessel_j1(k * R))
        hi = J0_FIRST_ZERO / R
    elif dimension == 3:
        def fn(k):
            x = k * R
            return x * math.cos(x) - math.sin(x) + beta * R * math.sin(x)
        hi = math.pi / R
    else:
        raise ValueError("ball eigenvalues are implemented for N = 2 and N = 3 only")
    k = bisect(fn, hi * 1e-12, hi)
    return k * k


# ---------------------------------------------------------------- counterexamples


@dataclass(frozen=True)
class DisksCounterexample:
    r: float
    u_inf: float
    v_inf: float

    @property
    def diff(self) -> float:
        return self.u_inf - self.v_inf


@dataclass(frozen=True)
class BallsCounterexample:
    r: float
    u_l2sq: float
    v_l2sq: float

    @property
    def diff(self) -> float:
        return self.u_l2sq - self.v_l2sq


def counterexample_disks(r: float) -> DisksCounterexample:
    """Unit disk (source 1) plus a disk of radius r (source 0), beta = 1/2.

    On the unit disk u = 5/4 - rho^2/4 and u = 0 on the small disk.  On the
    disk of radius sqrt(1 + r^2), v(R) = 1/R, v drops by (1/2) log R across
    the unloaded annulus and by 1/4 across the unit disk.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    big_r2 = 1.0 + r * r
    v_inf = 0.25 + big_r2**-0.5 + 0.25 * math.log(big_r2)
    return DisksCounterexample(r, 1.25, v_inf)


def _ball_u_l2sq() -> float:
    # u = 5/6 - rho^2/6 on the unit ball: int (5/6 - rho^2/6)^2 4 pi rho^2 drho
    poly = np.polynomial.Polynomial([5 / 6, 0.0, -1 / 6]) ** 2 * np.polynomial.Polynomial([0, 0, 4 * math.pi])
    anti = poly.integ()
    return float(anti(1.0) - anti(0.0))


def counterexample_balls(r: float, grid_size: int = 2048) -> BallsCounterexample:
    """Unit ball (source 1) plus a ball of radius r (source 0) in R^3, beta = 1/2.

    u = (1 - rho^2)/6 + 2/3 on the unit ball and 0 on the small one; v is the
    radial solution on the ball of radius (1 + r^3)^(1/3).
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    unit = 4.0 * math.pi / 3.0
    small = unit * r**3
    fstar = source_rearrangement([1.0, 0.0], [unit, small])
    radius = (1.0 + r**3) ** (1.0 / 3.0)
    v = radial_solve(3, radius, fstar, 0.5, grid_size)
    return BallsCounterexample(r, _ball_u_l2sq(), v.lp_power(2.0))


def fit_leading_coefficient(rs, diffs, power: int) -> float:
    """Least-squares c in diff ~ c r^power over the two smallest r."""
    pairs = sorted(zip(rs, diffs))[:2]
    x = np.array([p[0] for p in pairs]) ** power
    y = np.array([p[1] for p in pairs])
    return float(x @ y / (x @ x))


def write_radial_csv(v: RadialProfile, path) -> None:
    rows = ["rho,v"] + [f"{a:.17g},{b:.17g}" for a, b in zip(v.grid.tolist(), v.values.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
