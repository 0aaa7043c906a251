"""Distribution functions, decreasing/Schwarz rearrangements and Lorentz quasi-norms.

Every nonincreasing function of one variable is carried as a
:class:`MonotoneProfile`.  Internally all algorithms work on the *linear*
encoding: a monotone polyline whose abscissas are nondecreasing and whose
repeated abscissas encode jumps.  Evaluation is right-continuous, so a
profile of ``t -> |{u > t}|`` is exact at its jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .geometry import unit_ball_volume

_GAUSS_N = 16
FEM_LEVELS = 8192
_GL_X, _GL_W = roots_legendre(_GAUSS_N)


@dataclass(frozen=True, eq=False)
class MonotoneProfile:
    """Nonincreasing, nonnegative function on ``[x[0], x[-1]]``.

    ``kind="step"``: ``y[i]`` holds on ``[x[i], x[i+1])`` and ``x`` is strictly
    increasing.  ``kind="linear"``: ``y[i]`` is the value at ``x[i]``, linear in
    between; a repeated abscissa encodes a jump.  Left of ``x[0]`` the profile
    equals ``total_mass``; right of ``x[-1]`` it is zero.
    """

    x: np.ndarray
    y: np.ndarray
    kind: str = "linear"
    total_mass: float = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 1:
            raise ValueError("breakpoints and values must be 1-D arrays of equal length")
        if self.kind not in ("step", "linear"):
            raise ValueError(f"unknown interpolation {self.kind!r}")
        dx = np.diff(x)
        if np.any(dx < 0) or (self.kind == "step" and np.any(dx <= 0)):
            raise ValueError("breakpoints must be increasing")
        if np.any(np.diff(y) > 0):
            raise ValueError("values must be nonincreasing")
        if np.any(y < 0):
            raise ValueError("values must be nonnegative")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.total_mass is None:
            object.__setattr__(self, "total_mass", float(y[0]))

    @property
    def support(self) -> float:
        """Length of the abscissa interval."""
        return float(self.x[-1] - self.x[0])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x, y = self.x, self.y
        k = len(x) - 1
        idx = np.searchsorted(x, t, side="right") - 1
        out = np.zeros_like(t)
        inside = (idx >= 0) & (t <= x[-1])
        i = np.clip(idx, 0, k)
        if self.kind == "step":
            out = np.where(inside, y[i], out)
        else:
            j = np.minimum(i + 1, k)
            span = x[j] - x[i]
            w = np.where(span > 0, (t - x[i]) / np.where(span > 0, span, 1.0), 0.0)
            out = np.where(inside, y[i] + w * (y[j] - y[i]), out)
        out = np.where(idx < 0, self.total_mass, out)
        return out if out.ndim else float(out)

    def polyline(self):
        """Linear encoding (x, y) ending at value 0."""
        if self.kind == "step":
            xs = np.repeat(self.x, 2)[1:]
            ys = np.repeat(self.y, 2)[:-1]
            xs = np.append(xs, self.x[-1])
            ys = np.append(ys, 0.0)
        else:
            xs, ys = self.x, self.y
            if ys[-1] > 0:
                xs = np.append(xs, xs[-1])
                ys = np.append(ys, 0.0)
        return _simplify(np.asarray(xs, float), np.asarray(ys, float))

    def as_linear(self) -> "MonotoneProfile":
        xs, ys = self.polyline()
        return MonotoneProfile(xs, ys, "linear", self.total_mass)

    def cumulative(self, upper):
        """Integral of the profile from ``x[0]`` to ``upper`` (clamped to the support)."""
        xs, ys = self.polyline()
        seg = 0.5 * np.diff(xs) * (ys[:-1] + ys[1:])
        c = np.concatenate([[0.0], np.cumsum(seg)])
        u = np.clip(np.asarray(upper, dtype=float), xs[0], xs[-1])
        i = np.clip(np.searchsorted(xs, u, side="right") - 1, 0, len(xs) - 1)
        j = np.minimum(i + 1, len(xs) - 1)
        span = xs[j] - xs[i]
        w = np.where(span > 0, (u - xs[i]) / np.where(span > 0, span, 1.0), 0.0)
        gu = ys[i] + w * (ys[j] - ys[i])
        out = c[i] + 0.5 * (u - xs[i]) * (ys[i] + gu)
        return out if out.ndim else float(out)

    def integral(self) -> float:
        return float(self.cumulative(self.x[-1]))

    def lp_norm(self, p: float) -> float:
        """(integral of g^p over the support)^(1/p)."""
        xs, ys = self.polyline()
        total = 0.0
        for x0, x1, y0, y1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
            if x1 == x0:
                continue
            if y0 == y1:
                total += (x1 - x0) * y0**p
            else:
                tq = 0.5 * (x1 - x0) * _GL_X + 0.5 * (x0 + x1)
                g = y0 + (y1 - y0) * (tq - x0) / (x1 - x0)
                total += 0.5 * (x1 - x0) * np.dot(_GL_W, g**p)
        return total ** (1.0 / p)


def _simplify(x: np.ndarray, y: np.ndarray):
    """Drop repeated points and interior points of horizontal/vertical runs."""
    keep = np.ones(len(x), dtype=bool)
    keep[1:] = (np.diff(x) != 0) | (np.diff(y) != 0)
    x, y = x[keep], y[keep]
    if len(x) < 3:
        return x, y
    dx, dy = np.diff(x), np.diff(y)
    interior = np.ones(len(x), dtype=bool)
    h = dy == 0
    v = dx == 0
    interior[1:-1] = ~((h[:-1] & h[1:]) | (v[:-1] & v[1:]))
    return x[interior], y[interior]


def _to_step(x: np.ndarray, y: np.ndarray, total_mass: float) -> MonotoneProfile:
    """Step profile from a polyline made only of horizontal and vertical pieces."""
    dx, dy = np.diff(x), np.diff(y)
    if np.any((dx != 0) & (dy != 0)):
        raise ValueError("polyline is not a step function")
    starts = [i for i in range(len(dx)) if dx[i] > 0]
    bx = [x[i] for i in starts] + [x[-1]]
    by = [y[i] for i in starts] + [0.0]
    bx, by = np.array(bx), np.array(by)
    if len(bx) == 1:
        by = np.array([0.0])
    return MonotoneProfile(bx, by, "step", total_mass)


def _inverse(prof: MonotoneProfile) -> MonotoneProfile:
    """Generalized inverse: t -> |{s in support : g(s) > t}| as a profile in t >= 0."""
    xs, ys = prof.polyline()
    x_new = ys[::-1].copy()
    y_new = (xs - xs[0])[::-1].copy()
    if x_new[0] > 0:
        x_new = np.concatenate([[0.0], x_new])
        y_new = np.concatenate([[y_new[0]], y_new])
    total = prof.support
    x_new, y_new = _simplify(x_new, y_new)
    if prof.kind == "step":
        return _to_step(x_new, y_new, total)
    return MonotoneProfile(x_new, y_new, "linear", total)


# ---------------------------------------------------------------- inputs


@dataclass(frozen=True, eq=False)
class WeightedSamples:
    """Discrete nonnegative field: ``values[i]`` carried on a set of measure ``weights[i]``."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be 1-D arrays of equal length")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def rearranged(self) -> MonotoneProfile:
        """Decreasing rearrangement as a step profile on [0, measure]."""
        v = self.values
        if np.any(v < 0):
            raise ValueError("field must be nonnegative")
        order = np.argsort(-v, kind="stable")
        vs, ws = v[order], self.weights[order]
        new = np.ones(len(vs), dtype=bool)
        new[1:] = vs[:-1] > vs[1:]
        groups = np.cumsum(new) - 1
        gw = np.bincount(groups, weights=ws)
        gv = vs[new]
        x = np.concatenate([[0.0], np.cumsum(gw)])
        y = np.concatenate([gv, [0.0]])
        x, y = _simplify_step(x, y)
        return MonotoneProfile(x, y, "step", float(y[0]))


def _simplify_step(x, y):
    keep = np.ones(len(x), dtype=bool)
    keep[1:-1] = y[1:-1] != y[:-2]
    return x[keep], y[keep]


def p1_distribution(vertices, triangles, nodal, interior_points: int = 4,
                    total_mass: float | None = None,
                    max_levels: int | None = None,
                    slivers=None) -> MonotoneProfile:
    """Exact superlevel areas of a P1 field, sampled at nodal levels and between them.

    Inside a triangle with sorted nodal values a <= b <= c and area A, the
    superlevel set of the linear interpolant has area
    A - A (t-a)^2 / ((b-a)(c-a)) for a <= t <= b and A (c-t)^2 / ((c-a)(c-b))
    for b <= t <= c.

    With ``max_levels`` set and more distinct nodal values than that, the
    areas are taken on a uniform grid of ``max_levels`` levels instead, plus
    every plateau level (where the area jumps) and the level just below it.

    ``slivers = (edges, areas)`` adds the regions between boundary chords and
    a curved boundary, carrying the chord's linear values; see
    ``_sliver_superlevel``.
    """
    vertices = np.asarray(vertices, float)
    triangles = np.asarray(triangles)
    u = np.asarray(nodal, dtype=float)
    if np.any(u < -1e-10):
        raise ValueError("field must be nonnegative")
    u = np.maximum(u, 0.0)
    p = vertices[triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if slivers is not None:
        s_edges, s_area = np.asarray(slivers[0]), np.asarray(slivers[1], dtype=float)
        keep = s_area > 0
        s_val, s_area = np.sort(u[s_edges[keep]], axis=1), s_area[keep]
    else:
        s_val, s_area = np.zeros((0, 2)), np.zeros(0)
    if total_mass is None:
        total_mass = float(area.sum() + s_area.sum())

    tv = np.sort(u[triangles], axis=1)
    a, b, c = tv[:, 0], tv[:, 1], tv[:, 2]

    lev = np.unique(u)
    span = lev[-1] - lev[0]
    if len(lev) > 1:
        keep = np.ones(len(lev), dtype=bool)
        keep[1:] = np.diff(lev) > 1e-14 * span
        lev = lev[keep]
    if lev[0] > 0:
        lev = np.concatenate([[0.0], lev])
    if max_levels is not None and len(lev) > max_levels:
        flat_levels = np.unique(np.concatenate([a[c <= a], s_val[s_val[:, 1] <= s_val[:, 0], 0]]))
        below = np.nextafter(flat_levels[flat_levels > 0], -np.inf)
        q = np.unique(np.concatenate([np.linspace(lev[0], lev[-1], max_levels),
                                      flat_levels, below]))
    elif len(lev) > 1 and interior_points > 0:
        frac = np.arange(1, interior_points + 1) / (interior_points + 1)
        inner = lev[:-1, None] + np.diff(lev)[:, None] * frac[None, :]
        q = np.sort(np.concatenate([lev, inner.ravel()]))
    else:
        q = lev
    mu = _superlevel_area(a, b, c, area, q)
    if len(s_area):
        mu += _sliver_superlevel(s_val, s_area, q)
    mu = np.minimum.accumulate(mu)
    mu[-1] = 0.0
    return MonotoneProfile(q, mu, "linear", total_mass)


def _superlevel_area(a, b, c, area, q, chunk: int = 4_000_000):
    nq = len(q)
    flat = c <= a
    # full triangles: q < a for flat, q <= a otherwise (the formula is continuous there)
    n_full = np.where(flat, np.searchsorted(q, a, side="left"),
                      np.searchsorted(q, a, side="right"))
    acc = np.zeros(nq + 1)
    acc[0] = area.sum()
    np.add.at(acc, n_full, -area)
    mu = np.cumsum(acc)[:nq]

    lo = n_full
    hi = np.where(flat, lo, np.searchsorted(q, c, side="left"))
    counts = np.maximum(hi - lo, 0)
    tri = np.nonzero(counts)[0]
    start = 0
    while start < len(tri):
        stop = start
        total = 0
        while stop < len(tri) and (total == 0 or total + counts[tri[stop]] <= chunk):
            total += counts[tri[stop]]
            stop += 1
        sel = tri[start:stop]
        cnt = counts[sel]
        rep = np.repeat(sel, cnt)
        off = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        qi = np.repeat(lo[sel], cnt) + off
        t = q[qi]
        aa, bb, cc, A = a[rep], b[rep], c[rep], area[rep]
        lower = t <= bb
        with np.errstate(divide="ignore", invalid="ignore"):
            part = np.where(lower,
                            A - A * (t - aa) ** 2 / ((bb - aa) * (cc - aa)),
                            A * (cc - t) ** 2 / ((cc - aa) * (cc - bb)))
        mu += np.bincount(qi, weights=part, minlength=nq)
        start = stop
    return mu


def _sliver_superlevel(vals, areas, q, chunk: int = 1 << 22):
    """Superlevel area of thin boundary segments with linear values along the chord.

    The segment thickness is taken parabolic along the chord (exact to leading
    order for a smooth arc), so the fraction of area within a distance r (as a
    fraction of the chord) from either end is W(r) = 3 r^2 - 2 r^3.
    """
    lo, hi = vals[:, 0], vals[:, 1]
    out = np.zeros(len(q))
    step = max(1, chunk // max(1, len(areas)))
    for k in range(0, len(q), step):
        t = q[k:k + step, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.clip((hi - t) / (hi - lo), 0.0, 1.0)
        r = np.where(hi > lo, r, (hi > t).astype(float))
        out[k:k + step] = (r * r * (3.0 - 2.0 * r)) @ areas
    return out


def distribution_function(field) -> MonotoneProfile:
    """t -> |{field > t}| for samples, P1 solutions, radial profiles or monotone profiles."""
    if isinstance(field, WeightedSamples):
        return _inverse(field.rearranged())
    if isinstance(field, MonotoneProfile):
        return _inverse(field)
    if hasattr(field, "nodal") and hasattr(field, "mesh"):
        m = field.mesh
        slivers = None if m.boundary_slivers is None else (m.boundary_edges, m.boundary_slivers)
        return p1_distribution(m.vertices, m.triangles, field.nodal, max_levels=FEM_LEVELS,
                               slivers=slivers)
    if hasattr(field, "distribution"):
        return field.distribution()
    raise TypeError(f"cannot build a distribution function from {type(field).__name__}")


def decreasing_rearrangement(mu: MonotoneProfile) -> MonotoneProfile:
    """u*(s) = inf{t >= 0 : mu(t) < s} on [0, |Omega|], with |Omega| = ``mu.total_mass``."""
    star = _inverse(mu)
    measure = float(mu.total_mass)
    if star.x[-1] < measure * (1 - 1e-15):
        xs, ys = star.polyline()
        xs = np.append(xs, measure)
        ys = np.append(ys, 0.0)
        xs, ys = _simplify(xs, ys)
        if star.kind == "step":
            return _to_step(xs, ys, star.total_mass)
        return MonotoneProfile(xs, ys, "linear", star.total_mass)
    return star


@dataclass(frozen=True, eq=False)
class SchwarzFunction:
    """Radial function x -> u*(omega_N |x|^N) on the ball of measure ``ustar.x[-1]``."""

    ustar: MonotoneProfile
    dimension: int

    @property
    def radius(self) -> float:
        return (self.ustar.x[-1] / unit_ball_volume(self.dimension)) ** (1.0 / self.dimension)

    def __call__(self, rho):
        s = unit_ball_volume(self.dimension) * np.asarray(rho, dtype=float) ** self.dimension
        return self.ustar(s)


def schwarz_profile(ustar: MonotoneProfile, dimension: int) -> SchwarzFunction:
    return SchwarzFunction(ustar, int(dimension))


# ---------------------------------------------------------------- norms


@dataclass(frozen=True)
class LorentzIndex:
    p: float
    q: float = math.inf

    def __post_init__(self):
        if not self.p > 0 or not self.q > 0:
            raise ValueError("Lorentz indices must be positive")


def lorentz_norm(mu: MonotoneProfile, idx: LorentzIndex) -> float:
    """Lorentz quasi-norm from a distribution function.

    For finite q this is p^(1/q) (int t^(q-1) mu(t)^(q/p) dt)^(1/q), integrated
    piece by piece: constant pieces in closed form, sloped pieces by Gauss
    rules (Gauss-Jacobi on a piece where mu reaches zero).  For q = inf it is
    sup_t t^p mu(t) (deliberately not the more common sup_t t mu(t)^(1/p)).
    """
    p, q = float(idx.p), float(idx.q)
    xs, ys = mu.polyline()
    if math.isinf(q):
        return _lorentz_sup(xs, ys, p)
    r = q / p
    total = 0.0
    for t0, t1, m0, m1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
        if t1 <= t0 or m0 <= 0:
            continue
        if m0 == m1:
            total += (t1**q - t0**q) / q * m0**r
        elif m1 == 0:
            total += _jacobi_piece(t0, t1, m0, q, r)
        else:
            tq = 0.5 * (t1 - t0) * _GL_X + 0.5 * (t0 + t1)
            m = m0 + (m1 - m0) * (tq - t0) / (t1 - t0)
            total += 0.5 * (t1 - t0) * np.dot(_GL_W, tq ** (q - 1) * m**r)
    if not math.isfinite(total):
        raise ValueError("Lorentz integral diverges")
    return p ** (1.0 / q) * total ** (1.0 / q)


_jacobi_cache: dict = {}


def _jacobi_piece(t0, t1, m0, q, r):
    """int_{t0}^{t1} t^(q-1) (m0 (t1-t)/(t1-t0))^r dt, weight sigma^r handled exactly."""
    key = round(r, 14)
    if key not in _jacobi_cache:
        _jacobi_cache[key] = roots_jacobi(_GAUSS_N, 0.0, r)
    xj, wj = _jacobi_cache[key]
    sigma = 0.5 * (1.0 + xj)
    d = t1 - t0
    t = t1 - d * sigma
    return d * m0**r * 2.0 ** (-r - 1.0) * float(np.dot(wj, t ** (q - 1)))


def _lorentz_sup(xs, ys, p):
    best = 0.0
    for t0, t1, m0, m1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
        if t1 <= t0:
            continue
        cand = [t0, t1]
        slope = (m1 - m0) / (t1 - t0)
        if slope < 0:
            a = m0 - slope * t0
            ts = -p * a / ((p + 1.0) * slope)
            if t0 < ts < t1:
                cand.append(ts)
        for t in cand:
            m = m0 + slope * (t - t0)
            best = max(best, t**p * m)
    return best


def lp_norm_from_distribution(mu: MonotoneProfile, p: float) -> float:
    return lorentz_norm(mu, LorentzIndex(p, p))


# ---------------------------------------------------------------- sources


def source_rearrangement(values, measures) -> MonotoneProfile:
    """f* of a piecewise-constant source given its piece values and piece measures."""
    v = np.asarray(values, dtype=float)
    m = np.asarray(measures, dtype=float)
    if np.any(v < 0):
        raise ValueError("source values must be nonnegative")
    if np.any(m <= 0):
        raise ValueError("piece measures must be positive")
    order = np.argsort(-v, kind="stable")
    vs, ms = v[order], m[order]
    x = np.concatenate([[0.0], np.cumsum(ms)])
    y = np.concatenate([vs, [0.0]])
    keep = np.ones(len(x), dtype=bool)
    keep[1:-1] = y[1:-1] != y[:-2]
    return MonotoneProfile(x[keep], y[keep], "step", float(vs[0]))


def product_integral(f: MonotoneProfile, g: MonotoneProfile) -> float:
    """Integral of f*g over the common support, by pairing every piece intersection."""
    xf, _ = f.polyline()
    xg, _ = g.polyline()
    lo = max(xf[0], xg[0])
    hi = min(xf[-1], xg[-1])
    cuts = np.unique(np.concatenate([xf, xg]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]
    total = 0.0
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        if f.kind == "step" and g.kind == "step":
            total += (x1 - x0) * f(x0) * g(x0)
        else:
            xq = 0.5 * (x1 - x0) * _GL_X + 0.5 * (x0 + x1)
            total += 0.5 * (x1 - x0) * float(np.dot(_GL_W, f(xq) * g(xq)))
    return total


# ---------------------------------------------------------------- CSV


def write_profile_csv(profile: MonotoneProfile, path, header: str = "x,value") -> None:
    rows = [header] + [f"{a:.17g},{b:.17g}" for a, b in zip(profile.x.tolist(), profile.y.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def read_profile_csv(path, kind: str = "linear", total_mass: float | None = None) -> MonotoneProfile:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return MonotoneProfile(data[:, 0], data[:, 1], kind, total_mass)
