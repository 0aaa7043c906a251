"""Domains, their symmetrized balls, and structured triangulations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import ellipe, gamma

KINDS = ("disk", "ball", "rectangle", "ellipse", "union")


def unit_ball_volume(n: int) -> float:
    """Lebesgue measure of the unit ball in R^n."""
    if n == 2:
        return math.pi
    if n == 3:
        return 4.0 * math.pi / 3.0
    return math.pi ** (n / 2) / float(gamma(n / 2 + 1))


def isoperimetric_constant(n: int) -> float:
    """N^2 * omega_N^(2/N): the sharp constant in Per(E)^2 >= c |E|^((2N-2)/N)."""
    return n * n * unit_ball_volume(n) ** (2.0 / n)


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    dimension: int
    params: tuple
    measure: float
    perimeter: float
    center: tuple = (0.0, 0.0)
    components: tuple = ()

    @property
    def radius(self) -> float:
        if self.kind not in ("disk", "ball"):
            raise AttributeError(f"{self.kind} has no radius")
        return self.params[0]

    def parts(self) -> tuple:
        """Connected components (a single-element tuple unless this is a union)."""
        return self.components if self.kind == "union" else (self,)

    @property
    def is_ball(self) -> bool:
        return self.kind in ("disk", "ball")

    def feature_size(self) -> float:
        if self.kind == "union":
            return min(c.feature_size() for c in self.components)
        if self.kind == "rectangle" or self.kind == "ellipse":
            return min(self.params)
        return self.params[0]

    def describe(self) -> str:
        if self.kind == "union":
            return "union(" + ",".join(c.describe() for c in self.components) + ")"
        if self.kind == "ball":
            return f"ball:{self.dimension}:{self.params[0]:g}"
        return f"{self.kind}:" + ":".join(f"{p:g}" for p in self.params)


def _check_positive(*values):
    for v in values:
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"domain parameters must be positive and finite, got {v!r}")


def make_domain(kind: str, *params: float, dimension: int | None = None,
                center=None, components=None) -> DomainSpec:
    """Build a domain with exact measure and perimeter.

    ``make_domain("disk", R)``, ``make_domain("ball", R, dimension=N)``,
    ``make_domain("rectangle", w, h)``, ``make_domain("ellipse", a, b)`` and
    ``make_domain("union", components=[...])``.  Union components without an
    explicit center are laid out along the first axis with positive gaps.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown domain kind {kind!r}")
    if kind == "union":
        return _make_union(components or [])

    params = tuple(float(p) for p in params)
    _check_positive(*params)
    if kind == "disk":
        (r,) = params
        n = 2
        measure, perimeter = math.pi * r * r, 2.0 * math.pi * r
    elif kind == "ball":
        (r,) = params
        n = 2 if dimension is None else int(dimension)
        if n < 2:
            raise ValueError("dimension must be >= 2")
        if n == 2:
            kind = "disk"
        w = unit_ball_volume(n)
        measure, perimeter = w * r**n, n * w * r ** (n - 1)
    elif kind == "rectangle":
        a, b = params
        n = 2
        measure, perimeter = a * b, 2.0 * (a + b)
    else:
        a, b = params
        n = 2
        big, small = max(a, b), min(a, b)
        measure = math.pi * a * b
        perimeter = 4.0 * big * float(ellipe(1.0 - (small / big) ** 2))
    if center is None:
        center = (0.0,) * n
    center = tuple(float(c) for c in center)
    if len(center) != n:
        raise ValueError("center dimension mismatch")
    return DomainSpec(kind, n, params, measure, perimeter, center)


def _make_union(components) -> DomainSpec:
    comps = list(components)
    if len(comps) < 1:
        raise ValueError("a union needs at least one component")
    dims = {c.dimension for c in comps}
    if len(dims) != 1:
        raise ValueError("union components must share a dimension")
    (n,) = dims
    if any(not c.is_ball for c in comps):
        raise ValueError("union components must be disks or balls")

    if all(not any(c.center) for c in comps) and len(comps) > 1:
        gap = 0.25 * max(c.radius for c in comps)
        placed, x = [], 0.0
        for c in comps:
            x += c.radius
            placed.append(replace(c, center=(x,) + (0.0,) * (n - 1)))
            x += c.radius + gap
        comps = placed

    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            d = math.dist(comps[i].center, comps[j].center)
            if d - comps[i].radius - comps[j].radius <= 0.0:
                raise ValueError(f"union components {i} and {j} overlap or touch")
    measure = sum(c.measure for c in comps)
    perimeter = sum(c.perimeter for c in comps)
    return DomainSpec("union", n, (), measure, perimeter, (0.0,) * n, tuple(comps))


def schwarz_ball(d: DomainSpec) -> DomainSpec:
    """Origin-centred ball with the same measure as ``d`` (measure copied bitwise)."""
    n = d.dimension
    w = unit_ball_volume(n)
    r = (d.measure / w) ** (1.0 / n)
    return DomainSpec("disk" if n == 2 else "ball", n, (r,), d.measure,
                      n * w * r ** (n - 1), (0.0,) * n)


# ---------------------------------------------------------------- meshes


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    h: float
    tri_component: np.ndarray = field(default=None)
    # area between each boundary edge and the curved boundary it spans (None: polygonal domain)
    boundary_slivers: np.ndarray | None = None

    def __post_init__(self):
        if self.tri_component is None:
            object.__setattr__(self, "tri_component",
                               np.zeros(len(self.triangles), dtype=np.int64))
        if self.boundary_slivers is not None and len(self.boundary_slivers) != len(self.boundary_edges):
            raise ValueError("one sliver area per boundary edge is required")
        for a in (self.vertices, self.triangles, self.boundary_edges, self.tri_component,
                  self.boundary_slivers):
            if a is not None:
                a.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edges(self) -> np.ndarray:
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def boundary_lengths(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def vertex_component(self) -> np.ndarray:
        n = self.n_vertices
        e = self.edges()
        g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return connected_components(g, directed=False)[1]

    def n_components(self) -> int:
        return int(self.vertex_component().max()) + 1

    def n_boundary_loops(self) -> int:
        bv = self.boundary_vertices
        idx = np.searchsorted(bv, self.boundary_edges)
        m = len(bv)
        g = coo_matrix((np.ones(len(idx)), (idx[:, 0], idx[:, 1])), shape=(m, m))
        return connected_components(g, directed=False)[0]

    def euler_characteristics(self) -> list[int]:
        """V - E + F per connected component (F counts triangles only)."""
        comp = self.vertex_component()
        e = self.edges()
        out = []
        for c in range(comp.max() + 1):
            v = int((comp == c).sum())
            ne = int((comp[e[:, 0]] == c).sum())
            nf = int((comp[self.triangles[:, 0]] == c).sum())
            out.append(v - ne + nf)
        return out

    def check(self) -> None:
        """Raise ``ValueError`` if a structural invariant is broken."""
        if np.any(self.signed_areas() <= 0.0):
            raise ValueError("mesh has a non-positive triangle")
        expected = _boundary_edges(self.triangles)
        got = {tuple(e) for e in self.boundary_edges.tolist()}
        if got != {tuple(e) for e in expected.tolist()}:
            raise ValueError("boundary edge list does not match the triangulation")
        starts = np.sort(self.boundary_edges[:, 0])
        ends = np.sort(self.boundary_edges[:, 1])
        if not np.array_equal(starts, ends):
            raise ValueError("boundary edges do not form closed loops")
        if any(chi != 1 for chi in self.euler_characteristics()):
            raise ValueError("a mesh component is not disk-like")


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, oriented as in that (CCW) triangle."""
    directed = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inv.ravel()] == 1
    b = directed[once]
    return b[np.lexsort((b[:, 1], b[:, 0]))]


def _ring_count(k: int, n_rings: int) -> int:
    # 6k vertices inside; the outer quarter keeps the boundary count so no
    # ring merge (a mesh seam) sits next to the boundary
    return 6 * n_rings if k > n_rings - max(1, n_rings // 4) else 6 * k


def _ring_triangulation(n_rings: int):
    """Unit-disk triangulation: centre + rings k=1..n, 6k vertices each except an outer layer of 6n."""
    pts = [(0.0, 0.0)]
    ring_start = [0]
    for k in range(1, n_rings + 1):
        ring_start.append(len(pts))
        m = _ring_count(k, n_rings)
        ang = 2.0 * np.pi * np.arange(m) / m
        rad = k / n_rings
        pts.extend(zip(rad * np.cos(ang), rad * np.sin(ang)))
    tris = []
    for j in range(6):
        tris.append((0, 1 + j, 1 + (j + 1) % 6))
    for k in range(2, n_rings + 1):
        s_in, m_in = ring_start[k - 1], _ring_count(k - 1, n_rings)
        s_out, m_out = ring_start[k], _ring_count(k, n_rings)
        i = j = 0
        while i < m_in or j < m_out:
            a_next = (i + 1) / m_in
            b_next = (j + 1) / m_out
            if j < m_out and (i == m_in or b_next <= a_next):
                tris.append((s_in + i % m_in, s_out + j, s_out + (j + 1) % m_out))
                j += 1
            else:
                tris.append((s_in + i, s_out + j % m_out, s_in + (i + 1) % m_in))
                i += 1
    return np.array(pts), np.array(tris, dtype=np.int64)


def _grid_triangulation(width: float, height: float, h: float):
    nx = max(1, math.ceil(width / h - 1e-9))
    ny = max(1, math.ceil(height / h - 1e-9))
    xs = np.linspace(-width / 2, width / 2, nx + 1)
    ys = np.linspace(-height / 2, height / 2, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + nx + 1
    v11 = v01 + 1
    tris = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    return pts, tris, max(width / nx, height / ny)


def _orient(pts, tris):
    p = pts[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tris = tris.copy()
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _mesh_single(d: DomainSpec, h: float):
    if d.kind == "rectangle":
        pts, tris, hh = _grid_triangulation(d.params[0], d.params[1], h)
    else:
        a, b = (d.params[0], d.params[0]) if d.kind == "disk" else d.params
        n = max(4, math.ceil(max(a, b) / h - 1e-9))
        pts, tris = _ring_triangulation(n)
        pts = pts * np.array([a, b])
        hh = max(a, b) / n
    pts = pts + np.asarray(d.center)
    return pts, _orient(pts, tris), hh


def mesh_generate(d: DomainSpec, h: float) -> Mesh:
    """Structured triangulation: concentric rings for disks/ellipses, a split grid for rectangles."""
    if d.dimension != 2:
        raise ValueError("meshing is only available for planar domains")
    if not h > 0:
        raise ValueError("h must be positive")
    if h > d.feature_size():
        raise ValueError(f"h={h} is too coarse for feature size {d.feature_size()}")
    verts, tris, comp = [], [], []
    offset, h_real = 0, 0.0
    for ci, part in enumerate(d.parts()):
        p, t, hh = _mesh_single(part, h)
        verts.append(p)
        tris.append(t + offset)
        comp.append(np.full(len(t), ci, dtype=np.int64))
        offset += len(p)
        h_real = max(h_real, hh)
    triangles = np.concatenate(tris)
    vertices = np.concatenate(verts)
    bedges = _boundary_edges(triangles)
    owner = np.zeros(len(vertices), dtype=np.int64)
    owner[triangles.ravel()] = np.repeat(np.concatenate(comp), 3)
    return Mesh(vertices, triangles, bedges, h_real, np.concatenate(comp),
                _sliver_areas(d.parts(), vertices, bedges, owner))


def _sliver_areas(parts, vertices, bedges, owner) -> np.ndarray:
    """Area between each chord and its arc; exact for ellipses, zero on straight sides.

    In the parametrisation (a cos s, b sin s) the elliptic segment cut off by
    a chord spanning ds has area ab (ds - sin ds) / 2.
    """
    out = np.zeros(len(bedges))
    comp = owner[bedges[:, 0]]
    for ci, part in enumerate(parts):
        if part.kind == "rectangle":
            continue
        a, b = (part.params[0], part.params[0]) if part.kind == "disk" else part.params
        sel = comp == ci
        p = vertices[bedges[sel]] - np.asarray(part.center)
        s = np.arctan2(p[..., 1] / b, p[..., 0] / a)
        ds = np.abs(np.angle(np.exp(1j * (s[:, 1] - s[:, 0]))))
        out[sel] = 0.5 * a * b * (ds - np.sin(ds))
    return out


# ---------------------------------------------------------------- mesh file


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"VERTICES {mesh.n_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices.tolist()]
    lines.append(f"TRIANGLES {len(mesh.triangles)}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"BOUNDARY_EDGES {len(mesh.boundary_edges)}")
    lines += [f"{i} {j}" for i, j in mesh.boundary_edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, h: float = float("nan")) -> Mesh:
    rows = Path(path).read_text().split("\n")
    pos = 0

    def block(tag, conv, width):
        nonlocal pos
        head = rows[pos].split()
        if len(head) != 2 or head[0] != tag:
            raise ValueError(f"expected {tag} header at line {pos + 1}")
        n = int(head[1])
        body = rows[pos + 1:pos + 1 + n]
        pos += n + 1
        arr = np.array([[conv(v) for v in r.split()] for r in body]).reshape(n, width)
        return arr

    v = block("VERTICES", float, 2).astype(float)
    t = block("TRIANGLES", int, 3).astype(np.int64)
    b = block("BOUNDARY_EDGES", int, 2).astype(np.int64)
    return Mesh(v, t, b, h)


@dataclass(frozen=True)
class Source:
    """Piecewise-constant nonnegative source: one value per domain component."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 or not math.isfinite(v) for v in vals):
            raise ValueError("source values must be finite and nonnegative")
        object.__setattr__(self, "values", vals)

    @classmethod
    def const(cls, domain: DomainSpec, value: float = 1.0) -> "Source":
        return cls((value,) * len(domain.parts()))

    @classmethod
    def indicator(cls, domain: DomainSpec, index: int, value: float = 1.0) -> "Source":
        n = len(domain.parts())
        if not 0 <= index < n:
            raise ValueError(f"component index {index} out of range for {n} components")
        return cls(tuple(value if i == index else 0.0 for i in range(n)))

    def total(self, domain: DomainSpec) -> float:
        """Integral of the source over the domain."""
        return sum(v * c.measure for v, c in zip(self.values, domain.parts()))

    def describe(self) -> str:
        if len(set(self.values)) == 1:
            return f"const:{self.values[0]:g}"
        return "pieces:" + ":".join(f"{v:g}" for v in self.values)
