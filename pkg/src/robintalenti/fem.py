"""P1 finite elements for -Laplace(u) = f with du/dn + beta u = 0 on the boundary."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .geometry import Mesh, Source


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to converge."""


@dataclass(frozen=True, eq=False)
class RobinSystem:
    mesh: Mesh
    beta: float
    stiffness: sp.csr_matrix
    boundary_mass: sp.csr_matrix
    mass: sp.csr_matrix
    load: np.ndarray
    source: Source

    @cached_property
    def operator(self) -> sp.csr_matrix:
        """K + beta B, the matrix of the bilinear form of the weak problem."""
        return (self.stiffness + self.beta * self.boundary_mass).tocsr()


def _scatter(rows, cols, vals, n):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def element_matrices(mesh: Mesh):
    """Global stiffness, domain mass and boundary mass matrices of P1 elements."""
    n = mesh.n_vertices
    t = mesh.triangles
    p = mesh.vertices[t]
    area = mesh.signed_areas()
    # b_i = y_j - y_k, c_i = x_k - x_j over cyclic (i, j, k)
    b = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1)
    c = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1)
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area[:, None, None])
    me = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    rows = np.repeat(t, 3, axis=1)
    cols = np.tile(t, (1, 3))
    K = _scatter(rows, cols, ke.reshape(len(t), 9), n)
    M = _scatter(rows, cols, me.reshape(len(t), 9), n)

    e = mesh.boundary_edges
    length = mesh.boundary_lengths()
    be = length[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])[None]
    brows = np.repeat(e, 2, axis=1)
    bcols = np.tile(e, (1, 2))
    B = _scatter(brows, bcols, be.reshape(len(e), 4), n)
    return K, M, B


def assemble(mesh: Mesh, beta: float, source: Source) -> RobinSystem:
    if not beta > 0:
        raise ValueError("beta must be positive")
    n_comp = int(mesh.tri_component.max()) + 1 if len(mesh.triangles) else 0
    if len(source.values) != n_comp:
        raise ValueError(f"source has {len(source.values)} pieces but the mesh has "
                         f"{n_comp} source regions; pieces must be unions of triangles")
    K, M, B = element_matrices(mesh)
    f_tri = np.asarray(source.values)[mesh.tri_component]
    area = mesh.signed_areas()
    F = np.bincount(mesh.triangles.ravel(), weights=np.repeat(f_tri * area / 3.0, 3),
                    minlength=mesh.n_vertices)
    return RobinSystem(mesh, float(beta), K, B, M, F, source)


@dataclass(frozen=True, eq=False)
class FemSolution:
    system: RobinSystem
    nodal: np.ndarray
    residual: float
    iterations: int

    @property
    def mesh(self) -> Mesh:
        return self.system.mesh

    @property
    def beta(self) -> float:
        return self.system.beta

    @property
    def max(self) -> float:
        return float(self.nodal.max())

    def integral(self, power: float = 1.0) -> float:
        """Integral of u_h**power over the mesh (exact for power 1 and 2)."""
        u = self.nodal
        if power == 1.0:
            return float(self.system.mass @ u @ np.ones_like(u))
        if power == 2.0:
            return float(u @ (self.system.mass @ u))
        raise ValueError("only powers 1 and 2 are integrated exactly")


def _jacobi(A):
    d = A.diagonal()
    return LinearOperator(A.shape, matvec=lambda x: x / d, dtype=float)


def iteration_cap(n: int) -> int:
    return int(50 * math.sqrt(n)) + 1000


def pcg(A, b, tol: float, x0=None, maxiter: int | None = None):
    """Jacobi-preconditioned CG; returns (x, relative residual, iterations)."""
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0
    maxiter = maxiter or iteration_cap(len(b))
    count = [0]

    def tick(_):
        count[0] += 1

    M = _jacobi(A)
    x = x0
    for _ in range(3):
        x, info = cg(A, b, x0=x, rtol=tol, atol=0.0, maxiter=maxiter - count[0], M=M,
                     callback=tick)
        rel = np.linalg.norm(b - A @ x) / bnorm
        if rel <= tol:
            return x, float(rel), count[0]
        if count[0] >= maxiter:
            break
    raise SolverError(f"CG did not reach relative residual {tol:g} in {count[0]} iterations "
                      f"(last {rel:.3e})")


def solve(system: RobinSystem, tol: float = 1e-10) -> FemSolution:
    """Minimize the discrete energy by solving (K + beta B) u = F."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    u, rel, its = pcg(system.operator, system.load, tol)
    if u.min() < -1e-10:
        raise SolverError(f"discrete solution is negative ({u.min():.3e}) for a nonnegative source")
    return FemSolution(system, u, rel, its)


def boundary_integral(sol: FemSolution, transform=None) -> float:
    """Two-point Gauss rule on every boundary edge of transform(u_h)."""
    e = sol.mesh.boundary_edges
    length = sol.mesh.boundary_lengths()
    u0, u1 = sol.nodal[e[:, 0]], sol.nodal[e[:, 1]]
    g = 0.5 / math.sqrt(3.0)
    ua = (0.5 + g) * u0 + (0.5 - g) * u1
    ub = (0.5 - g) * u0 + (0.5 + g) * u1
    if transform is None:
        va, vb = ua, ub
    else:
        va, vb = np.asarray(transform(ua), float), np.asarray(transform(ub), float)
        va = np.broadcast_to(va, ua.shape)
        vb = np.broadcast_to(vb, ub.shape)
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise ValueError("transform is undefined at some boundary value")
    return float(np.sum(0.5 * length * (va + vb)))


def boundary_min(sol: FemSolution) -> float:
    return float(sol.nodal[sol.mesh.boundary_vertices].min())


def energy(sol: FemSolution) -> float:
    u = sol.nodal
    return float(0.5 * u @ (sol.system.operator @ u) - sol.system.load @ u)


def flux_residual(sol: FemSolution) -> float:
    """|beta * boundary integral of u - integral of f| relative to the integral of f."""
    total = float(sol.system.load.sum())
    if total == 0.0:
        return 0.0
    return abs(sol.beta * boundary_integral(sol) - total) / total


def first_eigenpair(mesh: Mesh, beta: float, tol: float = 1e-10, maxiter: int = 500):
    """Smallest Robin eigenvalue by inverse power iteration with CG inner solves.

    Returns ``(lam, mode)`` with ``mode`` M-normalized and of positive mean.
    Disconnected meshes are rejected: the first eigenvalue of a disjoint
    union is the minimum over components.
    """
    if mesh.n_components() != 1:
        raise ValueError("first_eigenpair needs a connected mesh; solve per component")
    if not beta > 0:
        raise ValueError("beta must be positive")
    K, M, B = element_matrices(mesh)
    A = (K + beta * B).tocsr()
    x = np.ones(mesh.n_vertices)
    x /= math.sqrt(x @ (M @ x))
    lam = (x @ (A @ x))
    guess = x / lam
    for _ in range(maxiter):
        y, _, _ = pcg(A, M @ x, tol=min(1e-11, tol * 1e-1), x0=guess)
        my = M @ y
        new = float((y @ (A @ y)) / (y @ my))
        y /= math.sqrt(y @ my)
        done = abs(new - lam) <= tol * abs(new)
        x, lam = y, new
        guess = x / lam
        if done:
            if x.sum() < 0:
                x = -x
            return lam, x
    raise SolverError("inverse power iteration did not converge")


def write_solution_csv(sol: FemSolution, path) -> None:
    rows = ["x,y,u"] + [f"{x:.17g},{y:.17g},{u:.17g}"
                        for (x, y), u in zip(sol.mesh.vertices.tolist(), sol.nodal.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def write_matrix(A, path) -> None:
    coo = sp.coo_matrix(A)
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            fh.write(f"{i} {j} {v:.17g}\n")
