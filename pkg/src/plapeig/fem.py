"""P1 finite elements for the Dirichlet p-Laplacian eigenproblem.

The first eigenpair is found by the nonlinear inverse power iteration:
given ``u_n`` with unit L^p norm and ``lam_n = R(u_n)``, solve the convex
problem ``min (1/p) int |grad v|^p - lam_n int |u_n|^(p-2) u_n v`` by damped
Newton, renormalise, repeat. Each step cannot increase the Rayleigh
quotient, so ``rayleigh_history`` is monotone.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .geometry import TriangleMesh, write_mesh

P_FEM_MIN = 1.2
P_FEM_MAX = 10.0
HESSIAN_EPS = 1e-10


class FEMError(RuntimeError):
    pass


class _Assembly:
    """Per-mesh data shared by every solve: gradients, sparsity, Laplace matrices."""

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        self.tri = np.ascontiguousarray(mesh.triangles)
        self.grads, self.area = kernels.shape_gradients(mesh.vertices, mesh.triangles)
        self.free = np.asarray(mesh.interior)
        n = mesh.n_vertices
        rows = np.repeat(self.tri, 3, axis=1).ravel()
        cols = np.tile(self.tri, (1, 3)).ravel()
        pattern = sp.csr_matrix((np.arange(rows.size, dtype=np.float64) + 1, (rows, cols)), shape=(n, n))
        pattern.sum_duplicates()
        pattern.sort_indices()
        self.indptr = pattern.indptr
        self.indices = pattern.indices
        # position of each local (t, i, j) entry inside the CSR data array
        order = np.lexsort((cols, rows))
        key = rows[order].astype(np.int64) * n + cols[order]
        first = np.r_[True, key[1:] != key[:-1]]
        slot = np.cumsum(first) - 1
        self.slot = np.empty(rows.size, dtype=np.int64)
        self.slot[order] = slot
        self.nnz = int(slot[-1]) + 1
        gg = np.einsum("tad,tbd->tab", self.grads, self.grads) * self.area[:, None, None]
        self.stiffness = self.assemble(gg)
        local_mass = self.area[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
        self.mass = self.assemble(local_mass)
        self._laplace_lu = None

    def assemble(self, blocks: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.slot, weights=blocks.ravel(), minlength=self.nnz)
        n = self.mesh.n_vertices
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def restrict(self, a: sp.csr_matrix) -> sp.csc_matrix:
        return a[self.free][:, self.free].tocsc()

    def laplace_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._laplace_lu is None:
            self._laplace_lu = spla.splu(self.restrict(self.stiffness))
        return self._laplace_lu.solve(rhs)

    # quadrature-consistent functionals

    def energy_grad(self, u, p):
        return kernels.energy_grad(u, self.tri, self.grads, self.area, float(p))

    def lp_power(self, u, p):
        qp, qw = kernels.quadrature(p)
        return kernels.lp_power(u, self.tri, self.area, qp, qw, float(p))

    def lp_load(self, u, p):
        qp, qw = kernels.quadrature(p)
        return kernels.lp_load(u, self.tri, self.area, qp, qw, float(p))

    def hessian(self, u, p, eps=HESSIAN_EPS):
        return self.assemble(kernels.hessian_blocks(u, self.tri, self.grads, self.area, float(p), eps))


def assembly(mesh: TriangleMesh) -> _Assembly:
    asm = mesh._cache.get("fem")
    if asm is None:
        asm = _Assembly(mesh)
        mesh._cache["fem"] = asm
    return asm


@dataclass
class NodalField:
    """Vertex values of a P1 function; boundary vertices carry zero."""

    mesh: TriangleMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ValueError(
                f"expected {self.mesh.n_vertices} vertex values, got shape {self.values.shape}"
            )

    @classmethod
    def interpolate(cls, mesh: TriangleMesh, fn) -> "NodalField":
        """Interpolant of ``fn(x, y)`` with the Dirichlet condition imposed."""
        v = np.asarray(fn(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=np.float64)
        v = np.broadcast_to(v, (mesh.n_vertices,)).copy()
        v[mesh.boundary] = 0.0
        return cls(mesh, v)

    def __mul__(self, c: float) -> "NodalField":
        return NodalField(self.mesh, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "NodalField":
        return NodalField(self.mesh, -self.values)

    def __add__(self, other: "NodalField") -> "NodalField":
        if other.mesh is not self.mesh:
            raise ValueError("fields live on different meshes")
        return NodalField(self.mesh, self.values + other.values)

    def __sub__(self, other: "NodalField") -> "NodalField":
        return self + (-other)

    def normalized(self, p: float) -> "NodalField":
        return self * (1.0 / lp_norm(self, p))

    def save(self, path: Union[str, Path]) -> None:
        write_mesh(path, self.mesh, self.values)


def lp_norm(f: NodalField, p: float) -> float:
    return assembly(f.mesh).lp_power(f.values, p) ** (1.0 / p)


def energy(f: NodalField, p: float) -> float:
    """Discrete Dirichlet p-energy ``int |grad u|^p``, exact for P1."""
    return assembly(f.mesh).energy_grad(f.values, p)[0]


def energy_gradient(f: NodalField, p: float) -> np.ndarray:
    """Derivative of :func:`energy` with respect to every vertex value."""
    return assembly(f.mesh).energy_grad(f.values, p)[1]


def rayleigh(f: NodalField, p: float) -> float:
    asm = assembly(f.mesh)
    den = asm.lp_power(f.values, p)
    if den == 0.0:
        raise ValueError("zero field has no Rayleigh quotient")
    return asm.energy_grad(f.values, p)[0] / den


def weak_residual(f: NodalField, lam: float, p: float) -> float:
    """Dual norm of the discrete weak eigen-equation residual.

    The residual functional ``phi -> int |grad u|^(p-2) grad u . grad phi -
    lam int |u|^(p-2) u phi`` is measured against P1 test functions of unit
    Dirichlet (H^1_0) energy.
    """
    asm = assembly(f.mesh)
    r = asm.energy_grad(f.values, p)[1] / p - lam * asm.lp_load(f.values, p)
    r = r[asm.free]
    return float(math.sqrt(max(r @ asm.laplace_solve(r), 0.0)))


@dataclass
class EigenResult:
    lam: float
    field: NodalField
    p: float
    iterations: int
    residual: float
    rayleigh_history: List[float]
    converged: bool
    tol: float = float("nan")

    @property
    def mesh(self) -> TriangleMesh:
        return self.field.mesh

    def to_dict(self, domain: Optional[dict] = None) -> dict:
        return {
            "domain": domain,
            "p": self.p,
            "h": self.mesh.h,
            "lambda": self.lam,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }

    def to_json(self, path: Union[str, Path], domain: Optional[dict] = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(domain), indent=2, sort_keys=True) + "\n")


def _check_fem_p(p: float) -> None:
    if not (isinstance(p, (int, float, np.floating)) and P_FEM_MIN <= p <= P_FEM_MAX):
        raise ValueError(f"p must lie in [{P_FEM_MIN}, {P_FEM_MAX}] for the FEM solver, got {p!r}")


def initial_bubble(mesh: TriangleMesh) -> NodalField:
    """Positive bubble ``(1 - (r/R)^2)``, times ``sin(pi theta/angle)`` on sectors."""
    R = mesh.radius if math.isfinite(mesh.radius) else np.abs(mesh.vertices).max()
    angle = mesh.angle if math.isfinite(mesh.angle) else 2 * math.pi

    def bump(x, y):
        r2 = (x * x + y * y) / R**2
        v = 1.0 - r2
        if angle < 2 * math.pi - 1e-12:
            th = np.mod(np.arctan2(y, x), 2 * math.pi)
            v = v * np.sin(math.pi * np.clip(th / angle, 0.0, 1.0))
        return np.clip(v, 0.0, None)

    return NodalField.interpolate(mesh, bump)


def _inner_newton(asm: _Assembly, u: np.ndarray, load: np.ndarray, lam: float, p: float) -> np.ndarray:
    """Minimise ``E(v)/p - lam * load.v`` over the free vertex values."""
    free = asm.free
    v = u.copy()
    if p == 2.0:
        K = asm.restrict(asm.stiffness)
        v[free] = spla.spsolve(K, lam * load[free])
        return v

    def objective(x):
        e, g = asm.energy_grad(x, p)
        return e / p - lam * (load @ x), g[free] / p - lam * load[free]

    j, g = objective(v)
    for _ in range(60):
        H = asm.restrict(asm.hessian(v, p)) / p
        try:
            d = spla.spsolve(H, -g)
        except RuntimeError:
            d = -g
        if not np.all(np.isfinite(d)) or g @ d >= 0:
            d = -g
        dec = -(g @ d)
        scale = max(1.0, abs(j))
        if dec <= 1e-28 * scale:
            break
        if dec <= 1e-12 * scale:
            # quadratic regime: the predicted decrease is below the round-off
            # of the objective, so Armijo cannot judge it; take the full step
            v = v.copy()
            v[free] += d
            j, g = objective(v)
            if dec <= 1e-24 * scale:
                break
            continue
        t = 1.0
        accepted = False
        for _ in range(50):
            trial = v.copy()
            trial[free] += t * d
            jt, gt = objective(trial)
            if jt <= j - 1e-4 * t * dec:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        v, j, g = trial, jt, gt
        if dec <= 1e-24 * max(1.0, abs(j)):
            break
    return v


def solve_first_eig(
    mesh: TriangleMesh,
    p: float,
    tol: float = 1e-10,
    max_iter: int = 1000,
    init: Optional[NodalField] = None,
    residual_tol: Optional[float] = None,
) -> EigenResult:
    """First Dirichlet eigenpair of the p-Laplacian on ``mesh``.

    Stops once the relative Rayleigh decrease of a step falls below ``tol``
    and the weak residual is at most ``residual_tol * lam``. The quotient
    converges quadratically in the eigenvector error, so the decrease test
    alone would stop with a residual near ``sqrt(tol)``; the default
    ``residual_tol`` is ``1e-2 * sqrt(tol)``.
    """
    _check_fem_p(p)
    p = float(p)
    asm = assembly(mesh)
    if asm.free.size == 0:
        raise ValueError("mesh has no interior vertices")
    if residual_tol is None:
        residual_tol = 1e-2 * math.sqrt(tol)
    f = initial_bubble(mesh) if init is None else init
    u = f.normalized(p).values
    lam = rayleigh(NodalField(mesh, u), p)
    history = [lam]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        load = asm.lp_load(u, p)
        v = _inner_newton(asm, u, load, lam, p)
        v = v / asm.lp_power(v, p) ** (1.0 / p)
        lam_new = asm.energy_grad(v, p)[0]
        if not lam_new <= lam:
            # round-off floor reached: the step did not decrease the quotient
            converged = (lam_new - lam) <= 1e-12 * lam
            it -= 1
            break
        decrease = (lam - lam_new) / lam
        u, lam = v, lam_new
        history.append(lam)
        if decrease < tol and weak_residual(NodalField(mesh, u), lam, p) <= residual_tol * lam:
            converged = True
            break
    if np.sum(u) < 0:
        u = -u
    field_ = NodalField(mesh, u)
    lam = rayleigh(field_, p)
    return EigenResult(
        lam, field_, p, it, weak_residual(field_, lam, p), history, converged, tol
    )


def solve_linear_eigs(mesh: TriangleMesh, m: int) -> List[EigenResult]:
    """The ``m`` smallest eigenpairs of the P1 Laplacian (p = 2)."""
    asm = assembly(mesh)
    nfree = asm.free.size
    if not 1 <= m <= nfree:
        raise ValueError(f"m must lie in [1, {nfree}], got {m}")
    K = asm.restrict(asm.stiffness)
    M = asm.restrict(asm.mass)
    if nfree <= 400 or m >= nfree - 1:
        import scipy.linalg as sla

        w, V = sla.eigh(K.toarray(), M.toarray(), subset_by_index=[0, m - 1])
    else:
        try:
            w, V = spla.eigsh(K, k=m, M=M, sigma=0.0, which="LM", tol=1e-14)
        except spla.ArpackNoConvergence as exc:
            raise FEMError(f"eigensolver stagnated: {exc}") from exc
    order = np.argsort(w)
    out = []
    for j in order:
        u = np.zeros(mesh.n_vertices)
        u[asm.free] = V[:, j]
        if u.sum() < 0:
            u = -u
        f = NodalField(mesh, u).normalized(2.0)
        lam = rayleigh(f, 2.0)
        out.append(EigenResult(lam, f, 2.0, 0, weak_residual(f, lam, 2.0), [lam], True))
    out.sort(key=lambda e: e.lam)
    return out
