"""Symmetric eigenfunctions built from a wedge eigenfunction.

The first eigenfunction ``v`` of the wedge of opening ``pi/k`` is zero
extended to the disc and combined with its rotations,
``Psi_k = sum_i (-1)^i v_{i pi / k}`` for ``i = 0 .. 2k-1``. On a disc mesh
whose spoke pitch divides ``pi/k`` every rotation is a permutation of vertex
values, so the construction involves no interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .fem import EigenResult, NodalField, energy, lp_norm, rayleigh, weak_residual
from .geometry import TriangleMesh, rotate_point


class MeshMismatch(ValueError):
    """Meshes or rotation angle are not vertex-aligned."""


def _tree(mesh: TriangleMesh) -> cKDTree:
    tree = mesh._cache.get("kdtree")
    if tree is None:
        tree = cKDTree(mesh.vertices)
        mesh._cache["kdtree"] = tree
    return tree


def _match(mesh: TriangleMesh, points: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.abs(mesh.vertices).max()))
    dist, idx = _tree(mesh).query(points)
    if dist.size and dist.max() > 1e-9 * scale:
        raise MeshMismatch(f"{what}: {np.count_nonzero(dist > 1e-9 * scale)} points have no matching vertex")
    return idx


def rotation_permutation(mesh: TriangleMesh, omega: float) -> np.ndarray:
    """Index map ``perm`` with ``v_omega = v[perm]`` for fields on ``mesh``."""
    key = ("rotperm", round(omega % (2 * math.pi), 12))
    perm = mesh._cache.get(key)
    if perm is None:
        perm = _match(mesh, rotate_point(mesh.vertices, -omega), f"rotation by {omega:.6g}")
        mesh._cache[key] = perm
    return perm


def rotate_field(f: NodalField, omega: float) -> NodalField:
    """Rotated field ``x -> f(R_{-omega} x)``; ``omega`` must be mesh-aligned."""
    return NodalField(f.mesh, f.values[rotation_permutation(f.mesh, omega)])


def extend_by_zero(f: NodalField, target: TriangleMesh) -> NodalField:
    """Transfer a field on a sub-mesh to ``target``, zero elsewhere."""
    idx = _match(target, f.mesh.vertices, "sub-mesh transfer")
    out = np.zeros(target.n_vertices)
    out[idx] = f.values
    return NodalField(target, out)


def _triangle_adjacency(mesh: TriangleMesh) -> np.ndarray:
    adj = mesh._cache.get("tri_adj")
    if adj is None:
        t = mesh.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        owner = np.tile(np.arange(mesh.n_triangles), 3)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e, owner = e[order], owner[order]
        same = np.all(e[1:] == e[:-1], axis=1)
        adj = np.stack([owner[:-1][same], owner[1:][same]], axis=1)
        mesh._cache["tri_adj"] = adj
    return adj


def triangle_signs(f: NodalField, floor: float = 1e-3) -> np.ndarray:
    """Per-triangle sign of the vertex mean; 0 where below the relative floor."""
    mean = f.values[f.mesh.triangles].mean(axis=1)
    scale = np.abs(f.values).max()
    s = np.sign(mean).astype(np.int8)
    s[np.abs(mean) <= floor * scale] = 0
    return s


def count_nodal_domains(f: NodalField, floor: float = 1e-3) -> int:
    """Connected same-sign components of the triangle edge-adjacency graph."""
    if not 0 < floor < 0.1:
        raise ValueError(f"floor must lie in (0, 0.1), got {floor}")
    if not np.any(f.values):
        raise ValueError("zero field has no nodal domains")
    s = triangle_signs(f, floor)
    adj = _triangle_adjacency(f.mesh)
    keep = (s[adj[:, 0]] != 0) & (s[adj[:, 0]] == s[adj[:, 1]])
    a, b = adj[keep, 0], adj[keep, 1]
    n = f.mesh.n_triangles
    g = coo_matrix((np.ones(a.size), (a, b)), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return int(np.unique(labels[s != 0]).size)


@dataclass
class SymmetricEigenfunction:
    k: int
    p: float
    field: NodalField
    tau: float
    residual: float
    nodal_count: int
    components: List[NodalField]
    wedge_energy: float
    wedge_residual: float

    def antiperiodicity_defect(self) -> float:
        """Max |Psi(R_{pi/k} x) + Psi(x)| over vertices, exactly 0 on aligned meshes."""
        rot = rotate_field(self.field, math.pi / self.k)
        return float(np.abs(rot.values + self.field.values).max())


def assemble_psi_k(wedge_result: EigenResult, disc_mesh: TriangleMesh, k: int) -> SymmetricEigenfunction:
    """Alternating sum of the ``2k`` rotated copies of the wedge eigenfunction."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    wedge = wedge_result.mesh
    if math.isfinite(wedge.angle) and abs(wedge.angle - math.pi / k) > 1e-12:
        raise MeshMismatch(f"wedge opening {wedge.angle:.6g} is not pi/{k}")
    if disc_mesh.n_triangles != 2 * k * wedge.n_triangles:
        raise MeshMismatch(
            f"disc has {disc_mesh.n_triangles} triangles, expected 2k x {wedge.n_triangles}"
        )
    if not wedge_result.converged:
        raise RuntimeError("wedge eigenpair did not converge")
    p = wedge_result.p
    v = extend_by_zero(wedge_result.field.normalized(p), disc_mesh)
    components = []
    psi = np.zeros(disc_mesh.n_vertices)
    for i in range(2 * k):
        c = rotate_field(v, i * math.pi / k)
        components.append(c)
        psi += c.values if i % 2 == 0 else -c.values
    psi_field = NodalField(disc_mesh, psi).normalized(p)
    tau = wedge_result.lam
    return SymmetricEigenfunction(
        k=k,
        p=p,
        field=psi_field,
        tau=tau,
        residual=weak_residual(psi_field, tau, p),
        nodal_count=count_nodal_domains(psi_field),
        components=components,
        wedge_energy=energy(wedge_result.field.normalized(p), p),
        wedge_residual=wedge_result.residual,
    )


def triangle_support(f: NodalField) -> np.ndarray:
    return np.any(f.values[f.mesh.triangles] != 0.0, axis=1)


@dataclass
class ScalingFamilySample:
    components: List[NodalField]
    alphas: np.ndarray
    combined: NodalField
    p: float

    @property
    def norm(self) -> float:
        return lp_norm(self.combined, self.p)

    @property
    def energy(self) -> float:
        return energy(self.combined, self.p)


def build_scaling_family(components: Sequence[NodalField], alphas, p: float) -> ScalingFamilySample:
    """Combine disjointly supported unit fields with ``sum |alpha_i|^p = 1``."""
    alphas = np.asarray(alphas, dtype=np.float64)
    if len(components) != alphas.size:
        raise ValueError(f"{len(components)} components but {alphas.size} coefficients")
    if abs(np.sum(np.abs(alphas) ** p) - 1.0) > 1e-12:
        raise ValueError("coefficients must satisfy sum |alpha_i|^p = 1")
    mesh = components[0].mesh
    used = np.zeros(mesh.n_triangles, dtype=bool)
    for i, c in enumerate(components):
        if c.mesh is not mesh:
            raise ValueError("components live on different meshes")
        if abs(lp_norm(c, p) - 1.0) > 1e-10:
            raise ValueError(f"component {i} is not normalised in L^{p}")
        sup = triangle_support(c)
        if np.any(used & sup):
            raise ValueError(f"component {i} overlaps an earlier component")
        used |= sup
    combined = np.zeros(mesh.n_vertices)
    for a, c in zip(alphas, components):
        combined += a * c.values
    return ScalingFamilySample(list(components), alphas, NodalField(mesh, combined), float(p))


def random_alphas(m: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """A random point on ``{sum |alpha_i|^p = 1}``."""
    a = rng.standard_normal(m)
    return a / np.sum(np.abs(a) ** p) ** (1.0 / p)
