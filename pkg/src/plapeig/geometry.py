"""Parametric domains and structured polar triangulations.

Meshes are built ring by ring around the origin. A sector of opening
``angle`` is split into ``spokes`` equal spoke sectors; ring ``i`` carries
``i`` segments per spoke sector, and the innermost ring is a fan around the
centre vertex. Rotating a full-disc mesh by any multiple of
``2*pi/spokes`` maps vertices onto vertices and triangles onto triangles,
which is what the symmetric eigenfunction assembly relies on.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

TWO_PI = 2.0 * math.pi


class DomainKind(str, enum.Enum):
    DISC = "disc"
    SECTOR = "sector"
    ANNULUS = "annulus"
    BALL = "ball"


@dataclass(frozen=True)
class DomainSpec:
    """Parametric description of a disc, sector, annulus or N-ball."""

    kind: DomainKind
    radius: float = 1.0
    inner_radius: float = 0.0
    angle: float = TWO_PI
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.kind is DomainKind.ANNULUS and not 0 < self.inner_radius < self.radius:
            raise ValueError(
                f"inner_radius must lie in (0, {self.radius}), got {self.inner_radius}"
            )
        if self.kind is DomainKind.SECTOR and not 0 < self.angle <= TWO_PI + 1e-12:
            raise ValueError(f"angle must lie in (0, 2*pi], got {self.angle}")
        if self.kind is DomainKind.BALL and self.dimension < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dimension}")

    @classmethod
    def disc(cls, radius: float = 1.0) -> "DomainSpec":
        return cls(DomainKind.DISC, radius=radius)

    @classmethod
    def sector(cls, angle: float, radius: float = 1.0) -> "DomainSpec":
        return cls(DomainKind.SECTOR, radius=radius, angle=angle)

    @classmethod
    def wedge(cls, k: int, radius: float = 1.0) -> "DomainSpec":
        """First wedge of order ``k``: the sector of opening ``pi/k``."""
        if k < 1:
            raise ValueError(f"wedge order must be >= 1, got {k}")
        return cls.sector(math.pi / k, radius)

    @classmethod
    def annulus(cls, inner_radius: float, radius: float = 1.0) -> "DomainSpec":
        return cls(DomainKind.ANNULUS, radius=radius, inner_radius=inner_radius)

    @classmethod
    def ball(cls, dimension: int, radius: float = 1.0) -> "DomainSpec":
        return cls(DomainKind.BALL, radius=radius, dimension=dimension)

    @property
    def area(self) -> float:
        if self.kind is DomainKind.DISC:
            return math.pi * self.radius**2
        if self.kind is DomainKind.SECTOR:
            return 0.5 * self.angle * self.radius**2
        if self.kind is DomainKind.ANNULUS:
            return math.pi * (self.radius**2 - self.inner_radius**2)
        raise ValueError("area is only defined for planar domains")

    def mesh(self, h: float, spokes: Optional[int] = None) -> "TriangleMesh":
        if self.kind is DomainKind.DISC:
            return make_sector(self.radius, TWO_PI, h, spokes=spokes)
        if self.kind is DomainKind.SECTOR:
            return make_sector(self.radius, self.angle, h, spokes=spokes)
        if self.kind is DomainKind.ANNULUS:
            return make_annulus(self.inner_radius, self.radius, h)
        raise ValueError("balls are handled radially, not meshed")

    def key(self) -> dict:
        return {
            "kind": self.kind.value,
            "R": self.radius,
            "inner_radius": self.inner_radius,
            "angle": self.angle,
            "N": self.dimension,
        }


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Conforming 2D triangulation with boundary flags.

    ``spokes`` and ``rings`` are set for polar meshes and describe their
    structure; ``angle`` is the opening of the meshed sector.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float
    radius: float = float("nan")
    angle: float = float("nan")
    spokes: int = 0
    rings: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        b = np.ascontiguousarray(self.boundary, dtype=bool)
        for a in (v, t, b):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary", b)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def signed_areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            p = self.vertices[self.triangles]
            e1 = p[:, 1] - p[:, 0]
            e2 = p[:, 2] - p[:, 0]
            a = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
            a.setflags(write=False)
            self._cache["areas"] = a
        return self._cache["areas"]

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @property
    def interior(self) -> np.ndarray:
        """Indices of the free (non-boundary) vertices."""
        if "interior" not in self._cache:
            idx = np.flatnonzero(~self.boundary)
            idx.setflags(write=False)
            self._cache["interior"] = idx
        return self._cache["interior"]

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, shape (n_edges, 2), sorted pairs."""
        if "edges" not in self._cache:
            t = self.triangles
            e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            e.sort(axis=1)
            e = np.unique(e, axis=0)
            e.setflags(write=False)
            self._cache["edges"] = e
        return self._cache["edges"]

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def scaled(self, s: float) -> "TriangleMesh":
        """Copy with every coordinate multiplied by ``s``."""
        return TriangleMesh(
            self.vertices * s,
            self.triangles,
            self.boundary,
            self.h * s,
            radius=self.radius * s,
            angle=self.angle,
            spokes=self.spokes,
            rings=self.rings,
        )

    def save(self, path: Union[str, Path], values: Optional[np.ndarray] = None) -> None:
        write_mesh(path, self, values)


def _check_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float, np.floating)) and value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


def default_spokes(angle: float) -> int:
    """Smallest spoke count keeping each spoke sector at most 60 degrees."""
    return max(1, math.ceil(angle / (math.pi / 3) - 1e-9))


def aligned_spokes(k: int) -> int:
    """Disc spoke count whose pitch divides ``pi/k``.

    Matches the spoke count ``make_sector`` picks for the wedge of opening
    ``pi/k``, so that the wedge mesh is an angular restriction of the disc
    mesh.
    """
    return 2 * k * default_spokes(math.pi / k)


def _polar_vertices(R, angle, n, s, full):
    pts = [(0.0, 0.0)]
    bnd = [True] if not full else [False]
    offsets = [0]
    for i in range(1, n + 1):
        offsets.append(len(pts))
        count = i * s if full else i * s + 1
        r = R * i / n
        th = angle * np.arange(count) / (i * s)
        pts.extend(zip(r * np.cos(th), r * np.sin(th)))
        if i == n:
            bnd.extend([True] * count)
        elif full:
            bnd.extend([False] * count)
        else:
            bnd.extend([True] + [False] * (count - 2) + [True])
    return np.array(pts), np.array(bnd), offsets


def _polar_triangles(n, s, full, offsets):
    def idx(i, q):
        if i == 0:
            return 0
        if full:
            q %= i * s
        return offsets[i] + q

    tris = []
    for t in range(s):
        tris.append((0, idx(1, t), idx(1, t + 1)))
        for i in range(1, n):
            for j in range(i + 1):
                a = idx(i, t * i + j)
                c = idx(i + 1, t * (i + 1) + j)
                d = idx(i + 1, t * (i + 1) + j + 1)
                tris.append((a, c, d))
                if j < i:
                    b = idx(i, t * i + j + 1)
                    tris.append((a, b, d))
    return np.array(tris, dtype=np.int64)


def _orient(vertices, tris):
    p = vertices[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    neg = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _max_edge(vertices, tris):
    p = vertices[tris]
    return max(
        np.linalg.norm(p[:, 0] - p[:, 1], axis=1).max(),
        np.linalg.norm(p[:, 1] - p[:, 2], axis=1).max(),
        np.linalg.norm(p[:, 2] - p[:, 0], axis=1).max(),
    )


def make_sector(R: float, angle: float, h: float, spokes: Optional[int] = None) -> TriangleMesh:
    """Triangulate the sector ``{0 < theta < angle, 0 < r < R}``.

    ``angle == 2*pi`` gives the full disc with the seam merged. The ring
    count is the smallest one whose longest edge does not exceed ``h``.

    >>> m = make_sector(1.0, math.pi, 0.2)
    >>> bool(abs(m.areas.sum() - math.pi / 2) < 0.05)
    True
    """
    _check_positive("R", R)
    _check_positive("h", h)
    if not (isinstance(angle, (int, float, np.floating)) and 0 < angle <= TWO_PI + 1e-12):
        raise ValueError(f"angle must lie in (0, 2*pi], got {angle!r}")
    if not h < R:
        raise ValueError(f"h must lie in (0, R={R}), got {h}")
    full = abs(angle - TWO_PI) <= 1e-12
    if full:
        angle = TWO_PI
    s = spokes if spokes is not None else default_spokes(angle)
    if s < 1 or (full and s < 3):
        raise ValueError(f"spokes must be >= {3 if full else 1}, got {s}")
    # rings are generated in lockstep with the disc so wedge meshes stay
    # angular restrictions of it: n depends only on R, h and the spoke pitch
    beta = angle / s
    n = max(1, math.ceil(R / h))
    while True:
        verts, bnd, offsets = _polar_vertices(R, angle, n, s, full)
        tris = _polar_triangles(n, s, full, offsets)
        if _max_edge(verts, tris) <= h or n > 100000:
            break
        n += 1
    tris = _orient(verts, tris)
    return TriangleMesh(verts, tris, bnd, h, radius=R, angle=angle, spokes=s, rings=n)


def make_disc(R: float, h: float, order: Optional[int] = None) -> TriangleMesh:
    """Disc mesh; with ``order=k`` it is aligned with the wedge of order ``k``."""
    spokes = aligned_spokes(order) if order is not None else None
    return make_sector(R, TWO_PI, h, spokes=spokes)


def make_wedge(R: float, k: int, h: float) -> TriangleMesh:
    """Mesh of the first wedge of order ``k`` (sector of opening ``pi/k``)."""
    if k < 1:
        raise ValueError(f"wedge order must be >= 1, got {k}")
    return make_sector(R, math.pi / k, h)


def make_annulus(r_in: float, R: float, h: float) -> TriangleMesh:
    """Structured annulus mesh: equal vertex count on each ring."""
    _check_positive("r_in", r_in)
    _check_positive("h", h)
    if not r_in < R:
        raise ValueError(f"r_in must be smaller than R={R}, got {r_in}")
    m = max(3, math.ceil(TWO_PI * R / h))
    n = max(1, math.ceil((R - r_in) / h))
    while True:
        r = np.linspace(r_in, R, n + 1)
        th = TWO_PI * np.arange(m) / m
        verts = np.stack(
            [np.outer(r, np.cos(th)).ravel(), np.outer(r, np.sin(th)).ravel()], axis=1
        )
        i, j = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
        a = i * m + j
        b = i * m + (j + 1) % m
        tris = np.concatenate(
            [np.stack([a, b, a + m], -1).reshape(-1, 3), np.stack([b, b + m, a + m], -1).reshape(-1, 3)]
        )
        if _max_edge(verts, tris) <= h:
            break
        m += 1
        n += 1
    bnd = np.zeros(len(verts), dtype=bool)
    bnd[:m] = True
    bnd[-m:] = True
    return TriangleMesh(verts, _orient(verts, tris), bnd, h, radius=R, angle=TWO_PI, rings=n)


def rotate_point(x, omega: float) -> np.ndarray:
    """Rotate ``x`` (a point or an array of points) about the origin."""
    x = np.asarray(x, dtype=np.float64)
    c, s = math.cos(omega), math.sin(omega)
    return np.stack([c * x[..., 0] - s * x[..., 1], s * x[..., 0] + c * x[..., 1]], axis=-1)


def barycentric(mesh: TriangleMesh, x) -> np.ndarray:
    """Barycentric coordinates of ``x`` in every triangle, shape (n_tri, 3)."""
    x = np.asarray(x, dtype=np.float64)
    p = mesh.vertices[mesh.triangles]
    d = p - x
    # twice the signed sub-areas opposite each vertex
    l0 = d[:, 1, 0] * d[:, 2, 1] - d[:, 1, 1] * d[:, 2, 0]
    l1 = d[:, 2, 0] * d[:, 0, 1] - d[:, 2, 1] * d[:, 0, 0]
    l2 = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
    return np.stack([l0, l1, l2], axis=1) / (2.0 * mesh.signed_areas)[:, None]


def locate_point(mesh: TriangleMesh, x, tol: float = 1e-10) -> Optional[Tuple[int, np.ndarray]]:
    """Containing triangle and clamped barycentric coordinates, or ``None``."""
    lam = barycentric(mesh, x)
    inside = np.flatnonzero(lam.min(axis=1) >= -tol)
    if inside.size == 0:
        return None
    k = int(inside[np.argmax(lam[inside].min(axis=1))])
    b = np.clip(lam[k], 0.0, None)
    return k, b / b.sum()


def interpolate(mesh: TriangleMesh, values: np.ndarray, x) -> float:
    """Evaluate the P1 interpolant of ``values`` at ``x`` (``nan`` outside)."""
    loc = locate_point(mesh, x)
    if loc is None:
        return float("nan")
    k, b = loc
    return float(b @ values[mesh.triangles[k]])


def write_mesh(path: Union[str, Path], mesh: TriangleMesh, values: Optional[np.ndarray] = None) -> None:
    """Plain-text mesh: ``V T`` header, vertex lines, triangle lines."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    for i, (x, y) in enumerate(mesh.vertices):
        row = f"{x:.17g} {y:.17g} {int(mesh.boundary[i])}"
        if values is not None:
            row += f" {values[i]:.17g}"
        lines.append(row)
    lines.extend(f"{a} {b} {c}" for a, b, c in mesh.triangles)
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path: Union[str, Path]) -> Tuple[TriangleMesh, Optional[np.ndarray]]:
    """Inverse of :func:`write_mesh`; returns ``(mesh, values or None)``."""
    rows = Path(path).read_text().split("\n")
    nv, nt = (int(t) for t in rows[0].split())
    vrows = [r.split() for r in rows[1 : 1 + nv]]
    verts = np.array([[float(r[0]), float(r[1])] for r in vrows])
    bnd = np.array([r[2] == "1" for r in vrows])
    values = np.array([float(r[3]) for r in vrows]) if vrows and len(vrows[0]) > 3 else None
    tris = np.array([[int(t) for t in r.split()] for r in rows[1 + nv : 1 + nv + nt]], dtype=np.int64)
    e = np.linalg.norm(verts[tris][:, [0, 1, 2]] - verts[tris][:, [1, 2, 0]], axis=2)
    return TriangleMesh(verts, tris.reshape(-1, 3), bnd, float(e.max())), values
