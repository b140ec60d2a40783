"""Convex-hull geometry: meshes, rigid transforms, and intersection tests.

Intersection uses the separating-plane criterion for convex polytopes: two
posed hulls are disjoint iff some axis (a face normal of either hull or a
cross product of one edge direction from each) separates their projections.
Touching hulls count as intersecting within ``CONTACT_TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateHull

CONTACT_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation; maps points from the source to target frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with determinant +1")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), np.asarray(t, dtype=float))

    @classmethod
    def from_rotation_z(cls, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        c, s = np.cos(angle), np.sin(angle)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(r, np.asarray(translation, dtype=float))

    @classmethod
    def from_rotation_y(cls, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        c, s = np.cos(angle), np.sin(angle)
        r = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return cls(r, np.asarray(translation, dtype=float))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def to_json(self) -> dict:
        return {
            "rotation": [[float(v) for v in row] for row in self.rotation],
            "translation": [float(v) for v in self.translation],
        }

    @classmethod
    def from_json(cls, data: dict) -> "RigidTransform":
        return cls(np.array(data["rotation"], dtype=float), np.array(data["translation"], dtype=float))


def _edge_directions(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    pairs = set()
    for tri in faces:
        a, b, c = int(tri[0]), int(tri[1]), int(tri[2])
        for i, j in ((a, b), (b, c), (c, a)):
            pairs.add((min(i, j), max(i, j)))
    dirs = np.array([vertices[j] - vertices[i] for i, j in sorted(pairs)], dtype=float)
    norms = np.linalg.norm(dirs, axis=1)
    keep = norms > 1e-12
    return dirs[keep] / norms[keep, None]


@dataclass
class ConvexHullMesh:
    """Convex polytope as vertices plus triangulated faces. Units: meters."""

    vertices: np.ndarray
    faces: np.ndarray
    _normals: np.ndarray = field(default=None, repr=False, compare=False)
    _edges: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        self.validate()

    def validate(self):
        if len(self.vertices) < 4:
            raise DegenerateHull(f"need at least 4 vertices, got {len(self.vertices)}")
        span = self.vertices - self.vertices[0]
        if np.linalg.matrix_rank(span, tol=1e-9) < 3:
            raise DegenerateHull("vertices are coplanar")
        # every vertex must lie on or inside every face plane
        normals, offsets = self._face_planes()
        signed = self.vertices @ normals.T - offsets
        if signed.max() > 1e-9:
            raise DegenerateHull(f"non-convex mesh: vertex {signed.max():.2e} m outside a face plane")

    def _face_planes(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward unit face normals and plane offsets (n·x = d)."""
        centroid = self.vertices.mean(axis=0)
        tris = self.vertices[self.faces]
        n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
        norms = np.linalg.norm(n, axis=1)
        ok = norms > 1e-12
        n = n[ok] / norms[ok, None]
        anchor = tris[ok, 0]
        # flip inward-pointing normals
        inward = np.einsum("ij,ij->i", n, centroid - anchor) > 0
        n[inward] *= -1.0
        d = np.einsum("ij,ij->i", n, anchor)
        return n, d

    @property
    def face_normals(self) -> np.ndarray:
        if self._normals is None:
            self._normals, _ = self._face_planes()
        return self._normals

    @property
    def edge_dirs(self) -> np.ndarray:
        if self._edges is None:
            self._edges = _edge_directions(self.vertices, self.faces)
        return self._edges

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def extent(self) -> np.ndarray:
        lo, hi = self.aabb()
        return hi - lo

    def transformed(self, pose: RigidTransform) -> "ConvexHullMesh":
        return ConvexHullMesh(pose.apply(self.vertices), self.faces.copy())

    def translated(self, offset) -> "ConvexHullMesh":
        return ConvexHullMesh(self.vertices + np.asarray(offset, dtype=float), self.faces.copy())

    def scaled(self, factor: float) -> "ConvexHullMesh":
        return ConvexHullMesh(self.vertices * float(factor), self.faces.copy())

    def contains_points(self, points: np.ndarray, tol: float = CONTACT_TOL) -> np.ndarray:
        normals, offsets = self._face_planes()
        signed = np.asarray(points, dtype=float) @ normals.T - offsets
        return (signed <= tol).all(axis=1)

    def to_json(self) -> dict:
        return {
            "vertices": [[float(v) for v in row] for row in self.vertices],
            "faces": [[int(v) for v in row] for row in self.faces],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConvexHullMesh":
        return cls(np.array(data["vertices"], dtype=float), np.array(data["faces"], dtype=int))

    @classmethod
    def from_points(cls, points: np.ndarray) -> "ConvexHullMesh":
        """Convex hull of a point cloud; drops interior points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(pts) < 4:
            raise DegenerateHull(f"need at least 4 points, got {len(pts)}")
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise DegenerateHull(f"hull construction failed: {exc}") from exc
        index_map = {old: new for new, old in enumerate(hull.vertices)}
        vertices = pts[hull.vertices]
        faces = np.array([[index_map[i] for i in simplex] for simplex in hull.simplices], dtype=int)
        return cls(vertices, faces)


def box_mesh(extents, center=(0.0, 0.0, 0.0)) -> ConvexHullMesh:
    """Axis-aligned box with the given (x, y, z) side lengths."""
    ex, ey, ez = (float(v) / 2.0 for v in extents)
    cx, cy, cz = (float(v) for v in center)
    corners = np.array(
        [
            [cx + sx * ex, cy + sy * ey, cz + sz * ez]
            for sx in (-1, 1)
            for sy in (-1, 1)
            for sz in (-1, 1)
        ]
    )
    return ConvexHullMesh.from_points(corners)


def octahedron_mesh(radius: float, center=(0.0, 0.0, 0.0)) -> ConvexHullMesh:
    """Regular octahedron; its width along each coordinate axis is 2*radius."""
    r = float(radius)
    c = np.asarray(center, dtype=float)
    pts = np.array(
        [[r, 0, 0], [-r, 0, 0], [0, r, 0], [0, -r, 0], [0, 0, r], [0, 0, -r]], dtype=float
    )
    return ConvexHullMesh.from_points(pts + c)


def _candidate_axes(a: ConvexHullMesh, b: ConvexHullMesh) -> np.ndarray:
    cross = np.cross(a.edge_dirs[:, None, :], b.edge_dirs[None, :, :]).reshape(-1, 3)
    norms = np.linalg.norm(cross, axis=1)
    cross = cross[norms > 1e-9] / norms[norms > 1e-9, None]
    return np.vstack([a.face_normals, b.face_normals, cross])


def separation_gap(a: ConvexHullMesh, b: ConvexHullMesh) -> float:
    """Largest projection gap over all candidate separating axes.

    Positive means disjoint (by at least that much along some axis); zero or
    negative means no separating axis exists, i.e. the hulls share a point.
    """
    axes = _candidate_axes(a, b)
    pa = axes @ a.vertices.T
    pb = axes @ b.vertices.T
    gaps = np.maximum(pb.min(axis=1) - pa.max(axis=1), pa.min(axis=1) - pb.max(axis=1))
    return float(gaps.max())


def convex_hulls_intersect(
    a: ConvexHullMesh,
    b: ConvexHullMesh,
    pose_a: RigidTransform | None = None,
    pose_b: RigidTransform | None = None,
    tol: float = CONTACT_TOL,
) -> bool:
    """True iff the posed hulls share at least one point (within ``tol``)."""
    wa = a if pose_a is None else a.transformed(pose_a)
    wb = b if pose_b is None else b.transformed(pose_b)
    # cheap reject on axis-aligned bounds before the full axis sweep
    lo_a, hi_a = wa.aabb()
    lo_b, hi_b = wb.aabb()
    if (lo_b - hi_a > tol).any() or (lo_a - hi_b > tol).any():
        return False
    return separation_gap(wa, wb) <= tol
