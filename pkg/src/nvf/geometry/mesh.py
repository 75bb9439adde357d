"""Indexed triangle meshes with exact signed-distance and ray queries."""
from __future__ import annotations

import threading
from functools import cached_property

import numpy as np

from ..errors import IllFormedMesh
from . import bvh


class TriMesh:
    """Triangle surface in millimetres.

    Pseudonormals (face, angle-weighted vertex, edge) are precomputed on
    construction; the BVH is built lazily on the first distance or ray query.
    Queries never mutate the mesh, so one instance can be shared by threads.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise IllFormedMesh("face index out of range")
        self._lock = threading.Lock()
        self._tree = None
        self._compute_normals()

    def __len__(self):
        return len(self.faces)

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def _compute_normals(self):
        v, f = self.vertices, self.faces
        if not len(f):
            self.face_normals = np.zeros((0, 3))
            self.face_areas = np.zeros(0)
            self.vertex_normals = np.zeros_like(v)
            self.face_edges = np.zeros((0, 3), np.int64)
            self.edge_normals = np.zeros((0, 3))
            self.edges = np.zeros((0, 2), np.int64)
            return
        a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n, axis=1)
        self.face_areas = 0.5 * norm
        self.face_normals = n / np.where(norm > 0, norm, 1.0)[:, None]

        # angle-weighted vertex pseudonormals
        vn = np.zeros_like(v)
        corners = ((a, b, c), (b, c, a), (c, a, b))
        for k, (p, q, r) in enumerate(corners):
            e1 = q - p
            e2 = r - p
            cosang = np.einsum("ij,ij->i", e1, e2) / np.maximum(
                np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1), 1e-300)
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
            np.add.at(vn, f[:, k], self.face_normals * ang[:, None])
        self.vertex_normals = vn

        # undirected edges and their pseudonormals (sum of adjacent face normals)
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        undirected = np.sort(directed, axis=1)
        # scalar keys make np.unique much faster than row-wise uniqueness
        nv = np.int64(max(len(v), 1))
        keys, inverse = np.unique(undirected[:, 0] * nv + undirected[:, 1], return_inverse=True)
        inverse = inverse.reshape(-1)
        self.edges = np.stack([keys // nv, keys % nv], axis=1)
        self.face_edges = inverse.reshape(3, -1).T.copy()
        en = np.zeros((len(keys), 3))
        np.add.at(en, inverse, np.tile(self.face_normals, (3, 1)))
        self.edge_normals = en
        self._edge_use = np.bincount(inverse, minlength=len(keys))
        # each directed edge must appear once for a consistently wound closed surface
        _, dir_counts = np.unique(directed[:, 0] * nv + directed[:, 1], return_counts=True)
        self._directed_ok = bool(np.all(dir_counts == 1))

    @property
    def is_watertight(self) -> bool:
        """Every edge shared by exactly two faces with opposite orientation."""
        if self.is_empty:
            return False
        return bool(np.all(self._edge_use == 2)) and self._directed_ok

    def euler_characteristic(self) -> int:
        used = np.unique(self.faces)
        return int(len(used) - len(self.edges) + len(self.faces))

    def volume(self) -> float:
        """Enclosed volume by the divergence theorem (positive for outward winding)."""
        v, f = self.vertices, self.faces
        if not len(f):
            return 0.0
        a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    @property
    def area(self) -> float:
        return float(self.face_areas.sum())

    def bounding_sphere(self, pad: float = 1.1):
        center = self.vertices.mean(axis=0)
        radius = float(np.linalg.norm(self.vertices - center, axis=1).max()) * pad
        return center, radius

    def translated(self, t) -> "TriMesh":
        return TriMesh(self.vertices + np.asarray(t, dtype=np.float64), self.faces)

    def transformed(self, R, t=(0.0, 0.0, 0.0)) -> "TriMesh":
        return TriMesh(self.vertices @ np.asarray(R).T + np.asarray(t, dtype=np.float64), self.faces)

    # -- queries ---------------------------------------------------------

    @property
    def tree(self):
        if self._tree is None:
            with self._lock:
                if self._tree is None:
                    self._tree = bvh.build_bvh(self.vertices, self.faces)
        return self._tree

    def closest_points(self, points):
        """Return (distance, face index, feature code, closest point) per query."""
        if self.is_empty:
            raise IllFormedMesh("empty mesh")
        p = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        d2, face, feat, cp = bvh.closest_points(p, self.vertices, self.faces, *self.tree)
        return np.sqrt(d2), face, feat, cp

    def signed_distance(self, points) -> np.ndarray:
        """Exact signed distance (negative inside) using pseudonormal signs.

        :raises IllFormedMesh: if the mesh is not closed and consistently wound.
        """
        if not self.is_watertight:
            raise IllFormedMesh("signed distance needs a watertight, consistently wound mesh")
        pts = np.asarray(points, dtype=np.float64)
        shape = pts.shape[:-1]
        p = np.ascontiguousarray(pts.reshape(-1, 3))
        dist, face, feat, cp = self.closest_points(p)
        normal = self._feature_normals(face, feat)
        side = np.einsum("ij,ij->i", p - cp, normal)
        sign = np.where(side < 0, -1.0, 1.0)
        return (sign * dist).reshape(shape)

    def _feature_normals(self, face, feat):
        n = np.empty((len(face), 3))
        is_face = feat == bvh.FACE
        n[is_face] = self.face_normals[face[is_face]]
        is_edge = (feat >= bvh.EDGE_AB) & (feat <= bvh.EDGE_CA)
        eidx = self.face_edges[face[is_edge], feat[is_edge] - bvh.EDGE_AB]
        n[is_edge] = self.edge_normals[eidx]
        is_vert = feat >= bvh.VERT_A
        vidx = self.faces[face[is_vert], feat[is_vert] - bvh.VERT_A]
        n[is_vert] = self.vertex_normals[vidx]
        return n

    def contains(self, points) -> np.ndarray:
        return self.signed_distance(points) < 0

    def ray_cast(self, origins, directions):
        """First intersection distance along each ray (inf on miss) and the face hit."""
        o = np.ascontiguousarray(np.broadcast_to(origins, np.shape(directions)), dtype=np.float64)
        d = np.ascontiguousarray(directions, dtype=np.float64)
        if self.is_empty:
            return np.full(len(d), np.inf), np.full(len(d), -1)
        return bvh.first_hits(o.reshape(-1, 3), d.reshape(-1, 3), self.vertices, self.faces,
                              *self.tree)

    def sample_surface(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Area-weighted uniform samples on the surface."""
        prob = self.face_areas / self.face_areas.sum()
        idx = rng.choice(len(self.faces), size=n, p=prob)
        r1 = np.sqrt(rng.random(n))
        r2 = rng.random(n)
        a = self.vertices[self.faces[idx, 0]]
        b = self.vertices[self.faces[idx, 1]]
        c = self.vertices[self.faces[idx, 2]]
        return (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c
