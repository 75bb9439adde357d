"""Marching Cubes iso-surface extraction from a regular scalar grid.

The 256-entry case table is generated from per-face rules instead of being
typed in: on every cube face, each run of below-iso corners is cut off by its
own segment (ambiguous faces always separate the below-iso corners). Two cubes
sharing a face therefore agree on its contour, which keeps the output closed.
Segments are chained into loops, and each loop is triangulated without
diagonals lying on a cube face.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry.mesh import TriMesh

# corner i sits at (i & 1, (i >> 1) & 1, (i >> 2) & 1)
CORNERS = np.array([[(i >> a) & 1 for a in range(3)] for i in range(8)])
EDGES = [(i, i | (1 << a)) for a in range(3) for i in range(8) if not i & (1 << a)]
EDGE_AXIS = np.array([(c0 ^ c1).bit_length() - 1 for c0, c1 in EDGES])
EDGE_ORIGIN = np.array([CORNERS[c0] for c0, _ in EDGES])
_EDGE_ID = {frozenset(e): k for k, e in enumerate(EDGES)}


def _faces():
    faces = []
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        for side in (0, 1):
            ring = []
            for ub, uc in ((0, 0), (1, 0), (1, 1), (0, 1)):
                bits = (side << a) | (ub << b) | (uc << c)
                ring.append(bits)
            # counter-clockwise seen from outside the cube
            faces.append(ring if side == 1 else ring[::-1])
    return faces


def _edge_faces():
    faces = _faces()
    return [frozenset(f for f, ring in enumerate(faces) if c0 in ring and c1 in ring)
            for c0, c1 in EDGES]


_EDGE_FACES = _edge_faces()


def _polygon_triangulations(idx):
    if len(idx) < 3:
        yield []
        return
    a, b = idx[0], idx[-1]
    for k in range(1, len(idx) - 1):
        for left in _polygon_triangulations(idx[: k + 1]):
            for right in _polygon_triangulations(idx[k:]):
                yield left + right + [(a, idx[k], b)]


def _triangulate(loop):
    """Triangulate a loop without diagonals that run along a cube face.

    A diagonal between two cut edges of the same face would be produced by
    the neighbouring cube as well, making that edge non-manifold.
    """
    n = len(loop)
    boundary = {frozenset((loop[i], loop[(i + 1) % n])) for i in range(n)}
    for tri_idx in _polygon_triangulations(list(range(n))):
        tris = [tuple(loop[i] for i in t) for t in tri_idx]
        ok = True
        for t in tris:
            for u, v in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                if frozenset((u, v)) not in boundary and _EDGE_FACES[u] & _EDGE_FACES[v]:
                    ok = False
        if ok:
            return tris
    raise RuntimeError(f"no face-safe triangulation for loop {loop}")


@lru_cache(maxsize=None)
def case_table():
    """(256, max_tris, 3) cube-edge triples padded with -1, and per-case counts."""
    faces = _faces()
    cases = []
    for cfg in range(256):
        neg = [(cfg >> i) & 1 for i in range(8)]
        link = {}
        for ring in faces:
            entering, leaving = [], []
            for k in range(4):
                c0, c1 = ring[k], ring[(k + 1) % 4]
                if neg[c0] != neg[c1]:
                    e = _EDGE_ID[frozenset((c0, c1))]
                    (leaving if neg[c0] else entering).append((k, e))
            # pair each entering edge with the first leaving edge after it
            for k_in, e_in in entering:
                k_out, e_out = min(leaving, key=lambda kl: (kl[0] - k_in) % 4)
                link[e_in] = e_out
        tris = []
        seen = set()
        for start in sorted(link):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            nxt = link[start]
            while nxt != start:
                loop.append(nxt)
                seen.add(nxt)
                nxt = link[nxt]
            tris.extend(_triangulate(loop))
        cases.append(tris)
    max_t = max(len(t) for t in cases)
    table = np.full((256, max_t, 3), -1, dtype=np.int64)
    counts = np.zeros(256, dtype=np.int64)
    for cfg, tris in enumerate(cases):
        counts[cfg] = len(tris)
        if tris:
            table[cfg, : len(tris)] = tris
    return table, counts


@dataclass
class ScalarGrid:
    """Samples ``values[i, j, k]`` at ``origin + pitch * (i, j, k)``."""

    origin: np.ndarray
    pitch: float
    values: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or min(self.values.shape) < 2:
            raise ValueError("grid needs at least 2 samples per axis")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")

    @property
    def dims(self):
        return self.values.shape

    def points(self) -> np.ndarray:
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in self.dims], indexing="ij"), axis=-1)
        return self.origin + self.pitch * idx

    @classmethod
    def from_function(cls, fn, lo, hi, pitch):
        lo = np.asarray(lo, dtype=np.float64)
        n = np.floor((np.asarray(hi) - lo) / pitch + 1e-9).astype(int) + 1
        grid = cls(lo, pitch, np.zeros(tuple(n)))
        pts = grid.points()
        grid.values = np.asarray(fn(pts.reshape(-1, 3)), dtype=np.float64).reshape(tuple(n))
        return grid


def marching_cubes(grid: ScalarGrid, iso: float = 0.0) -> TriMesh:
    """Triangulate the ``iso`` level set; normals face increasing values."""
    vals = np.array(grid.values, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("grid contains non-finite values")
    # exact hits would create zero-area triangles; nudge them deterministically
    vals[vals == iso] += 1e-9
    neg = vals < iso
    nx, ny, nz = vals.shape
    cfg = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for c, (dx, dy, dz) in enumerate(CORNERS):
        cfg |= neg[dx:nx - 1 + dx, dy:ny - 1 + dy, dz:nz - 1 + dz].astype(np.int64) << c
    table, counts = case_table()
    cells = np.flatnonzero(counts[cfg.ravel()] > 0)
    if len(cells) == 0:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64))
    ci, cj, ck = np.unravel_index(cells, cfg.shape)
    ccfg = cfg.ravel()[cells]
    ntri = counts[ccfg]
    cell_rep = np.repeat(np.arange(len(cells)), ntri)
    slot = np.arange(len(cell_rep)) - np.repeat(np.cumsum(ntri) - ntri, ntri)
    local_edges = table[ccfg[cell_rep], slot]  # (M, 3) cube-edge ids

    # global edge id: axis * n_points + linear index of the edge's lower corner
    n_pts = nx * ny * nz
    eo = EDGE_ORIGIN[local_edges]  # (M, 3, 3)
    gi = ci[cell_rep][:, None] + eo[..., 0]
    gj = cj[cell_rep][:, None] + eo[..., 1]
    gk = ck[cell_rep][:, None] + eo[..., 2]
    axis = EDGE_AXIS[local_edges]
    gid = axis * n_pts + (gi * ny + gj) * nz + gk
    uniq, inv = np.unique(gid.ravel(), return_inverse=True)

    ax = uniq // n_pts
    lin = uniq % n_pts
    i0, j0, k0 = np.unravel_index(lin, vals.shape)
    step = np.eye(3, dtype=np.int64)[ax]
    v0 = vals[i0, j0, k0]
    v1 = vals[i0 + step[:, 0], j0 + step[:, 1], k0 + step[:, 2]]
    t = (iso - v0) / (v1 - v0)
    base = np.stack([i0, j0, k0], axis=1).astype(np.float64)
    verts = grid.origin + grid.pitch * (base + t[:, None] * step)
    faces = inv.reshape(-1, 3)
    return TriMesh(verts, faces)
