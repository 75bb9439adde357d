"""Axis-aligned bounding-volume hierarchy over triangles (numba kernels).

The tree is stored as flat arrays so the query kernels can run in nopython
mode. All kernels are read-only with respect to the tree.
"""
import numpy as np
from numba import njit

LEAF_SIZE = 4

# closest-feature codes returned by the point query
FACE = 0
EDGE_AB, EDGE_BC, EDGE_CA = 1, 2, 3
VERT_A, VERT_B, VERT_C = 4, 5, 6


@njit(cache=True)
def _build(tri_lo, tri_hi, centroids, leaf_size):
    n = centroids.shape[0]
    order = np.arange(n)
    max_nodes = 2 * n + 1
    node_lo = np.empty((max_nodes, 3))
    node_hi = np.empty((max_nodes, 3))
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    start = np.zeros(max_nodes, np.int64)
    count = np.zeros(max_nodes, np.int64)

    stack_node = np.empty(max_nodes, np.int64)
    stack_s = np.empty(max_nodes, np.int64)
    stack_e = np.empty(max_nodes, np.int64)
    top = 0
    stack_node[0] = 0
    stack_s[0] = 0
    stack_e[0] = n
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        s = stack_s[top]
        e = stack_e[top]
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        clo = np.full(3, np.inf)
        chi = np.full(3, -np.inf)
        for i in range(s, e):
            t = order[i]
            for k in range(3):
                lo[k] = min(lo[k], tri_lo[t, k])
                hi[k] = max(hi[k], tri_hi[t, k])
                clo[k] = min(clo[k], centroids[t, k])
                chi[k] = max(chi[k], centroids[t, k])
        node_lo[node] = lo
        node_hi[node] = hi
        if e - s <= leaf_size:
            start[node] = s
            count[node] = e - s
            continue
        axis = 0
        ext = chi - clo
        if ext[1] > ext[axis]:
            axis = 1
        if ext[2] > ext[axis]:
            axis = 2
        sub = order[s:e].copy()
        keys = centroids[sub, axis]
        idx = np.argsort(keys, kind="mergesort")
        order[s:e] = sub[idx]
        mid = (s + e) // 2
        lch = n_nodes
        rch = n_nodes + 1
        n_nodes += 2
        left[node] = lch
        right[node] = rch
        stack_node[top] = rch
        stack_s[top] = mid
        stack_e[top] = e
        top += 1
        stack_node[top] = lch
        stack_s[top] = s
        stack_e[top] = mid
        top += 1
    return (node_lo[:n_nodes].copy(), node_hi[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), start[:n_nodes].copy(), count[:n_nodes].copy(), order)


def build_bvh(vertices, faces, leaf_size=LEAF_SIZE):
    tri = vertices[faces]
    return _build(tri.min(axis=1), tri.max(axis=1), tri.mean(axis=1), leaf_size)


@njit(cache=True, inline="always")
def _dot(x, y):
    return x[0] * y[0] + x[1] * y[1] + x[2] * y[2]


@njit(cache=True, inline="always")
def _cross(x, y):
    out = np.empty(3)
    out[0] = x[1] * y[2] - x[2] * y[1]
    out[1] = x[2] * y[0] - x[0] * y[2]
    out[2] = x[0] * y[1] - x[1] * y[0]
    return out


@njit(cache=True, inline="always")
def _box_dist2(p, lo, hi):
    d2 = 0.0
    for k in range(3):
        if p[k] < lo[k]:
            d = lo[k] - p[k]
            d2 += d * d
        elif p[k] > hi[k]:
            d = p[k] - hi[k]
            d2 += d * d
    return d2


@njit(cache=True)
def _closest_tri(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Scalar Ericson closest-point test: (qx, qy, qz, feature code)."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az, VERT_A
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz, VERT_B
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz, EDGE_AB
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz, VERT_C
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz, EDGE_CA
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz), EDGE_BC
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w, FACE)


def closest_point_triangle(p, a, b, c):
    """Closest point on triangle abc to p, plus the feature code it lies on."""
    qx, qy, qz, feat = _closest_tri(*p, *a, *b, *c)
    return np.array([qx, qy, qz]), feat


@njit(cache=True)
def closest_points(points, vertices, faces, node_lo, node_hi, left, right, start, count, order):
    n = points.shape[0]
    out_d2 = np.empty(n)
    out_face = np.empty(n, np.int64)
    out_feat = np.empty(n, np.int64)
    out_pt = np.empty((n, 3))
    stack = np.empty(128, np.int64)
    for i in range(n):
        p = points[i]
        px, py, pz = p[0], p[1], p[2]
        best = np.inf
        best_face = -1
        best_feat = 0
        bqx = bqy = bqz = 0.0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _box_dist2(p, node_lo[node], node_hi[node]) >= best:
                continue
            if left[node] < 0:
                for j in range(start[node], start[node] + count[node]):
                    f = order[j]
                    ia, ib, ic = faces[f, 0], faces[f, 1], faces[f, 2]
                    qx, qy, qz, feat = _closest_tri(
                        px, py, pz,
                        vertices[ia, 0], vertices[ia, 1], vertices[ia, 2],
                        vertices[ib, 0], vertices[ib, 1], vertices[ib, 2],
                        vertices[ic, 0], vertices[ic, 1], vertices[ic, 2])
                    d2 = (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
                    if d2 < best or (d2 == best and f < best_face):
                        best = d2
                        best_face = f
                        best_feat = feat
                        bqx, bqy, bqz = qx, qy, qz
                continue
            l = left[node]
            r = right[node]
            dl = _box_dist2(p, node_lo[l], node_hi[l])
            dr = _box_dist2(p, node_lo[r], node_hi[r])
            # push the farther child first so the nearer one is popped next
            if dl <= dr:
                if dr < best:
                    stack[top] = r
                    top += 1
                if dl < best:
                    stack[top] = l
                    top += 1
            else:
                if dl < best:
                    stack[top] = l
                    top += 1
                if dr < best:
                    stack[top] = r
                    top += 1
        out_d2[i] = best
        out_face[i] = best_face
        out_feat[i] = best_feat
        out_pt[i, 0] = bqx
        out_pt[i, 1] = bqy
        out_pt[i, 2] = bqz
    return out_d2, out_face, out_feat, out_pt


@njit(cache=True, inline="always")
def _ray_box(o, inv_d, lo, hi, tmax):
    t0 = 0.0
    t1 = tmax
    for k in range(3):
        ta = (lo[k] - o[k]) * inv_d[k]
        tb = (hi[k] - o[k]) * inv_d[k]
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return False
    return True


@njit(cache=True)
def ray_triangle(o, d, a, b, c):
    """Moller-Trumbore; returns hit distance t (> 0) or inf."""
    e1 = b - a
    e2 = c - a
    pv = _cross(d, e2)
    det = _dot(e1, pv)
    if abs(det) < 1e-14:
        return np.inf
    inv = 1.0 / det
    tv = o - a
    u = _dot(tv, pv) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qv = _cross(tv, e1)
    v = _dot(d, qv) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    t = _dot(e2, qv) * inv
    if t <= 0.0:
        return np.inf
    return t


@njit(cache=True)
def first_hits(origins, dirs, vertices, faces, node_lo, node_hi, left, right, start, count, order):
    n = origins.shape[0]
    out_t = np.full(n, np.inf)
    out_face = np.full(n, -1, np.int64)
    stack = np.empty(128, np.int64)
    for i in range(n):
        o = origins[i]
        d = dirs[i]
        inv_d = np.empty(3)
        for k in range(3):
            inv_d[k] = 1.0 / d[k] if d[k] != 0.0 else 1e300
        best = np.inf
        best_face = -1
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if not _ray_box(o, inv_d, node_lo[node], node_hi[node], best):
                continue
            if left[node] < 0:
                for j in range(start[node], start[node] + count[node]):
                    f = order[j]
                    t = ray_triangle(o, d, vertices[faces[f, 0]], vertices[faces[f, 1]],
                                     vertices[faces[f, 2]])
                    if t < best:
                        best = t
                        best_face = f
                continue
            stack[top] = left[node]
            stack[top + 1] = right[node]
            top += 2
        out_t[i] = best
        out_face[i] = best_face
    return out_t, out_face
