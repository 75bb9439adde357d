"""Flat-shaded z-buffer rasterizer evaluated at pixel centres."""
import numpy as np
from numba import njit

from ..geometry.camera import CameraIntrinsics


@njit(cache=True)
def _rasterize(verts, faces, fx, fy, cx, cy, width, height, depth, face_id):
    for f in range(faces.shape[0]):
        a = verts[faces[f, 0]]
        b = verts[faces[f, 1]]
        c = verts[faces[f, 2]]
        ua = fx * a[0] / a[2] + cx
        va = fy * a[1] / a[2] + cy
        ub = fx * b[0] / b[2] + cx
        vb = fy * b[1] / b[2] + cy
        uc = fx * c[0] / c[2] + cx
        vc = fy * c[1] / c[2] + cy
        area = (ub - ua) * (vc - va) - (uc - ua) * (vb - va)
        if area == 0.0:
            continue
        x0 = max(int(np.floor(min(ua, ub, uc) - 0.5)), 0)
        x1 = min(int(np.ceil(max(ua, ub, uc) - 0.5)), width - 1)
        y0 = max(int(np.floor(min(va, vb, vc) - 0.5)), 0)
        y1 = min(int(np.ceil(max(va, vb, vc) - 0.5)), height - 1)
        # plane of the triangle for exact ray depth
        e1 = b - a
        e2 = c - a
        nx = e1[1] * e2[2] - e1[2] * e2[1]
        ny = e1[2] * e2[0] - e1[0] * e2[2]
        nz = e1[0] * e2[1] - e1[1] * e2[0]
        nd = nx * a[0] + ny * a[1] + nz * a[2]
        for py in range(y0, y1 + 1):
            v = py + 0.5
            for px in range(x0, x1 + 1):
                u = px + 0.5
                w0 = (ub - u) * (vc - v) - (uc - u) * (vb - v)
                w1 = (uc - u) * (va - v) - (ua - u) * (vc - v)
                w2 = (ua - u) * (vb - v) - (ub - u) * (va - v)
                if area > 0:
                    inside = w0 >= 0 and w1 >= 0 and w2 >= 0
                else:
                    inside = w0 <= 0 and w1 <= 0 and w2 <= 0
                if not inside:
                    continue
                rx = (u - cx) / fx
                ry = (v - cy) / fy
                den = nx * rx + ny * ry + nz
                if den == 0.0:
                    continue
                z = nd / den
                if z > 0 and z < depth[py, px]:
                    depth[py, px] = z
                    face_id[py, px] = f


def rasterize(verts, faces, cam: CameraIntrinsics):
    """Per-pixel nearest depth (inf where empty) and face index (-1 where empty)."""
    depth = np.full((cam.height, cam.width), np.inf)
    face_id = np.full((cam.height, cam.width), -1, dtype=np.int64)
    if len(faces):
        _rasterize(np.ascontiguousarray(verts, dtype=np.float64),
                   np.ascontiguousarray(faces, dtype=np.int64),
                   float(cam.fx), float(cam.fy), float(cam.cx), float(cam.cy),
                   int(cam.width), int(cam.height), depth, face_id)
    return depth, face_id


def pixel_center_rays(cam: CameraIntrinsics, stride: int = 1):
    """Ray directions (z = 1) through the centres of ``stride``-sized cells, row-major."""
    us = (np.arange(cam.width // stride) + 0.5) * stride
    vs = (np.arange(cam.height // stride) + 0.5) * stride
    uu, vv = np.meshgrid(us, vs)
    uv = np.stack([uu, vv], axis=-1).reshape(-1, 2)
    return uv, cam.pixel_rays(uv)


def sphere_depth(cam: CameraIntrinsics, center, radius):
    """Depth map of an analytic sphere (inf where missed)."""
    _, dirs = pixel_center_rays(cam)
    c = np.asarray(center, dtype=np.float64)
    a = np.einsum("ij,ij->i", dirs, dirs)
    b = -2 * dirs @ c
    cc = c @ c - radius ** 2
    disc = b * b - 4 * a * cc
    t = np.where(disc >= 0, (-b - np.sqrt(np.maximum(disc, 0))) / (2 * a), np.inf)
    t = np.where(t > 0, t, np.inf)
    return t.reshape(cam.height, cam.width)


def shade(face_normals, face_id, base_color, light_dir, ambient=0.35):
    """Lambertian flat shading; returns (H, W, 3) float image and coverage mask."""
    mask = face_id >= 0
    img = np.zeros(face_id.shape + (3,))
    if mask.any():
        n = face_normals[face_id[mask]]
        lam = np.clip(n @ light_dir, 0.0, 1.0)
        img[mask] = np.asarray(base_color) * (ambient + (1 - ambient) * lam)[:, None]
    return img, mask
