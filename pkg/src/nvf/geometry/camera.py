"""Pinhole camera intrinsics, projection and frustum tests."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DegenerateProjection


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]))

    def pixel_rays(self, uv: np.ndarray) -> np.ndarray:
        """Unnormalised ray directions (z = 1) through continuous pixel coordinates."""
        uv = np.asarray(uv, dtype=np.float64)
        x = (uv[..., 0] - self.cx) / self.fx
        y = (uv[..., 1] - self.cy) / self.fy
        return np.stack([x, y, np.ones_like(x)], axis=-1)

    def backproject(self, uv: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.pixel_rays(uv) * np.asarray(z, dtype=np.float64)[..., None]


def project(points, cam: CameraIntrinsics):
    """Project camera-frame points (mm) to continuous pixel coordinates.

    Returns ``(uv, in_image)``; ``in_image`` flags projections inside
    ``[0, width) x [0, height)``. Out-of-image points are not an error.

    :raises DegenerateProjection: if any point has z <= 0.
    """
    p = np.asarray(points, dtype=np.float64)
    z = p[..., 2]
    if np.any(z <= 0):
        raise DegenerateProjection("cannot project a point with non-positive depth")
    u = cam.fx * p[..., 0] / z + cam.cx
    v = cam.fy * p[..., 1] / z + cam.cy
    uv = np.stack([u, v], axis=-1)
    inside = (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
    return uv, inside


def frustum_contains(points, cam: CameraIntrinsics, z_near: float, z_far: float) -> np.ndarray:
    """True where z lies in [z_near, z_far] and the projection falls inside the image."""
    if not 0 < z_near < z_far:
        raise ValueError("need 0 < z_near < z_far")
    p = np.asarray(points, dtype=np.float64)
    z = p[..., 2]
    ok = (z >= z_near) & (z <= z_far)
    out = np.zeros(z.shape, dtype=bool)
    if np.any(ok):
        _, inside = project(p[ok], cam)
        out[ok] = inside
    return out


def frustum_bounds(cam: CameraIntrinsics, z_near: float, z_far: float):
    """Axis-aligned bounding box (lo, hi) of the viewing frustum."""
    xs, ys = [], []
    for z in (z_near, z_far):
        for u in (0.0, float(cam.width)):
            xs.append((u - cam.cx) / cam.fx * z)
        for v in (0.0, float(cam.height)):
            ys.append((v - cam.cy) / cam.fy * z)
    lo = np.array([min(xs), min(ys), z_near])
    hi = np.array([max(xs), max(ys), z_far])
    return lo, hi


def sample_frustum_uniform(rng: np.random.Generator, n: int, cam: CameraIntrinsics,
                           z_near: float, z_far: float) -> np.ndarray:
    """Draw ``n`` points uniformly by volume inside the frustum."""
    # cross-section area grows as z^2, so invert the cubic CDF for depth
    a, b = z_near ** 3, z_far ** 3
    z = np.cbrt(a + rng.random(n) * (b - a))
    uv = np.stack([rng.random(n) * cam.width, rng.random(n) * cam.height], axis=-1)
    return cam.backproject(uv, z)
