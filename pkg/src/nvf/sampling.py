"""Query-point generation for training (stratified) and inference (voxel centres)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGrid, InsufficientSamples
from .geometry.camera import CameraIntrinsics, frustum_bounds, frustum_contains, sample_frustum_uniform
from .geometry.mesh import TriMesh


@dataclass(frozen=True)
class TrainSampleSpec:
    n_near_surface: int = 12500
    surface_noise_sigma: float = 10.0
    n_bounding_sphere: int = 1000
    n_frustum: int = 1000
    n_inside: int = 2500
    n_outside: int = 2500
    max_retries: int = 8

    def __post_init__(self):
        counts = (self.n_near_surface, self.n_bounding_sphere, self.n_frustum,
                  self.n_inside, self.n_outside)
        if min(counts) <= 0:
            raise ValueError("all sample counts must be positive")

    @property
    def batch_size(self) -> int:
        return self.n_inside + self.n_outside


@dataclass(frozen=True)
class GridSampleSpec:
    """Voxel-centre sampling over a camera frustum or a cube.

    ``mode`` is ``"camera_frustum"`` (uses ``cam``, ``z_near``, ``z_far``) or
    ``"root_cube"`` (uses ``center`` and ``half_extent``).
    """

    step: float = 16.0
    mode: str = "camera_frustum"
    cam: CameraIntrinsics | None = None
    z_near: float = 350.0
    z_far: float = 850.0
    center: tuple = (0.0, 0.0, 0.0)
    half_extent: float = 160.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.mode not in ("camera_frustum", "root_cube"):
            raise ValueError(f"unknown grid mode {self.mode!r}")


def sample_in_ball(rng, n, center, radius):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    rad = radius * np.cbrt(rng.random(n))
    return np.asarray(center) + v * rad[:, None]


def sample_pool(mesh: TriMesh, cam: CameraIntrinsics, spec: TrainSampleSpec, rng,
                z_near: float = 350.0, z_far: float = 850.0, region=None):
    """Candidate pool: jittered surface points, bounding-sphere and region points.

    ``region`` optionally replaces the frustum with a cube ``(center, half_extent)``.
    """
    surf = mesh.sample_surface(rng, spec.n_near_surface)
    surf = surf + rng.normal(scale=spec.surface_noise_sigma, size=surf.shape)
    center, radius = mesh.bounding_sphere()
    ball = sample_in_ball(rng, spec.n_bounding_sphere, center, radius)
    if region is None:
        wide = sample_frustum_uniform(rng, spec.n_frustum, cam, z_near, z_far)
    else:
        c, h = region
        wide = np.asarray(c) + rng.uniform(-h, h, size=(spec.n_frustum, 3))
    return np.concatenate([surf, ball, wide])


def sample_training_points(mesh: TriMesh, cam: CameraIntrinsics, spec: TrainSampleSpec = TrainSampleSpec(),
                           seed=0, z_near: float = 350.0, z_far: float = 850.0, region=None,
                           return_sdf: bool = False):
    """Balanced batch of ``n_inside`` interior and ``n_outside`` exterior points.

    Deterministic for a given ``seed`` (an int or a ``numpy`` Generator).
    Points are ordered inside-first, each group in pool order.

    :raises InsufficientSamples: if repeated pools never yield enough of either side.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts_in, pts_out, sdf_in, sdf_out = [], [], [], []
    n_in = n_out = 0
    for _ in range(spec.max_retries):
        pool = sample_pool(mesh, cam, spec, rng, z_near, z_far, region)
        s = mesh.signed_distance(pool)
        inside = s < 0
        pts_in.append(pool[inside])
        sdf_in.append(s[inside])
        pts_out.append(pool[~inside])
        sdf_out.append(s[~inside])
        n_in += int(inside.sum())
        n_out += int((~inside).sum())
        if n_in >= spec.n_inside and n_out >= spec.n_outside:
            break
    else:
        raise InsufficientSamples(
            f"pool gave {n_in} inside / {n_out} outside after {spec.max_retries} tries")
    pin, sin_ = np.concatenate(pts_in), np.concatenate(sdf_in)
    pout, sout = np.concatenate(pts_out), np.concatenate(sdf_out)
    ii = np.sort(rng.choice(len(pin), spec.n_inside, replace=False))
    oo = np.sort(rng.choice(len(pout), spec.n_outside, replace=False))
    pts = np.concatenate([pin[ii], pout[oo]])
    if return_sdf:
        return pts, np.concatenate([sin_[ii], sout[oo]])
    return pts


def grid_axes(lo, hi, step):
    """Voxel-centre coordinates per axis, anchored at ``lo``."""
    axes = []
    for a, b in zip(lo, hi):
        n = int(np.floor((b - a) / step + 1e-9))
        axes.append(a + (np.arange(n) + 0.5) * step)
    return axes


def sample_inference_grid(spec: GridSampleSpec) -> np.ndarray:
    """Voxel centres of pitch ``step`` that fall inside the configured region.

    :raises EmptyGrid: when no centre survives.
    """
    if spec.mode == "camera_frustum":
        if spec.cam is None:
            raise ValueError("camera_frustum mode needs a camera")
        lo, hi = frustum_bounds(spec.cam, spec.z_near, spec.z_far)
    else:
        c = np.asarray(spec.center, dtype=np.float64)
        lo, hi = c - spec.half_extent, c + spec.half_extent
    ax = grid_axes(lo, hi, spec.step)
    if any(len(a) == 0 for a in ax):
        raise EmptyGrid("bounds are smaller than one voxel")
    pts = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, 3)
    if spec.mode == "camera_frustum":
        pts = pts[frustum_contains(pts, spec.cam, spec.z_near, spec.z_far)]
    else:
        inside = np.all((pts >= lo) & (pts < hi), axis=1)
        pts = pts[inside]
    if len(pts) == 0:
        raise EmptyGrid("no voxel centre inside the region")
    return pts
