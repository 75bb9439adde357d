"""Scene and dataset generation for the synthetic hand benchmark."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidPlacement
from ..geometry.camera import CameraIntrinsics
from ..geometry.mesh import TriMesh
from . import hand as H
from .render import rasterize, shade, sphere_depth

# one fixed reference camera for every scene
DEFAULT_CAMERA = CameraIntrinsics(fx=160.0, fy=160.0, cx=64.0, cy=64.0, width=128, height=128)
Z_NEAR = 350.0
Z_FAR = 850.0

_LIGHT = np.array([-0.3, -0.5, -1.0]) / np.linalg.norm([-0.3, -0.5, -1.0])
_SKIN = np.array([0.86, 0.64, 0.50])


@dataclass
class SceneRecord:
    image: np.ndarray  # (H, W, 3) uint8
    mask: np.ndarray  # (H, W) bool, visible hand pixels
    mesh: TriMesh
    joints: np.ndarray  # (21, 3) camera frame, mm
    cam: CameraIntrinsics
    hand_scale: float
    meta: dict = field(default_factory=dict)

    @property
    def image_float(self) -> np.ndarray:
        return self.image.astype(np.float32) / 255.0


@dataclass
class Randomization:
    """Ranges for random scenes. Depth refers to the joint centroid."""

    depth: tuple = (470.0, 730.0)
    scale: tuple = (0.8, 1.25)
    center_offset_px: float = 22.0
    flexion: tuple = H.FLEX_LIMITS
    abduction: tuple = (-0.25, 0.25)
    occlusion_prob: float = 0.0


def _scene_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def render_scene(mesh: TriMesh, cam: CameraIntrinsics, rng: np.random.Generator,
                 occluder=None):
    depth, face_id = rasterize(mesh.vertices, mesh.faces, cam)
    tint = 1.0 + 0.12 * (rng.random(3) - 0.5)
    hand_img, hand_mask = shade(mesh.face_normals, face_id, _SKIN * tint, _LIGHT)
    # smooth random background: base colour plus a linear gradient
    base = 0.15 + 0.5 * rng.random(3)
    grad = 0.25 * (rng.random((2, 3)) - 0.5)
    ys, xs = np.mgrid[0:cam.height, 0:cam.width]
    bg = (base + grad[0] * (xs[..., None] / cam.width - 0.5)
          + grad[1] * (ys[..., None] / cam.height - 0.5))
    img = np.where(hand_mask[..., None], hand_img, bg)
    mask = hand_mask.copy()
    if occluder is not None:
        center, radius, color = occluder
        od = sphere_depth(cam, center, radius)
        front = od < depth
        hit = np.isfinite(od) & front
        # flat-lit occluder using its analytic normal
        img[hit] = np.asarray(color) * 0.8
        mask &= ~hit
    img = img + rng.normal(scale=0.01, size=img.shape)
    img8 = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    return img8, mask, depth


def generate_scene(spec: H.HandProxySpec, cam: CameraIntrinsics = DEFAULT_CAMERA, seed: int = 0,
                   occluder=None, pitch: float = 2.0) -> SceneRecord:
    """Build mesh, joints and rendering for one articulated hand.

    :raises InvalidPlacement: if any part of the hand is at or behind the camera plane.
    """
    rng = _scene_rng(seed)
    local = H.hand_mesh_local(spec, pitch=pitch)
    verts = H.place(local.vertices, spec)
    if np.any(verts[:, 2] <= 1.0):
        raise InvalidPlacement("hand reaches behind the camera")
    mesh = TriMesh(verts, local.faces)
    joints = H.camera_joints(spec)
    img, mask, _ = render_scene(mesh, cam, rng, occluder)
    meta = {
        "seed": int(seed),
        "scale": float(spec.scale),
        "flexion": spec.flexion.tolist(),
        "abduction": spec.abduction.tolist(),
        "rotation": spec.rotation.tolist(),
        "translation": spec.translation.tolist(),
        "occluder": None if occluder is None else
        {"center": list(map(float, occluder[0])), "radius": float(occluder[1])},
    }
    return SceneRecord(img, mask, mesh, joints, cam, spec.hand_scale, meta)


def random_spec(rng: np.random.Generator, cam: CameraIntrinsics = DEFAULT_CAMERA,
                ranges: Randomization | None = None, scale: float | None = None) -> H.HandProxySpec:
    ranges = ranges or Randomization()
    flex = rng.uniform(*ranges.flexion, size=(5, 3))
    abd = rng.uniform(*ranges.abduction, size=5)
    rot = H.random_rotation(rng)
    s = rng.uniform(*ranges.scale) if scale is None else scale
    probe = H.HandProxySpec(flex, abd, rot, np.zeros(3), s)
    centroid = H.camera_joints(probe).mean(axis=0)
    z = rng.uniform(*ranges.depth)
    du, dv = rng.uniform(-ranges.center_offset_px, ranges.center_offset_px, size=2)
    target = cam.backproject(np.array([cam.cx + du, cam.cy + dv]), z)
    return H.HandProxySpec(flex, abd, rot, target - centroid, s)


def random_occluder(rng, spec: H.HandProxySpec):
    joints = H.camera_joints(spec)
    anchor = joints[rng.integers(len(joints))]
    radius = rng.uniform(18.0, 32.0)
    # toward the camera so the sphere covers part of the hand
    center = anchor * (1.0 - rng.uniform(0.08, 0.15))
    color = 0.2 + 0.6 * rng.random(3)
    return center, radius, color


def scene_seed(seed: int, index: int, split: str = "train") -> int:
    tag = {"train": 0, "eval": 1, "test": 2}[split]
    ss = np.random.SeedSequence([int(seed), tag, int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def iter_dataset(n: int, ranges: Randomization | None = None, seed: int = 0,
                 split: str = "train", cam: CameraIntrinsics = DEFAULT_CAMERA,
                 pitch: float = 2.0):
    """Yield the scenes of :func:`generate_dataset` one at a time."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ranges = ranges or Randomization()
    for i in range(n):
        s = scene_seed(seed, i, split)
        rng = _scene_rng(s + 1)
        spec = random_spec(rng, cam, ranges)
        occ = random_occluder(rng, spec) if rng.random() < ranges.occlusion_prob else None
        yield generate_scene(spec, cam, seed=s, occluder=occ, pitch=pitch)


def generate_dataset(n: int, ranges: Randomization | None = None, seed: int = 0,
                     split: str = "train", cam: CameraIntrinsics = DEFAULT_CAMERA,
                     pitch: float = 2.0) -> list:
    """``n`` independent random scenes; splits draw from disjoint seed streams."""
    return list(iter_dataset(n, ranges, seed, split, cam, pitch))
