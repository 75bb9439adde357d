"""Procedural articulated hand proxy built from capsules.

Joint order (T = 21): wrist, then thumb, index, middle, ring and pinky, each
listed base-to-tip with four joints. Geometry is defined in a hand-local frame
with the palm in the x-y plane, fingers along +y and the back of the hand
facing +z; flexion curls fingers toward -z.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry.mesh import TriMesh
from ..surface import ScalarGrid, marching_cubes

N_JOINTS = 21
ROOT = 0
FINGERS = ("thumb", "index", "middle", "ring", "pinky")
JOINT_NAMES = ["wrist"] + [f"{f}_{k}" for f in FINGERS for k in ("base", "mid", "distal", "tip")]
# reference bone used as the hand-scale scalar: middle finger, base -> mid joint
SCALE_BONE = (9, 10)

# unscaled rest geometry (mm)
_BASES = {
    "thumb": (22.0, 18.0),
    "index": (24.0, 86.0),
    "middle": (3.0, 90.0),
    "ring": (-16.0, 85.0),
    "pinky": (-33.0, 75.0),
}
_SPLAY = {"thumb": -0.75, "index": -0.12, "middle": 0.0, "ring": 0.1, "pinky": 0.22}
_LENGTHS = {
    "thumb": (38.0, 32.0, 26.0),
    "index": (38.0, 24.0, 20.0),
    "middle": (40.0, 28.0, 22.0),
    "ring": (37.0, 27.0, 21.0),
    "pinky": (30.0, 20.0, 18.0),
}
_RADII = {
    "thumb": (12.0, 10.0, 8.5),
    "index": (9.0, 8.0, 7.0),
    "middle": (9.5, 8.5, 7.5),
    "ring": (9.0, 8.0, 7.0),
    "pinky": (8.0, 7.0, 6.0),
}
PALM_RADIUS = 13.0
KNUCKLE_RADIUS = 11.0
FLEX_LIMITS = (0.0, np.pi / 2)
ABDUCTION_LIMITS = (-np.pi / 6, np.pi / 6)


@dataclass
class HandProxySpec:
    """Articulation and placement of one hand.

    ``flexion`` is (5, 3) radians per finger and joint, ``abduction`` (5,)
    radians at each finger base. ``rotation`` maps hand-local to camera
    coordinates and ``translation`` is added afterwards (mm).
    """

    flexion: np.ndarray = field(default_factory=lambda: np.zeros((5, 3)))
    abduction: np.ndarray = field(default_factory=lambda: np.zeros(5))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 600.0]))
    scale: float = 1.0

    def __post_init__(self):
        self.flexion = np.asarray(self.flexion, dtype=np.float64).reshape(5, 3)
        self.abduction = np.asarray(self.abduction, dtype=np.float64).reshape(5)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        lo, hi = FLEX_LIMITS
        if np.any(self.flexion < lo - 1e-12) or np.any(self.flexion > hi + 1e-12):
            raise ValueError("flexion outside [0, pi/2]")
        lo, hi = ABDUCTION_LIMITS
        if np.any(self.abduction < lo - 1e-12) or np.any(self.abduction > hi + 1e-12):
            raise ValueError("abduction outside [-pi/6, pi/6]")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def hand_scale(self) -> float:
        return _LENGTHS["middle"][0] * self.scale


def local_joints(spec: HandProxySpec) -> np.ndarray:
    """(21, 3) joint positions in the unscaled hand-local frame."""
    joints = np.zeros((N_JOINTS, 3))
    up = np.array([0.0, 0.0, 1.0])
    for fi, name in enumerate(FINGERS):
        bx, by = _BASES[name]
        base = np.array([bx, by, 0.0])
        ang = _SPLAY[name] + spec.abduction[fi]
        u = np.array([-np.sin(ang), np.cos(ang), 0.0])
        pos = base
        j0 = 1 + 4 * fi
        joints[j0] = pos
        theta = 0.0
        for k in range(3):
            theta += spec.flexion[fi, k]
            d = np.cos(theta) * u - np.sin(theta) * up
            pos = pos + _LENGTHS[name][k] * d
            joints[j0 + 1 + k] = pos
    return joints


def capsules(spec: HandProxySpec, joints_local=None):
    """Capsule list (a, b, radius) in the unscaled hand-local frame."""
    j = local_joints(spec) if joints_local is None else joints_local
    caps = []
    bases = [1 + 4 * fi for fi in range(5)]
    for fi, name in enumerate(FINGERS):
        j0 = bases[fi]
        for k in range(3):
            caps.append((j[j0 + k], j[j0 + k + 1], _RADII[name][k]))
    # palm: fan from the wrist to each finger base plus a knuckle bar
    for b in bases:
        caps.append((j[ROOT], j[b], PALM_RADIUS))
    for a, b in zip(bases[1:-1], bases[2:]):
        caps.append((j[a], j[b], KNUCKLE_RADIUS))
    caps.append((np.array([-22.0, 40.0, 0.0]), np.array([20.0, 45.0, 0.0]), PALM_RADIUS))
    caps.append((np.array([-12.0, 2.0, 0.0]), np.array([12.0, 2.0, 0.0]), PALM_RADIUS))
    return caps


def capsule_sdf(points, caps) -> np.ndarray:
    """Exact signed distance to a union of capsules (negative inside)."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.full(len(p), np.inf)
    for a, b, r in caps:
        ab = b - a
        denom = ab @ ab
        if denom > 0:
            t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
        else:
            t = np.zeros(len(p))
        d = np.linalg.norm(p - (a + t[:, None] * ab), axis=1) - r
        np.minimum(out, d, out=out)
    return out


def hand_mesh_local(spec: HandProxySpec, pitch: float = 2.0) -> TriMesh:
    """Watertight union of the capsules, re-meshed by marching cubes."""
    caps = capsules(spec)
    pts = np.array([c[0] for c in caps] + [c[1] for c in caps])
    rmax = max(c[2] for c in caps)
    lo = pts.min(axis=0) - rmax - 2 * pitch
    hi = pts.max(axis=0) + rmax + 2 * pitch
    grid = ScalarGrid.from_function(lambda q: capsule_sdf(q, caps), lo, hi, pitch)
    return marching_cubes(grid, 0.0)


def place(points_local, spec: HandProxySpec) -> np.ndarray:
    """Scale, rotate and translate hand-local points into the camera frame."""
    return (spec.scale * np.asarray(points_local)) @ spec.rotation.T + spec.translation


def camera_joints(spec: HandProxySpec) -> np.ndarray:
    return place(local_joints(spec), spec)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation matrix (via a random unit quaternion)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
