"""Joint prediction from a trained model, with per-joint validity flags."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import NoValidVoters
from .geometry.camera import CameraIntrinsics
from .pose_field import FieldSample, VotingParams, vote_joints
from .sampling import GridSampleSpec, sample_inference_grid


@dataclass
class Prediction:
    joints: np.ndarray  # (T, 3) mm, fallback rows where invalid
    valid: np.ndarray  # (T,) bool
    n_points: int
    seconds: float
    points: np.ndarray | None = None
    field: FieldSample | None = None

    @property
    def n_invalid(self) -> int:
        return int((~self.valid).sum())


def frustum_centroid(cam: CameraIntrinsics, z_near: float, z_far: float) -> np.ndarray:
    """Volume centroid of the image frustum between two depth planes."""
    a, b = float(z_near), float(z_far)
    z = 0.75 * (b ** 4 - a ** 4) / (b ** 3 - a ** 3)
    mx = (cam.width / 2.0 - cam.cx) / cam.fx
    my = (cam.height / 2.0 - cam.cy) / cam.fy
    return np.array([mx * z, my * z, z])


def query_grid(model, step: float, root=None) -> np.ndarray:
    cfg = model.cfg
    if cfg.mode == "camera_space":
        spec = GridSampleSpec(step=step, mode="camera_frustum", cam=model.cam,
                              z_near=cfg.z_near, z_far=cfg.z_far)
    else:
        if root is None:
            raise ValueError("root-relative inference needs a root estimate")
        spec = GridSampleSpec(step=step, mode="root_cube", center=tuple(np.asarray(root, float)),
                              half_extent=cfg.cube_half_extent)
    return sample_inference_grid(spec)


def _fallback_point(model, root):
    if model.cfg.mode == "root_relative" and root is not None:
        return np.asarray(root, dtype=np.float64)
    return frustum_centroid(model.cam, model.cfg.z_near, model.cfg.z_far)


def predict_nvf(model, image, hand_scale=None, params: VotingParams = VotingParams(),
                step: float = 16.0, root=None, points=None, keep_field=False) -> Prediction:
    """Evaluate the field on a voxel-centre grid and vote.

    ``image`` is (H, W, 3) in [0, 1]. In root-relative mode ``root`` centres
    the query cube and is passed to the depth normalisation.
    """
    pts = query_grid(model, step, root) if points is None else np.asarray(points, np.float64)
    t0 = time.perf_counter()
    hs = hand_scale if model.cfg.hand_scale_conditioning else None
    rz = None if root is None else float(np.asarray(root)[2])
    field = model.predict_field(image, pts, hs, rz)
    joints, valid = vote_joints(pts, field, params)
    dt = time.perf_counter() - t0
    joints[~valid] = _fallback_point(model, root)
    return Prediction(joints, valid, len(pts), dt, pts if keep_field else None,
                      field if keep_field else None)


def predict_baseline(model, image, hand_scale=None, root=None) -> Prediction:
    hs = hand_scale if model.cfg.hand_scale_conditioning else None
    t0 = time.perf_counter()
    T = model.cfg.n_joints
    try:
        joints = model.predict_joints(image, hs)
        valid = np.ones(T, dtype=bool)
    except NoValidVoters as e:
        joints = np.array(e.partial, dtype=np.float64)
        valid = np.isfinite(joints).all(axis=1)
    dt = time.perf_counter() - t0
    joints[~valid] = _fallback_point(model, root)
    n = 1 if model.kind == "holistic" else (model.cam.width // 4) * (model.cam.height // 4)
    return Prediction(joints, valid, n, dt)


def predict(model, scene, params: VotingParams = VotingParams(), step: float = 16.0,
            keep_field=False) -> Prediction:
    """Predict joints for a scene record.

    Root-relative models receive the ground-truth root, as in root-relative
    evaluation protocols.
    """
    root = scene.joints[0] if model.cfg.mode == "root_relative" else None
    image = scene.image_float
    if model.kind == "nvf":
        return predict_nvf(model, image, scene.hand_scale, params, step, root, keep_field=keep_field)
    return predict_baseline(model, image, scene.hand_scale, root)


def predict_many(model, scenes, params: VotingParams = VotingParams(), step: float = 16.0):
    return [predict(model, sc, params, step) for sc in scenes]


def predicted_sdf_grid(model, image, center, half_extent=120.0, pitch=4.0, hand_scale=None,
                       root=None):
    """Predicted signed distances on a regular cube around ``center``, as a ScalarGrid."""
    from .surface import ScalarGrid

    c = np.asarray(center, dtype=np.float64)
    n = int(np.floor(2 * half_extent / pitch + 1e-9)) + 1
    grid = ScalarGrid(c - half_extent, pitch, np.zeros((n, n, n)))
    pts = grid.points().reshape(-1, 3)
    hs = hand_scale if model.cfg.hand_scale_conditioning else None
    rz = None if root is None else float(np.asarray(root)[2])
    grid.values = model.predict_field(image, pts, hs, rz).s.reshape(n, n, n)
    return grid


def weight_colors(w) -> np.ndarray:
    """8-bit grey levels proportional to voting weight (brighter = larger)."""
    g = np.clip(np.rint(255.0 * np.asarray(w, dtype=np.float64)), 0, 255).astype(np.uint8)
    return np.repeat(g[:, None], 3, axis=1)
