"""Regression baselines sharing the NVF encoder: holistic and 2D dense voting."""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..errors import NoValidVoters, ShapeError
from ..geometry.camera import CameraIntrinsics
from ..geometry.select import knn_ball_mask
from ..scenes.render import pixel_center_rays
from .encoder import Encoder, mlp, xavier_init
from .nvf import ModelConfig, normalize_hand_scale

# camera-space coordinates are regressed as COORD_CENTER + COORD_UNIT * raw
COORD_CENTER = (0.0, 0.0, 600.0)
COORD_UNIT = 100.0


def to_coord_units(x_mm):
    c = torch.as_tensor(COORD_CENTER, dtype=x_mm.dtype)
    return (x_mm - c) / COORD_UNIT


def from_coord_units(x):
    c = torch.as_tensor(COORD_CENTER, dtype=x.dtype)
    return x * COORD_UNIT + c


def _scale_input(cfg, hand_scale, like):
    if not cfg.hand_scale_conditioning:
        return None
    if hand_scale is None:
        raise ValueError("model was built with hand-scale conditioning")
    return normalize_hand_scale(hand_scale).to(like.dtype)


class HolisticModel(nn.Module):
    """Global average pooling of the feature map, then an MLP to 3T coordinates."""

    kind = "holistic"

    def __init__(self, cfg: ModelConfig = ModelConfig(), cam: CameraIntrinsics | None = None):
        super().__init__()
        self.cfg = cfg
        self.cam = cam
        self.encoder = Encoder(cfg.channels)
        n_in = cfg.channels + int(cfg.hand_scale_conditioning)
        self.mlp = mlp((n_in,) + tuple(cfg.hidden) + (3 * cfg.n_joints,))
        xavier_init(self)

    def forward(self, images, hand_scale=None):
        """Returns raw joint coordinates in coordinate units, (B, T, 3)."""
        fmap = self.encoder(images)
        pooled = fmap.mean(dim=(2, 3))
        hs = _scale_input(self.cfg, hand_scale, pooled)
        if hs is not None:
            pooled = torch.cat([pooled, hs[:, None]], dim=-1)
        out = self.mlp(pooled)
        if out.shape[-1] != 3 * self.cfg.n_joints:
            raise ShapeError("holistic head arity mismatch")
        return out.view(-1, self.cfg.n_joints, 3)

    @torch.no_grad()
    def predict_joints(self, image, hand_scale=None) -> np.ndarray:
        dtype = next(self.parameters()).dtype
        img = torch.as_tensor(np.asarray(image), dtype=dtype).permute(2, 0, 1)[None]
        hs = None if hand_scale is None else torch.tensor([float(hand_scale)], dtype=dtype)
        return from_coord_units(self(img, hs))[0].double().numpy()


class DenseModel(nn.Module):
    """Per feature-cell MLP predicting foreground probability and (w, joint) votes."""

    kind = "dense2d"

    def __init__(self, cfg: ModelConfig = ModelConfig(), cam: CameraIntrinsics | None = None):
        super().__init__()
        self.cfg = cfg
        self.cam = cam
        self.encoder = Encoder(cfg.channels)
        n_in = cfg.channels + int(cfg.hand_scale_conditioning)
        self.mlp = mlp((n_in,) + tuple(cfg.hidden) + (1 + 4 * cfg.n_joints,))
        xavier_init(self)

    def forward(self, images, hand_scale=None):
        """Returns e (B, L), w (B, L, T), raw joint coordinates (B, L, T, 3)."""
        fmap = self.encoder(images)
        b, c, h, w = fmap.shape
        feat = fmap.permute(0, 2, 3, 1).reshape(b, h * w, c)
        hs = _scale_input(self.cfg, hand_scale, feat)
        if hs is not None:
            feat = torch.cat([feat, hs[:, None, None].expand(-1, h * w, 1)], dim=-1)
        out = self.mlp(feat)
        T = self.cfg.n_joints
        e = torch.sigmoid(out[..., 0])
        rest = out[..., 1:].reshape(b, h * w, T, 4)
        return e, torch.sigmoid(rest[..., 0]), rest[..., 1:]

    @torch.no_grad()
    def predict_cells(self, image, hand_scale=None):
        dtype = next(self.parameters()).dtype
        img = torch.as_tensor(np.asarray(image), dtype=dtype).permute(2, 0, 1)[None]
        hs = None if hand_scale is None else torch.tensor([float(hand_scale)], dtype=dtype)
        e, w, j = self(img, hs)
        return (e[0].double().numpy(), w[0].double().numpy(),
                from_coord_units(j[0]).double().numpy())

    def predict_joints(self, image, hand_scale=None) -> np.ndarray:
        return vote_dense2d(*self.predict_cells(image, hand_scale))


def vote_dense2d(e, w, j, threshold=0.5):
    """Weighted average of per-cell joint predictions over foreground cells.

    ``e`` (L,), ``w`` (L, T), ``j`` (L, T, 3) in mm.

    :raises NoValidVoters: when no cell is foreground or all weights vanish.
    """
    fg = np.asarray(e) > threshold
    T = w.shape[1]
    out = np.full((T, 3), np.nan)
    if not fg.any():
        raise NoValidVoters(range(T), partial=out)
    wf = w[fg]
    den = wf.sum(axis=0)
    ok = den > 0
    out[ok] = np.einsum("lt,ltk->tk", wf[:, ok], j[fg][:, ok]) / den[ok, None]
    if not ok.all():
        raise NoValidVoters(np.flatnonzero(~ok), partial=out)
    return out


def dense_targets(mesh, joints, cam: CameraIntrinsics, stride=4, r=80.0, K=1024):
    """Per-cell ground truth from the first ray hit through each cell centre.

    Returns e (L,), w (L, T) and the joint targets (L, T, 3) in mm, cells
    ordered row-major to match the feature map.
    """
    _, dirs = pixel_center_rays(cam, stride)
    t, _ = mesh.ray_cast(np.zeros(3), dirs)
    hit = np.isfinite(t)
    joints = np.asarray(joints, dtype=np.float64)
    L, T = len(dirs), len(joints)
    w = np.zeros((L, T))
    if hit.any():
        pts = dirs[hit] * t[hit, None]
        dist = np.linalg.norm(pts[:, None, :] - joints[None], axis=-1)
        sel = knn_ball_mask(joints, pts, K, r, dist=dist)
        w[hit] = np.where(sel, 1.0 - dist / r, 0.0)
    jt = np.broadcast_to(joints, (L, T, 3)).copy()
    return hit.astype(np.float64), w, jt
