"""Pixel-aligned implicit field predicting signed distance and joint votes."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from ..geometry.camera import CameraIntrinsics
from ..pose_field import FieldSample
from .encoder import Encoder, mlp, sample_feature, xavier_init

# conditioning scalar: (hand_scale - HAND_SCALE_REF) / HAND_SCALE_SPAN
HAND_SCALE_REF = 40.0
HAND_SCALE_SPAN = 10.0
DIR_EPS = 1e-8


@dataclass
class ModelConfig:
    n_joints: int = 21
    channels: int = 32
    hidden: tuple = (128, 64, 64, 32)
    hand_scale_conditioning: bool = False
    mode: str = "camera_space"  # or "root_relative"
    z_near: float = 350.0
    z_far: float = 850.0
    cube_half_extent: float = 160.0
    sdf_unit: float = 5.0  # mm per raw output unit of the distance head

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", cls.hidden))
        return cls(**d)


def normalize_depth(z, cfg: ModelConfig, root_z=None):
    """Map depth to roughly [-1, 1]: frustum range, or cube extent around the root."""
    if cfg.mode == "camera_space":
        return 2.0 * (z - cfg.z_near) / (cfg.z_far - cfg.z_near) - 1.0
    return (z - root_z[:, None]) / cfg.cube_half_extent


def normalize_hand_scale(hs):
    return (hs - HAND_SCALE_REF) / HAND_SCALE_SPAN


def project_torch(points, cam: CameraIntrinsics):
    z = points[..., 2]
    u = cam.fx * points[..., 0] / z + cam.cx
    v = cam.fy * points[..., 1] / z + cam.cy
    return torch.stack([u, v], dim=-1)


def unit_directions(raw):
    """Divide by the norm where it exceeds ``DIR_EPS``; zero elsewhere."""
    norm = raw.norm(dim=-1, keepdim=True)
    big = norm > DIR_EPS
    return torch.where(big, raw / torch.where(big, norm, torch.ones_like(norm)),
                       torch.zeros_like(raw))


class NVFModel(nn.Module):
    """Encoder ``g`` plus implicit MLP mapping (feature, depth[, scale]) to (s, V)."""

    kind = "nvf"

    def __init__(self, cfg: ModelConfig = ModelConfig(), cam: CameraIntrinsics | None = None):
        super().__init__()
        self.cfg = cfg
        self.cam = cam
        self.encoder = Encoder(cfg.channels)
        n_in = cfg.channels + 1 + int(cfg.hand_scale_conditioning)
        self.mlp = mlp((n_in,) + tuple(cfg.hidden) + (1 + 4 * cfg.n_joints,))
        xavier_init(self)

    @property
    def input_width(self):
        return self.mlp[0].in_features

    def encode(self, images):
        return self.encoder(images)

    def query(self, fmap, points, hand_scale=None, root_z=None):
        """Evaluate the field at ``points`` (B, N, 3) given feature maps (B, C, H', W').

        Returns ``(s, w, d)`` with shapes (B, N), (B, N, T), (B, N, T, 3); ``s`` in mm.
        """
        cam = self.cam
        uv = project_torch(points, cam)
        feat = sample_feature(fmap, uv, (cam.width, cam.height))
        inputs = [feat, normalize_depth(points[..., 2], self.cfg, root_z)[..., None]]
        if self.cfg.hand_scale_conditioning:
            if hand_scale is None:
                raise ValueError("model was built with hand-scale conditioning")
            hs = normalize_hand_scale(hand_scale)
            inputs.append(hs[:, None, None].expand(-1, points.shape[1], 1).to(feat.dtype))
        out = self.mlp(torch.cat(inputs, dim=-1))
        T = self.cfg.n_joints
        s = out[..., 0] * self.cfg.sdf_unit
        rest = out[..., 1:].reshape(out.shape[:-1] + (T, 4))
        w = torch.sigmoid(rest[..., 0])
        d = unit_directions(rest[..., 1:])
        return s, w, d

    def forward(self, images, points, hand_scale=None, root_z=None):
        return self.query(self.encode(images), points, hand_scale, root_z)

    @torch.no_grad()
    def predict_field(self, image, points, hand_scale=None, root_z=None, chunk=65536) -> FieldSample:
        """Field at many points for one image (numpy in, numpy out), evaluated in chunks."""
        dtype = next(self.parameters()).dtype
        img = torch.as_tensor(np.asarray(image), dtype=dtype)
        if img.dim() == 3 and img.shape[-1] == 3:
            img = img.permute(2, 0, 1)
        fmap = self.encode(img[None])
        hs = None if hand_scale is None else torch.tensor([float(hand_scale)], dtype=dtype)
        rz = None if root_z is None else torch.tensor([float(root_z)], dtype=dtype)
        pts = np.asarray(points, dtype=np.float64)
        ss, ws, ds = [], [], []
        for i in range(0, len(pts), chunk):
            p = torch.as_tensor(pts[i:i + chunk], dtype=dtype)[None]
            s, w, d = self.query(fmap, p, hs, rz)
            ss.append(s[0].double().numpy())
            ws.append(w[0].double().numpy())
            ds.append(d[0].double().numpy())
        return FieldSample(np.concatenate(ss), np.concatenate(ws), np.concatenate(ds))
