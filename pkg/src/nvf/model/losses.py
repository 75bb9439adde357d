"""Training losses. All functions accept torch tensors and return scalar tensors."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import EmptyBatch

HUBER_DELTA = 1.0
BCE_EPS = 1e-12


def clamp_sdf(s, delta):
    return torch.clamp(s, -delta, delta)


def loss_sdf(pred_s, true_s, delta):
    """Mean absolute difference of clamped signed distances."""
    if pred_s.numel() == 0:
        raise EmptyBatch("empty batch")
    return (clamp_sdf(true_s, delta) - clamp_sdf(pred_s, delta)).abs().mean()


def huber(pred, target):
    return F.huber_loss(pred, target, reduction="none", delta=HUBER_DELTA)


def loss_offsets(pred_V, true_V, true_s, delta):
    """Near-surface-gated Huber loss on (N, T, 4) offset vectors.

    The per-point sum over all 4T entries is averaged over every point,
    including gated-out ones.
    """
    if pred_V.numel() == 0:
        raise EmptyBatch("empty batch")
    gate = (true_s.abs() < delta).to(pred_V.dtype)
    per_point = huber(pred_V, true_V).flatten(start_dim=true_s.dim()).sum(dim=-1)
    return (gate * per_point).mean()


@dataclass
class LossReport:
    L_s: float
    L_V: float
    total: float
    lam: float
    n_near_surface: int


def nvf_loss(pred_s, pred_w, pred_d, true_s, true_w, true_d, delta, lam):
    """Returns (total tensor, LossReport)."""
    pred_V = torch.cat([pred_w[..., None], pred_d], dim=-1)
    true_V = torch.cat([true_w[..., None], true_d], dim=-1)
    ls = loss_sdf(pred_s, true_s, delta)
    lv = loss_offsets(pred_V, true_V, true_s, delta)
    total = ls + lam * lv
    near = int((true_s.abs() < delta).sum())
    return total, LossReport(ls.item(), lv.item(), total.item(), float(lam), near)


def bce(pred, target):
    return -(target * torch.log(pred + BCE_EPS) + (1 - target) * torch.log(1 - pred + BCE_EPS))


def dense_loss(pred_e, pred_V, true_e, true_V, lam):
    """Foreground BCE plus foreground-weighted Huber on per-cell (T, 4) vectors.

    ``pred_e``/``true_e`` (B, L); ``pred_V``/``true_V`` (B, L, T, 4).
    """
    le = bce(pred_e, true_e).mean()
    per_cell = huber(pred_V, true_V).flatten(start_dim=2).sum(dim=-1)
    lv = (true_e * per_cell).mean()
    return le + lam * lv, le.item(), lv.item()


def holistic_loss(pred_J, true_J):
    return huber(pred_J, true_J).mean()
