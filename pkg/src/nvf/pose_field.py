"""Dense offset-based pose re-parameterisation and weighted vote casting.

Every query point ``p`` carries, per joint ``t``, a voting weight
``w_t = 1 - |j_t - p| / r`` and a unit direction ``d_t`` toward the joint.
Both are zero unless ``p`` is near the surface (``|s| < delta``), inside the
ball of radius ``r`` around the joint, and among the ``K`` nearest such
near-surface points. Joints are recovered as the weight-averaged votes
``p + r (1 - w) d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoValidVoters
from .geometry.select import knn_ball_mask


@dataclass(frozen=True)
class VotingParams:
    delta: float = 5.0
    r: float = 80.0
    K: int = 1024
    fraction: float = 0.5

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")


@dataclass
class FieldSample:
    """Batched per-point field values: s (N,), w (N, T), d (N, T, 3)."""

    s: np.ndarray
    w: np.ndarray
    d: np.ndarray

    def __len__(self):
        return len(self.s)

    @property
    def n_joints(self) -> int:
        return self.w.shape[1]

    def offsets(self) -> np.ndarray:
        """(N, T, 4) stacked (w, d) vectors."""
        return np.concatenate([self.w[..., None], self.d], axis=-1)


def build_targets(points, joints, mesh=None, params: VotingParams = VotingParams(),
                  sdf=None) -> FieldSample:
    """Ground-truth signed distances and 4D offset vectors for a batch of points.

    The KNN sets are computed over the near-surface subset of this batch.
    Pass ``sdf`` to reuse precomputed signed distances instead of querying
    ``mesh``.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    j = np.asarray(joints, dtype=np.float64).reshape(-1, 3)
    if len(p) == 0:
        raise ValueError("need at least one point")
    s = mesh.signed_distance(p) if sdf is None else np.asarray(sdf, dtype=np.float64)
    n, t = len(p), len(j)
    w = np.zeros((n, t))
    d = np.zeros((n, t, 3))
    near = np.flatnonzero(np.abs(s) < params.delta)
    if len(near):
        diff = j[None, :, :] - p[near, None, :]
        dist = np.linalg.norm(diff, axis=-1)
        sel = knn_ball_mask(j, p[near], params.K, params.r, dist=dist)
        ww = np.where(sel, 1.0 - dist / params.r, 0.0)
        # the direction is undefined on the joint itself; w = 1 pins the vote there
        safe = np.where(dist > 0, dist, 1.0)
        dd = np.where((sel & (dist > 0))[..., None], diff / safe[..., None], 0.0)
        w[near] = ww
        d[near] = dd
    return FieldSample(s, w, d)


def reconstruct_offset(w, d, s, params: VotingParams = VotingParams()) -> np.ndarray:
    """Offset ``1(|s| < delta) * r (1 - w) d``; broadcasts over leading axes."""
    w = np.asarray(w, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    gate = (np.abs(s) < params.delta).astype(np.float64)
    while gate.ndim < w.ndim:
        gate = gate[..., None]
    return (gate * params.r * (1.0 - w))[..., None] * d


def _fsum_rows(weights, values):
    """Compensated weighted sums: (sum w, [sum w * v_k for each column])."""
    den = math.fsum(weights.tolist())
    num = [math.fsum((weights * values[:, k]).tolist()) for k in range(values.shape[1])]
    return den, num


def vote_joints(points, pred: FieldSample, params: VotingParams = VotingParams()):
    """Weighted-average voting that never raises.

    Returns ``(joints, valid)``: (T, 3) estimates with NaN rows for joints
    without usable votes, and the (T,) validity mask.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(p) != len(pred):
        raise ValueError("points and predictions must be aligned")
    T = pred.n_joints
    out = np.full((T, 3), np.nan)
    valid = np.zeros(T, dtype=bool)
    voters = np.flatnonzero(np.abs(pred.s) < params.delta)
    if len(voters) == 0:
        return out, valid
    k = max(1, math.ceil(params.fraction * len(voters)))
    wv = np.asarray(pred.w, dtype=np.float64)[voters]
    votes = p[voters, None, :] + reconstruct_offset(wv, pred.d[voters], pred.s[voters], params)
    for t in range(T):
        wt = wv[:, t]
        if k < len(voters):
            top = np.argsort(-wt, kind="stable")[:k]
        else:
            top = np.arange(len(voters))
        den, num = _fsum_rows(wt[top], votes[top, t, :])
        if den > 0:
            out[t] = np.array(num) / den
            valid[t] = True
    return out, valid


def cast_votes(points, pred: FieldSample, params: VotingParams = VotingParams()) -> np.ndarray:
    """Joint positions (T, 3) from dense votes.

    :raises NoValidVoters: listing the joints without usable votes; the
        exception's ``partial`` holds the estimate with NaN rows.
    """
    joints, valid = vote_joints(points, pred, params)
    if not valid.all():
        raise NoValidVoters(np.flatnonzero(~valid), partial=joints)
    return joints
