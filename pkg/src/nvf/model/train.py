"""Training loops for NVF and both baselines (RMSProp, step-decayed learning rate)."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..errors import TrainingDiverged
from ..pose_field import VotingParams, build_targets
from ..sampling import TrainSampleSpec, sample_training_points
from .baselines import DenseModel, HolisticModel, dense_targets, to_coord_units
from .losses import dense_loss, holistic_loss, nvf_loss
from .nvf import ModelConfig, NVFModel

log = logging.getLogger(__name__)

LAMBDA_CAMERA = 0.1
LAMBDA_ROOT = 10.0
LAMBDA_DENSE = 0.1


@dataclass
class TrainConfig:
    steps: int = 4500
    batch_size: int = 4
    lr: float = 1e-3
    rho: float = 0.99
    eps: float = 1e-8
    decay_at: tuple = (2 / 3, 5 / 6)
    decay_factor: float = 0.1
    lam: float | None = None
    seed: int = 0
    n_banks: int = 2
    log_every: int = 0

    def to_dict(self):
        d = asdict(self)
        d["decay_at"] = list(self.decay_at)
        return d


def default_lambda(kind: str, mode: str = "camera_space") -> float:
    if kind == "dense2d":
        return LAMBDA_DENSE
    return LAMBDA_CAMERA if mode == "camera_space" else LAMBDA_ROOT


def build_model(kind: str, cfg: ModelConfig, cam, seed: int = 0):
    torch.manual_seed(seed)
    cls = {"nvf": NVFModel, "holistic": HolisticModel, "dense2d": DenseModel}[kind]
    return cls(cfg, cam)


def images_tensor(scenes, dtype=torch.float32):
    arr = np.stack([s.image for s in scenes]).astype(np.float32) / 255.0
    return torch.as_tensor(arr, dtype=dtype).permute(0, 3, 1, 2).contiguous()


@dataclass
class PointBanks:
    """Pre-sampled training points and exact signed distances per scene.

    Signed-distance queries dominate the cost of a training step, so each
    scene gets ``n_banks`` independent batches up front; offsets are rebuilt
    from them every step.
    """

    points: list = field(default_factory=list)  # per scene (n_banks, N, 3) float32
    sdf: list = field(default_factory=list)  # per scene (n_banks, N) float32
    root_z: np.ndarray | None = None

    @classmethod
    def build(cls, scenes, spec: TrainSampleSpec, n_banks: int, seed: int, mode="camera_space",
              z_near=350.0, z_far=850.0, half_extent=160.0):
        banks = cls()
        for sc, rng in zip(scenes, bank_rngs(seed, len(scenes))):
            pts, sds = sample_banks(sc, spec, n_banks, rng, mode, z_near, z_far, half_extent)
            banks.points.append(pts)
            banks.sdf.append(sds)
        banks.root_z = np.array([sc.joints[0, 2] for sc in scenes])
        return banks


def bank_rngs(seed: int, n: int):
    """One independent generator per scene, so banks can also be built scene by scene."""
    return [np.random.default_rng(c) for c in np.random.SeedSequence([int(seed), 7]).spawn(n)]


def sample_banks(scene, spec: TrainSampleSpec, n_banks: int, rng, mode="camera_space",
                 z_near=350.0, z_far=850.0, half_extent=160.0):
    """``n_banks`` training batches for one scene: float32 (n_banks, N, 3) and (n_banks, N)."""
    region = (scene.joints[0], half_extent) if mode == "root_relative" else None
    pts, sds = [], []
    for _ in range(n_banks):
        p, s = sample_training_points(scene.mesh, scene.cam, spec, rng, z_near, z_far,
                                      region=region, return_sdf=True)
        pts.append(p)
        sds.append(s)
    return np.asarray(pts, dtype=np.float32), np.asarray(sds, dtype=np.float32)


def _optimizer(model, cfg: TrainConfig):
    opt = torch.optim.RMSprop(model.parameters(), lr=cfg.lr, alpha=cfg.rho, eps=cfg.eps)
    milestones = sorted({int(round(f * cfg.steps)) for f in cfg.decay_at})
    sched = torch.optim.lr_scheduler.MultiStepLR(opt, milestones, gamma=cfg.decay_factor)
    return opt, sched


def _grad_norms(model):
    return {n: float(p.grad.norm()) for n, p in model.named_parameters() if p.grad is not None}


def _batches(n_items, cfg: TrainConfig, rng):
    """Yield (epoch, indices) covering shuffled epochs."""
    epoch = 0
    while True:
        perm = rng.permutation(n_items)
        for i in range(0, n_items - cfg.batch_size + 1 if n_items >= cfg.batch_size else 1,
                       cfg.batch_size):
            yield epoch, perm[i:i + cfg.batch_size]
        epoch += 1


def _fit(model, cfg: TrainConfig, n_items, step_fn):
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt, sched = _optimizer(model, cfg)
    curve = []
    batches = _batches(n_items, cfg, rng)
    t0 = time.perf_counter()
    model.train()
    for step in range(cfg.steps):
        epoch, idx = next(batches)
        opt.zero_grad(set_to_none=True)
        loss, report = step_fn(idx, epoch)
        if not torch.isfinite(loss):
            loss.backward()
            raise TrainingDiverged(
                f"non-finite loss at step {step}, lr={sched.get_last_lr()[0]:.3g}, "
                f"grad norms={_grad_norms(model)}")
        loss.backward()
        opt.step()
        sched.step()
        report = dict(report, step=step, lr=sched.get_last_lr()[0])
        curve.append(report)
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d loss %.5f (%.1fs)", step, report["total"], time.perf_counter() - t0)
    model.eval()
    return curve


def train_nvf(model: NVFModel, scenes, cfg: TrainConfig = TrainConfig(),
              params: VotingParams = VotingParams(), spec: TrainSampleSpec = TrainSampleSpec(),
              banks: PointBanks | None = None):
    """Fit ``model`` on ``scenes``; returns the per-step loss curve (list of dicts)."""
    mcfg = model.cfg
    lam = default_lambda("nvf", mcfg.mode) if cfg.lam is None else cfg.lam
    if banks is None:
        banks = PointBanks.build(scenes, spec, cfg.n_banks, cfg.seed, mcfg.mode,
                                 mcfg.z_near, mcfg.z_far, mcfg.cube_half_extent)
    dtype = next(model.parameters()).dtype
    images = images_tensor(scenes, dtype)
    hscale = torch.tensor([s.hand_scale for s in scenes], dtype=dtype)
    root_z = torch.as_tensor(banks.root_z, dtype=dtype)

    def step_fn(idx, epoch):
        pts, ts, tw, td = [], [], [], []
        for i in idx:
            b = epoch % len(banks.points[i])
            p = banks.points[i][b].astype(np.float64)
            tgt = build_targets(p, scenes[i].joints, params=params, sdf=banks.sdf[i][b])
            pts.append(p)
            ts.append(tgt.s)
            tw.append(tgt.w)
            td.append(tgt.d)
        P = torch.as_tensor(np.stack(pts), dtype=dtype)
        s, w, d = model(images[idx], P, hscale[idx], root_z[idx])
        total, rep = nvf_loss(s, w, d, torch.as_tensor(np.stack(ts), dtype=dtype),
                              torch.as_tensor(np.stack(tw), dtype=dtype),
                              torch.as_tensor(np.stack(td), dtype=dtype), params.delta, lam)
        return total, {"total": rep.total, "L_s": rep.L_s, "L_V": rep.L_V}

    return _fit(model, cfg, len(scenes), step_fn)


def train_holistic(model: HolisticModel, scenes, cfg: TrainConfig = TrainConfig()):
    dtype = next(model.parameters()).dtype
    images = images_tensor(scenes, dtype)
    hscale = torch.tensor([s.hand_scale for s in scenes], dtype=dtype)
    joints = to_coord_units(torch.as_tensor(np.stack([s.joints for s in scenes]), dtype=dtype))

    def step_fn(idx, epoch):
        pred = model(images[idx], hscale[idx])
        loss = holistic_loss(pred, joints[idx])
        return loss, {"total": loss.item()}

    return _fit(model, cfg, len(scenes), step_fn)


def dense_target_tensors(scenes, params: VotingParams, stride=4, dtype=torch.float32):
    es, vs = [], []
    for sc in scenes:
        e, w, j = dense_targets(sc.mesh, sc.joints, sc.cam, stride, params.r, params.K)
        es.append(e)
        jt = to_coord_units(torch.as_tensor(j, dtype=torch.float64)).numpy()
        vs.append(np.concatenate([w[..., None], jt], axis=-1))
    return torch.as_tensor(np.stack(es), dtype=dtype), torch.as_tensor(np.stack(vs), dtype=dtype)


def train_dense(model: DenseModel, scenes, cfg: TrainConfig = TrainConfig(),
                params: VotingParams = VotingParams(), targets=None):
    lam = default_lambda("dense2d") if cfg.lam is None else cfg.lam
    dtype = next(model.parameters()).dtype
    images = images_tensor(scenes, dtype)
    hscale = torch.tensor([s.hand_scale for s in scenes], dtype=dtype)
    te, tv = targets if targets is not None else dense_target_tensors(scenes, params, dtype=dtype)

    def step_fn(idx, epoch):
        e, w, j = model(images[idx], hscale[idx])
        pv = torch.cat([w[..., None], j], dim=-1)
        loss, le, lv = dense_loss(e, pv, te[idx], tv[idx], lam)
        return loss, {"total": loss.item(), "L_e": le, "L_V": lv}

    return _fit(model, cfg, len(scenes), step_fn)


def train(model, scenes, cfg: TrainConfig = TrainConfig(), **kw):
    """Dispatch to the training loop matching the model kind."""
    if model.kind == "nvf":
        return train_nvf(model, scenes, cfg, **kw)
    if model.kind == "holistic":
        return train_holistic(model, scenes, cfg)
    return train_dense(model, scenes, cfg, **{k: v for k, v in kw.items() if k in ("params", "targets")})


def moving_average(values, k=10):
    v = np.asarray(values, dtype=np.float64)
    if len(v) < k:
        return v
    c = np.cumsum(np.insert(v, 0, 0.0))
    return (c[k:] - c[:-k]) / k


def loss_drop(curve, k=10):
    """Fractional decrease from the first to the last k-step moving average."""
    ma = moving_average([c["total"] for c in curve], k)
    return 1.0 - ma[-1] / ma[0] if len(ma) and ma[0] > 0 else math.nan
