"""Run configuration: a flat ``key = value`` text file with ``#`` comments."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .model.nvf import ModelConfig
from .model.train import TrainConfig, default_lambda
from .pose_field import VotingParams
from .sampling import TrainSampleSpec
from .scenes.generate import Z_FAR, Z_NEAR, Randomization

MODES = ("camera_space", "root_relative")
MODELS = ("nvf", "baseline=holistic", "baseline=dense2d")

# key -> (help text, origin). Origin "published" marks values taken from the
# original method description, "desk-scale" marks choices made for this
# CPU-sized reproduction.
FIELD_DOCS = {
    "mode": ("camera_space or root_relative", "published"),
    "model": ("nvf, baseline=holistic or baseline=dense2d", "published"),
    "seed": ("master seed for data, sampling and weights", "desk-scale"),
    "delta": ("SDF clamping distance, mm", "published"),
    "r": ("voting ball radius, mm", "published"),
    "K": ("nearest near-surface points per joint", "published"),
    "fraction": ("top fraction of voters kept per joint", "published"),
    "step": ("inference voxel pitch, mm", "published"),
    "n_near_surface": ("perturbed surface samples per pool", "published"),
    "surface_noise_sigma": ("surface perturbation std, mm", "desk-scale"),
    "n_bounding_sphere": ("pool samples in the bounding sphere", "published"),
    "n_frustum": ("pool samples in the frustum", "published"),
    "n_inside": ("interior points per training batch", "published"),
    "n_outside": ("exterior points per training batch", "published"),
    "max_retries": ("pool resampling attempts", "desk-scale"),
    "channels": ("encoder feature channels", "desk-scale"),
    "hidden": ("MLP hidden sizes, comma separated", "desk-scale"),
    "hand_scale_conditioning": ("feed the reference bone length to the model", "published"),
    "z_near": ("frustum near plane, mm", "desk-scale"),
    "z_far": ("frustum far plane, mm", "desk-scale"),
    "cube_half_extent": ("root-relative cube half size, mm", "desk-scale"),
    "steps": ("optimisation steps", "desk-scale"),
    "batch_size": ("images per step", "desk-scale"),
    "lr": ("initial learning rate", "desk-scale"),
    "rho": ("RMSProp squared-gradient decay", "desk-scale"),
    "eps": ("RMSProp epsilon", "desk-scale"),
    "decay_at": ("fractions of training where lr drops, comma separated", "published"),
    "decay_factor": ("lr multiplier at each drop", "published"),
    "lam": ("offset-loss weight, auto picks the per-mode default", "published"),
    "n_banks": ("pre-sampled point batches per scene", "desk-scale"),
    "n_scenes": ("scenes produced by gen", "desk-scale"),
    "split": ("seed partition used by gen", "desk-scale"),
    "depth_min": ("lowest joint-centroid depth, mm", "desk-scale"),
    "depth_max": ("highest joint-centroid depth, mm", "desk-scale"),
    "scale_min": ("smallest global hand scale", "desk-scale"),
    "scale_max": ("largest global hand scale", "desk-scale"),
    "occlusion_prob": ("chance of a sphere occluder per scene", "desk-scale"),
    "mesh_pitch": ("grid pitch for meshing the hand, mm", "desk-scale"),
    "scenes": ("dataset directory", "desk-scale"),
}


@dataclass
class RunConfig:
    mode: str = "camera_space"
    model: str = "nvf"
    seed: int = 0
    delta: float = 5.0
    r: float = 80.0
    K: int = 1024
    fraction: float = 0.5
    step: float = 16.0
    n_near_surface: int = 12500
    surface_noise_sigma: float = 10.0
    n_bounding_sphere: int = 1000
    n_frustum: int = 1000
    n_inside: int = 2500
    n_outside: int = 2500
    max_retries: int = 8
    channels: int = 32
    hidden: tuple = (128, 64, 64, 32)
    hand_scale_conditioning: bool = False
    z_near: float = Z_NEAR
    z_far: float = Z_FAR
    cube_half_extent: float = 160.0
    steps: int = 4500
    batch_size: int = 4
    lr: float = 1e-3
    rho: float = 0.99
    eps: float = 1e-8
    decay_at: tuple = (2 / 3, 5 / 6)
    decay_factor: float = 0.1
    lam: float | None = None
    n_banks: int = 2
    n_scenes: int = 64
    split: str = "train"
    depth_min: float = 470.0
    depth_max: float = 730.0
    scale_min: float = 0.8
    scale_max: float = 1.25
    occlusion_prob: float = 0.0
    mesh_pitch: float = 2.0
    scenes: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        self.hidden = tuple(int(h) for h in self.hidden)
        self.decay_at = tuple(float(x) for x in self.decay_at)

    # builders for the component configs
    @property
    def model_kind(self) -> str:
        return self.model.split("=", 1)[-1]

    def voting_params(self) -> VotingParams:
        return VotingParams(self.delta, self.r, self.K, self.fraction)

    def train_sample_spec(self) -> TrainSampleSpec:
        return TrainSampleSpec(self.n_near_surface, self.surface_noise_sigma, self.n_bounding_sphere,
                               self.n_frustum, self.n_inside, self.n_outside, self.max_retries)

    def model_config(self) -> ModelConfig:
        return ModelConfig(channels=self.channels, hidden=self.hidden,
                           hand_scale_conditioning=self.hand_scale_conditioning, mode=self.mode,
                           z_near=self.z_near, z_far=self.z_far,
                           cube_half_extent=self.cube_half_extent)

    def train_config(self) -> TrainConfig:
        lam = self.lam if self.lam is not None else default_lambda(self.model_kind, self.mode)
        return TrainConfig(self.steps, self.batch_size, self.lr, self.rho, self.eps, self.decay_at,
                           self.decay_factor, lam, self.seed, self.n_banks)

    def randomization(self) -> Randomization:
        return Randomization(depth=(self.depth_min, self.depth_max),
                             scale=(self.scale_min, self.scale_max),
                             occlusion_prob=self.occlusion_prob)

    # text format
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_encode(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {n}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {n}: unknown key {key!r}")
            values[key] = _decode(val, getattr(base, key), key)
        return dataclasses.replace(base, **values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_text())

    def with_overrides(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})


def _encode(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_encode(x) for x in v)
    return str(v)


def _decode(text: str, like, key):
    if key == "lam":
        return None if text == "auto" else float(text)
    if isinstance(like, bool):
        if text not in ("true", "false"):
            raise ValueError(f"{key}: expected true or false")
        return text == "true"
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, tuple):
        conv = int if key == "hidden" else float
        return tuple(conv(x) for x in text.split(",") if x.strip())
    return text


def describe() -> str:
    """Every key with its default and origin, for ``--help``."""
    d = RunConfig()
    out = []
    for f in fields(RunConfig):
        text, origin = FIELD_DOCS[f.name]
        out.append(f"  {f.name} = {_encode(getattr(d, f.name))}  [{origin}] {text}")
    return "\n".join(out)
