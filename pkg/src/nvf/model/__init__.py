from .baselines import DenseModel, HolisticModel, dense_targets, vote_dense2d
from .checkpoint import load_checkpoint, save_checkpoint
from .encoder import Encoder
from .losses import dense_loss, holistic_loss, loss_offsets, loss_sdf, nvf_loss
from .nvf import ModelConfig, NVFModel
from .train import TrainConfig, build_model, train

__all__ = [
    "DenseModel", "Encoder", "HolisticModel", "ModelConfig", "NVFModel", "TrainConfig",
    "build_model", "dense_loss", "dense_targets", "holistic_loss", "load_checkpoint",
    "loss_offsets", "loss_sdf", "nvf_loss", "save_checkpoint", "train", "vote_dense2d",
]
