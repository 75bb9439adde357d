"""
Three regressors, one encoder
=============================

Train the implicit voting model and the two baselines on a handful of
synthetic scenes with the same encoder and step budget, then compare their
camera-space errors on held-out scenes. A few hundred steps on eight scenes
is far too little to rank the methods; the point is the workflow. The
acceptance tests run the same comparison at desk scale.
"""

import numpy as np

from nvf.evaluation import evaluate_predictions
from nvf.inference import predict_many
from nvf.model import ModelConfig
from nvf.model.train import TrainConfig, build_model, loss_drop, train
from nvf.scenes.generate import generate_dataset

train_scenes = generate_dataset(8, seed=0, split="train")
eval_scenes = generate_dataset(8, seed=0, split="eval")
cfg = TrainConfig(steps=200, batch_size=2, lr=1e-3)

###############################################################################
# Predicting the training-set mean pose is the bar every model has to clear.

mean_pose = np.mean([s.joints for s in train_scenes], axis=0)
bar = np.mean([np.linalg.norm(mean_pose - s.joints, axis=1).mean() for s in eval_scenes])
print(f"mean-pose CS-MJE: {bar:.1f} mm")

for kind in ("holistic", "dense2d", "nvf"):
    model = build_model(kind, ModelConfig(), train_scenes[0].cam, seed=0)
    curve = train(model, train_scenes, cfg)
    rep = evaluate_predictions(predict_many(model, eval_scenes), eval_scenes)
    print(f"{kind:>9}: loss drop {loss_drop(curve):.0%}, CS-MJE {rep.cs_mje:.1f} mm, "
          f"DE {rep.de:.1f} mm, invalid joints {rep.invalid_joint_count}")
