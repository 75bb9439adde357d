"""
Surfaces from signed distances
==============================

Sample the exact signed distance of a synthetic hand on a regular grid and
mesh the zero level set with marching cubes. The same routine turns a
trained model's predicted distances into a mesh; here a freshly initialised
model stands in, so its surface is arbitrary.
"""

import tempfile
from pathlib import Path

import numpy as np

from nvf.geometry.meshio import write_obj, write_ply
from nvf.inference import predict_nvf, predicted_sdf_grid, weight_colors
from nvf.model import ModelConfig
from nvf.model.train import build_model
from nvf.scenes.generate import generate_dataset
from nvf.surface import ScalarGrid, marching_cubes

scene = generate_dataset(1, seed=3, split="eval")[0]
out = Path(tempfile.mkdtemp(prefix="nvf_demo_"))

###############################################################################
# Exact distances, 3 mm grid around the hand.

lo = scene.mesh.vertices.min(axis=0) - 6
hi = scene.mesh.vertices.max(axis=0) + 6
grid = ScalarGrid.from_function(scene.mesh.signed_distance, lo, hi, 3.0)
mesh = marching_cubes(grid)
print(f"re-extracted {len(mesh.faces)} faces, watertight={mesh.is_watertight}")
print(f"volume {mesh.volume() / 1e3:.1f} cm^3 vs source {scene.mesh.volume() / 1e3:.1f} cm^3")
write_obj(out / "exact.obj", mesh)

###############################################################################
# Predicted field of an untrained model: a mesh plus one point cloud per
# joint whose grey level is the predicted voting weight.

model = build_model("nvf", ModelConfig(), scene.cam, seed=0)
pred = predict_nvf(model, scene.image_float, scene.hand_scale, step=16.0, keep_field=True)
print(f"queried {pred.n_points} grid points, {pred.n_invalid} joints without voters")
grid = predicted_sdf_grid(model, scene.image_float, scene.joints.mean(axis=0), 100.0, 8.0)
write_obj(out / "predicted.obj", marching_cubes(grid))
near = np.abs(pred.field.s) < 5.0
write_ply(out / "votes_wrist.ply", pred.points[near], colors=weight_colors(pred.field.w[near, 0]))
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
