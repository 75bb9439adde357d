"""Command-line entry point: gen, train, infer, eval, ablate, render."""
from __future__ import annotations

import argparse
import csv
import logging
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, describe

log = logging.getLogger("nvf")

DEFAULT_SWEEP = "step=8,16,32;fraction=0.25,0.5,1.0"


class Outputs:
    """Tracks paths created by a command so a failure can remove them."""

    def __init__(self):
        self.paths = []

    def add(self, path):
        path = Path(path)
        if not path.exists():
            self.paths.append(path)
        return path

    def cleanup(self):
        for p in reversed(self.paths):
            if p.is_dir():
                shutil.rmtree(p, ignore_errors=True)
            elif p.exists():
                p.unlink()


def _setup(args) -> RunConfig:
    level = os.environ.get("NVF_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    import torch

    if args.threads:
        torch.set_num_threads(args.threads)
        os.environ.setdefault("NUMBA_NUM_THREADS", str(args.threads))
    if args.deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    model = getattr(args, "model", None)
    return cfg.with_overrides(seed=args.seed, mode=args.mode, model=model)


def _load_scenes(path):
    from .scenes.io import read_dataset, scene_dirs

    if not path:
        raise FileNotFoundError("no scene directory given (--scenes or config key scenes)")
    if not Path(path).is_dir():
        raise FileNotFoundError(f"scene directory {path} does not exist")
    return read_dataset(path), [p.name for p in scene_dirs(path)]


def _load_model(cfg: RunConfig, ckpt):
    from .model.checkpoint import load_checkpoint

    model, manifest = load_checkpoint(ckpt)
    if model.kind != cfg.model_kind:
        raise ValueError(f"checkpoint holds a {model.kind} model, --model asks for {cfg.model_kind}")
    return model


def _out_dir(args, outputs, default="out"):
    out = Path(args.out or default)
    outputs.add(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(cfg: RunConfig, args, outputs):
    from .scenes.generate import generate_dataset
    from .scenes.io import write_dataset

    out = _out_dir(args, outputs, "data")
    n = args.n or cfg.n_scenes
    scenes = generate_dataset(n, cfg.randomization(), cfg.seed, args.split or cfg.split,
                              pitch=cfg.mesh_pitch)
    write_dataset(out, scenes)
    cfg.with_overrides(n_scenes=n).save(outputs.add(out / "config.txt"))
    return 0


def cmd_train(cfg: RunConfig, args, outputs):
    from .model.checkpoint import save_checkpoint
    from .model.train import build_model, train

    scenes, _ = _load_scenes(args.scenes or cfg.scenes)
    if args.out and args.out.endswith(".nvf"):
        ckpt = outputs.add(Path(args.out))
        ckpt.parent.mkdir(parents=True, exist_ok=True)
        loss_csv = outputs.add(ckpt.with_suffix(".loss.csv"))
    else:
        out = _out_dir(args, outputs)
        ckpt, loss_csv = outputs.add(out / "model.nvf"), outputs.add(out / "loss.csv")
    model = build_model(cfg.model_kind, cfg.model_config(), scenes[0].cam, cfg.seed)
    kw = {}
    if model.kind == "nvf":
        kw = {"params": cfg.voting_params(), "spec": cfg.train_sample_spec()}
    elif model.kind == "dense2d":
        kw = {"params": cfg.voting_params()}
    curve = train(model, scenes, cfg.train_config(), **kw)
    save_checkpoint(ckpt, model, {"run_config": cfg.to_text()})
    keys = list(curve[0].keys()) if curve else ["step", "total"]
    with open(loss_csv, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["step"] + [k for k in keys if k != "step"],
                           lineterminator="\n")
        w.writeheader()
        for row in curve:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return 0


def _predict_all(cfg, model, scenes):
    from .inference import predict

    return [predict(model, sc, cfg.voting_params(), cfg.step) for sc in scenes]


def cmd_infer(cfg: RunConfig, args, outputs):
    from .evaluation import evaluate_predictions, write_scene_csv
    from .geometry.meshio import write_points
    from .scenes.io import joints_to_json, write_json

    model = _load_model(cfg, args.ckpt)
    scenes, names = _load_scenes(args.scenes or cfg.scenes)
    out = _out_dir(args, outputs)
    preds = _predict_all(cfg, model, scenes)
    for name, sc, pr in zip(names, scenes, preds):
        d = out / name
        d.mkdir(exist_ok=True)
        write_json(d / "joints.json", joints_to_json(pr.joints, valid=pr.valid))
        if args.dump_sdf and model.kind == "nvf":
            from .inference import predict_nvf

            root = sc.joints[0] if model.cfg.mode == "root_relative" else None
            full = predict_nvf(model, sc.image_float, sc.hand_scale, cfg.voting_params(), cfg.step,
                               root, keep_field=True)
            write_points(d / "grid_points.bin", full.points)
            np.asarray(full.field.s, dtype="<f4").tofile(d / "grid_sdf.f32")
    write_scene_csv(out / "metrics.csv", evaluate_predictions(preds, scenes), names)
    return 0


def cmd_eval(cfg: RunConfig, args, outputs):
    from .evaluation import evaluate_predictions, write_scene_csv

    model = _load_model(cfg, args.ckpt)
    scenes, names = _load_scenes(args.scenes or cfg.scenes)
    if args.out and args.out.endswith(".csv"):
        path = outputs.add(Path(args.out))
        path.parent.mkdir(parents=True, exist_ok=True)
    else:
        path = outputs.add(_out_dir(args, outputs) / "metrics.csv")
    write_scene_csv(path, evaluate_predictions(_predict_all(cfg, model, scenes), scenes), names)
    return 0


def parse_sweep(text: str) -> dict:
    sweep = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        name, vals = part.split("=", 1)
        sweep[name.strip()] = [float(v) if name.strip() != "K" else int(v)
                               for v in vals.split(",") if v.strip()]
    return sweep


def cmd_ablate(cfg: RunConfig, args, outputs):
    from .evaluation import run_ablation, write_ablation_csv

    model = _load_model(cfg, args.ckpt)
    if model.kind != "nvf":
        raise ValueError("ablation sweeps need an nvf checkpoint")
    scenes, _ = _load_scenes(args.scenes or cfg.scenes)
    if args.out and args.out.endswith(".csv"):
        path = outputs.add(Path(args.out))
        path.parent.mkdir(parents=True, exist_ok=True)
    else:
        path = outputs.add(_out_dir(args, outputs) / "ablation.csv")
    rows = run_ablation(model, scenes, parse_sweep(args.sweep), cfg.voting_params(), cfg.step)
    write_ablation_csv(path, rows)
    return 0


def cmd_render(cfg: RunConfig, args, outputs):
    from .geometry.meshio import write_obj, write_ply
    from .inference import predict_nvf, predicted_sdf_grid, weight_colors
    from .scenes.io import read_scene, scene_dirs
    from .surface import marching_cubes

    model = _load_model(cfg, args.ckpt)
    if model.kind != "nvf":
        raise ValueError("render needs an nvf checkpoint")
    dirs = scene_dirs(args.scenes or cfg.scenes)
    if not 0 <= args.scene < len(dirs):
        raise IndexError(f"scene {args.scene} out of range (0..{len(dirs) - 1})")
    sc = read_scene(dirs[args.scene])
    out = _out_dir(args, outputs)
    root = sc.joints[0] if model.cfg.mode == "root_relative" else None
    pred = predict_nvf(model, sc.image_float, sc.hand_scale, cfg.voting_params(), cfg.step, root,
                       keep_field=True)
    center = np.mean(pred.joints, axis=0)
    grid = predicted_sdf_grid(model, sc.image_float, center, args.extent, args.pitch,
                              sc.hand_scale, root)
    write_obj(outputs.add(out / "surface.obj"), marching_cubes(grid))
    near = np.abs(pred.field.s) < cfg.delta
    pts = pred.points[near]
    for t in range(model.cfg.n_joints):
        path = outputs.add(out / f"votes_joint{t:02d}.ply")
        write_ply(path, pts, colors=weight_colors(pred.field.w[near, t]))
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "infer": cmd_infer, "eval": cmd_eval,
            "ablate": cmd_ablate, "render": cmd_render}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value run configuration")
    common.add_argument("--seed", type=int, help="overrides config key seed")
    common.add_argument("--mode", choices=("camera_space", "root_relative"))
    common.add_argument("--out", help="output directory (or file for train/eval/ablate)")
    common.add_argument("--threads", type=int, default=0, help="cap on worker threads")
    common.add_argument("--deterministic", action="store_true",
                        help="sequential reductions, bit-reproducible outputs")
    epilog = "configuration keys (default, origin):\n" + describe() + \
        "\n\nenvironment: NVF_LOG=error|info|debug"
    p = argparse.ArgumentParser(prog="nvf", description="Neural voting field hand pose toolkit",
                                epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, epilog=epilog,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    g = add("gen", "generate a synthetic dataset")
    g.add_argument("--n", type=int, help="number of scenes (config key n_scenes)")
    g.add_argument("--split", choices=("train", "eval"))
    for name, help_ in (("train", "train a model"), ("infer", "predict joints"),
                        ("eval", "metrics per scene"), ("ablate", "inference parameter sweep"),
                        ("render", "mesh and vote-weight clouds for one scene")):
        s = add(name, help_)
        s.add_argument("--scenes", help="dataset directory")
        s.add_argument("--model", choices=("nvf", "baseline=holistic", "baseline=dense2d"))
        if name != "train":
            s.add_argument("--ckpt", required=True, help="checkpoint file")
        if name == "infer":
            s.add_argument("--dump-sdf", action="store_true", help="also write the SDF grid")
        if name == "ablate":
            s.add_argument("--sweep", default=DEFAULT_SWEEP,
                           help="name=v1,v2;name=... over delta, K, fraction, step, r")
        if name == "render":
            s.add_argument("--scene", type=int, default=0, help="scene index")
            s.add_argument("--pitch", type=float, default=4.0, help="mesh grid pitch, mm")
            s.add_argument("--extent", type=float, default=120.0, help="mesh cube half size, mm")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outputs = Outputs()
    try:
        cfg = _setup(args)
        return COMMANDS[args.command](cfg, args, outputs)
    except Exception as e:  # noqa: BLE001 - every failure maps to one error line
        outputs.cleanup()
        msg = " ".join(str(e).split())
        print(f"error command={args.command} type={type(e).__name__} message={msg!r}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
