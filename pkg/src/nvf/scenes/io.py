"""On-disk dataset layout: ``scene_%05d/{image.ppm, mask.pbm, mesh.obj, joints.json,
camera.json, meta.json}``."""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..geometry.camera import CameraIntrinsics
from ..geometry.meshio import read_obj, write_obj
from .generate import SceneRecord


def write_ppm(path, image: np.ndarray) -> None:
    img = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def _read_header(fh, n_fields):
    fields = []
    while len(fields) < n_fields:
        line = fh.readline()
        if not line:
            raise ValueError("truncated netpbm header")
        line = line.split(b"#")[0]
        fields.extend(line.split())
    return fields


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, w, h, maxval = _read_header(fh, 4)
        if magic != b"P6" or int(maxval) != 255:
            raise ValueError(f"{path}: expected 8-bit binary PPM")
        w, h = int(w), int(h)
        return np.frombuffer(fh.read(w * h * 3), np.uint8).reshape(h, w, 3).copy()


def write_pbm(path, mask: np.ndarray) -> None:
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(m, axis=1).tobytes())


def read_pbm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, w, h = _read_header(fh, 3)
        if magic != b"P4":
            raise ValueError(f"{path}: expected binary PBM")
        w, h = int(w), int(h)
        row = (w + 7) // 8
        bits = np.frombuffer(fh.read(row * h), np.uint8).reshape(h, row)
        return np.unpackbits(bits, axis=1)[:, :w].astype(bool)


def joints_to_json(joints, space: str = "camera", valid=None) -> dict:
    out = {"unit": "mm", "space": space,
           "joints": [[float(x) for x in j] for j in np.asarray(joints)]}
    if valid is not None:
        out["valid"] = [bool(v) for v in valid]
    return out


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_joints(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("unit") != "mm":
        raise ValueError("joint files must be in millimetres")
    return np.asarray(d["joints"], dtype=np.float64)


def write_scene(directory, rec: SceneRecord) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_ppm(d / "image.ppm", rec.image)
    write_pbm(d / "mask.pbm", rec.mask)
    write_obj(d / "mesh.obj", rec.mesh)
    write_json(d / "joints.json", joints_to_json(rec.joints))
    write_json(d / "camera.json", rec.cam.to_dict())
    write_json(d / "meta.json", dict(rec.meta, hand_scale=float(rec.hand_scale)))


def read_scene(directory) -> SceneRecord:
    d = Path(directory)
    with open(d / "camera.json", encoding="utf-8") as fh:
        cam = CameraIntrinsics.from_dict(json.load(fh))
    with open(d / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    return SceneRecord(read_ppm(d / "image.ppm"), read_pbm(d / "mask.pbm"), read_obj(d / "mesh.obj"),
                       read_joints(d / "joints.json"), cam, float(meta["hand_scale"]), meta)


def scene_dirs(root) -> list:
    root = Path(root)
    return sorted(p for p in root.iterdir() if p.is_dir() and p.name.startswith("scene_"))


def write_dataset(root, records, start: int = 0) -> None:
    os.makedirs(root, exist_ok=True)
    for i, rec in enumerate(records):
        write_scene(Path(root) / f"scene_{start + i:05d}", rec)


def read_dataset(root) -> list:
    return [read_scene(p) for p in scene_dirs(root)]
