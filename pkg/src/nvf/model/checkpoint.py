"""Binary checkpoints: b"NVF1", uint32 manifest length, JSON manifest, f32 LE payload."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointError
from ..geometry.camera import CameraIntrinsics
from .nvf import ModelConfig

MAGIC = b"NVF1"


def save_checkpoint(path, model, extra: dict | None = None):
    """Write every parameter and buffer of ``model`` as little-endian float32."""
    tensors, blobs, offset = [], [], 0
    for name, t in model.state_dict().items():
        arr = np.ascontiguousarray(t.detach().cpu().numpy(), dtype="<f4")
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "kind": model.kind,
        "config": model.cfg.to_dict(),
        "camera": model.cam.to_dict() if model.cam is not None else None,
        "tensors": tensors,
        "extra": extra or {},
    }
    head = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for b in blobs:
            f.write(b)
    return path


def read_manifest(path):
    """Returns (manifest dict, payload bytes)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes")
    if len(data) < 8:
        raise CheckpointError(f"{path}: truncated header")
    (n,) = struct.unpack("<I", data[4:8])
    try:
        manifest = json.loads(data[8:8 + n])
    except ValueError as e:
        raise CheckpointError(f"{path}: unreadable manifest") from e
    return manifest, data[8 + n:]


def load_state(model, path):
    """Load tensors into an already-built model; shapes must match exactly."""
    manifest, payload = read_manifest(path)
    state = model.state_dict()
    entries = {t["name"]: t for t in manifest["tensors"]}
    if set(entries) != set(state):
        missing = sorted(set(state) - set(entries))
        unexpected = sorted(set(entries) - set(state))
        raise CheckpointError(f"tensor set mismatch: missing={missing} unexpected={unexpected}")
    new = {}
    for name, ref in state.items():
        e = entries[name]
        if tuple(e["shape"]) != tuple(ref.shape):
            raise CheckpointError(f"shape mismatch for {name}: file {tuple(e['shape'])}, "
                                  f"model {tuple(ref.shape)}")
        count = int(np.prod(e["shape"], dtype=np.int64))
        end = e["offset"] + 4 * count
        if end > len(payload):
            raise CheckpointError(f"truncated payload at {name}")
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=e["offset"])
        new[name] = torch.as_tensor(arr.reshape(e["shape"]).copy(), dtype=ref.dtype)
    model.load_state_dict(new)
    return manifest


def load_checkpoint(path, cfg: ModelConfig | None = None):
    """Rebuild the model recorded in ``path``.

    When ``cfg`` is given the file must match that architecture.
    """
    from .train import build_model

    manifest, _ = read_manifest(path)
    cfg = cfg or ModelConfig.from_dict(manifest["config"])
    cam = manifest.get("camera")
    cam = CameraIntrinsics.from_dict(cam) if cam else None
    model = build_model(manifest["kind"], cfg, cam)
    load_state(model, path)
    model.eval()
    return model, manifest
