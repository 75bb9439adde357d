"""ASCII OBJ and binary little-endian PLY readers/writers (units: mm)."""
from __future__ import annotations

import os

import numpy as np

from ..errors import IllFormedMesh
from .mesh import TriMesh


def write_obj(path, mesh: TriMesh) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for i, j, k in mesh.faces + 1:
            fh.write(f"f {i} {j} {k}\n")


def read_obj(path) -> TriMesh:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    verts = [ln[2:] for ln in lines if ln.startswith("v ")]
    faces = [ln[2:].split() for ln in lines if ln.startswith("f ")]
    if any(len(f) != 3 for f in faces):
        raise IllFormedMesh("only triangular faces are supported")
    # "f v/vt/vn" keeps only the position index
    flat = [tok.split("/", 1)[0] for f in faces for tok in f]
    v = np.array(" ".join(verts).split(), dtype=np.float64).reshape(-1, 3)
    f = np.array(flat, dtype=np.int64).reshape(-1, 3) - 1
    return TriMesh(v, f)


def write_ply(path, vertices, faces=None, colors=None) -> None:
    """Binary little-endian PLY. ``colors`` is an optional (V, 3) uint8 array."""
    vertices = np.asarray(vertices, dtype="<f4").reshape(-1, 3)
    faces = np.zeros((0, 3), np.int32) if faces is None else np.asarray(faces).reshape(-1, 3)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(vertices)}",
              "property float x", "property float y", "property float z"]
    vdtype = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
        vdtype += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    header += [f"element face {len(faces)}", "property list uchar int vertex_indices", "end_header"]
    vrec = np.empty(len(vertices), dtype=vdtype)
    vrec["x"], vrec["y"], vrec["z"] = vertices.T
    if colors is not None:
        colors = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
        vrec["red"], vrec["green"], vrec["blue"] = colors.T
    frec = np.empty(len(faces), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
    frec["n"] = 3
    frec["idx"] = faces
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(vrec.tobytes())
        fh.write(frec.tobytes())


_PLY_TYPES = {"char": "i1", "uchar": "u1", "short": "<i2", "ushort": "<u2", "int": "<i4",
              "uint": "<u4", "float": "<f4", "double": "<f8", "int8": "i1", "uint8": "u1",
              "int32": "<i4", "uint32": "<u4", "float32": "<f4", "float64": "<f8"}


def read_ply(path):
    """Read a binary little-endian PLY; returns (vertices, faces, colors or None)."""
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise IllFormedMesh(f"{path}: not a PLY file")
        elements = []
        while True:
            line = fh.readline()
            if not line:
                raise IllFormedMesh(f"{path}: truncated header")
            tok = line.decode("ascii").split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "binary_little_endian":
                raise IllFormedMesh(f"{path}: only binary_little_endian PLY is supported")
            elif tok[0] == "element":
                elements.append((tok[1], int(tok[2]), []))
            elif tok[0] == "property":
                elements[-1][2].append(tok[1:])
            elif tok[0] == "end_header":
                break
        data = {}
        for name, n, props in elements:
            if any(p[0] == "list" for p in props):
                cnt_t, idx_t = _PLY_TYPES[props[0][1]], _PLY_TYPES[props[0][2]]
                rows = []
                for _ in range(n):
                    k = int(np.frombuffer(fh.read(np.dtype(cnt_t).itemsize), cnt_t)[0])
                    rows.append(np.frombuffer(fh.read(k * np.dtype(idx_t).itemsize), idx_t))
                data[name] = rows
            else:
                dt = np.dtype([(p[1], _PLY_TYPES[p[0]]) for p in props])
                data[name] = np.frombuffer(fh.read(n * dt.itemsize), dt)
    v = data["vertex"]
    verts = np.stack([v["x"], v["y"], v["z"]], axis=1).astype(np.float64)
    colors = None
    if v.dtype.names and "red" in v.dtype.names:
        colors = np.stack([v["red"], v["green"], v["blue"]], axis=1)
    faces = np.array([r for r in data.get("face", [])], dtype=np.int64).reshape(-1, 3)
    return verts, faces, colors


def save_mesh(path, mesh: TriMesh) -> None:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".obj":
        write_obj(path, mesh)
    elif ext == ".ply":
        write_ply(path, mesh.vertices, mesh.faces)
    else:
        raise ValueError(f"unsupported mesh extension {ext!r}")


def load_mesh(path) -> TriMesh:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".obj":
        return read_obj(path)
    if ext == ".ply":
        v, f, _ = read_ply(path)
        return TriMesh(v, f)
    raise ValueError(f"unsupported mesh extension {ext!r}")


def write_points(path, points) -> None:
    """Point dump: little-endian uint64 count followed by f32 xyz triples."""
    pts = np.asarray(points, dtype="<f4").reshape(-1, 3)
    with open(path, "wb") as fh:
        fh.write(np.uint64(len(pts)).astype("<u8").tobytes())
        fh.write(pts.tobytes())


def read_points(path) -> np.ndarray:
    with open(path, "rb") as fh:
        n = int(np.frombuffer(fh.read(8), "<u8")[0])
        return np.frombuffer(fh.read(12 * n), "<f4").reshape(n, 3).astype(np.float64)
