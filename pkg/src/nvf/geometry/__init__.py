from .camera import (CameraIntrinsics, frustum_bounds, frustum_contains, project,
                     sample_frustum_uniform)
from .mesh import TriMesh
from .meshio import load_mesh, read_points, save_mesh, write_points
from .select import knn_ball_mask, knn_ball_select


def signed_distance(points, mesh: TriMesh):
    return mesh.signed_distance(points)


__all__ = [
    "CameraIntrinsics", "TriMesh", "project", "frustum_contains", "frustum_bounds",
    "sample_frustum_uniform", "signed_distance", "knn_ball_select", "knn_ball_mask",
    "load_mesh", "save_mesh", "read_points", "write_points",
]
