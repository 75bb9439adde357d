import numpy as np


def knn_ball_select(joint, candidates, K: int, r: float) -> np.ndarray:
    """Indices of the ``K`` nearest candidates to ``joint`` within radius ``r``.

    Fewer than ``K`` indices come back when the ball holds fewer points.
    Ties in distance go to the smaller candidate index. The result is sorted
    by (distance, index).
    """
    if K < 1 or r <= 0:
        raise ValueError("need K >= 1 and r > 0")
    cand = np.asarray(candidates, dtype=np.float64).reshape(-1, 3)
    if len(cand) == 0:
        return np.zeros(0, dtype=np.int64)
    d = np.linalg.norm(cand - np.asarray(joint, dtype=np.float64), axis=1)
    inside = np.flatnonzero(d <= r)
    order = inside[np.argsort(d[inside], kind="stable")]
    return order[:K]


def knn_ball_mask(joints, candidates, K: int, r: float, dist=None) -> np.ndarray:
    """Boolean (N, T) membership of every candidate in each joint's KNN ball."""
    cand = np.asarray(candidates, dtype=np.float64).reshape(-1, 3)
    joints = np.asarray(joints, dtype=np.float64).reshape(-1, 3)
    if dist is None:
        dist = np.linalg.norm(cand[:, None, :] - joints[None, :, :], axis=-1)
    mask = np.zeros(dist.shape, dtype=bool)
    if len(cand) == 0:
        return mask
    for t in range(dist.shape[1]):
        col = dist[:, t]
        inside = np.flatnonzero(col <= r)
        if len(inside) > K:
            inside = inside[np.argsort(col[inside], kind="stable")[:K]]
        mask[inside, t] = True
    return mask
