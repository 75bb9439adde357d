"""Pose metrics, per-scene reports and ablation sweeps."""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAlignment, EmptyBatch, ShapeError
from .pose_field import VotingParams

ROOT = 0
AUC_MAX_MM = 50.0
AUC_STEPS = 100

ABLATION_COLUMNS = ("param_name", "param_value", "cs_mje", "cs_auc", "te", "de", "mje", "rs_mje",
                    "pts_per_sec", "invalid_joint_count")
SCENE_COLUMNS = ("scene", "cs_mje", "cs_auc", "te", "de", "mje", "rs_mje", "invalid_joint_count")


def _pair(pred, gt):
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 2 or p.shape[1] != 3:
        raise ShapeError(f"joint sets differ in shape: {p.shape} vs {g.shape}")
    return p, g


def joint_errors(pred, gt) -> np.ndarray:
    p, g = _pair(pred, gt)
    return np.linalg.norm(p - g, axis=1)


def cs_mje(pred, gt) -> float:
    """Mean Euclidean joint error in camera space, no alignment."""
    return float(joint_errors(pred, gt).mean())


def pck_curve(errors, max_mm=AUC_MAX_MM, steps=AUC_STEPS):
    e = np.asarray(errors, dtype=np.float64).ravel()
    if e.size == 0:
        raise EmptyBatch("no joint errors")
    if (e < 0).any():
        raise ValueError("errors must be non-negative")
    tau = np.linspace(0.0, max_mm, steps)
    pck = (e[None, :] <= tau[:, None]).mean(axis=1)
    return tau, pck


def auc_pck(errors, max_mm=AUC_MAX_MM, steps=AUC_STEPS) -> float:
    """Trapezoidal area under PCK over thresholds normalised to [0, 1]."""
    tau, pck = pck_curve(errors, max_mm, steps)
    x = tau / max_mm
    return float(np.sum(0.5 * (pck[1:] + pck[:-1]) * np.diff(x)))


def te_de(pred, gt):
    """Centroid translation error and its depth component."""
    p, g = _pair(pred, gt)
    diff = p.mean(axis=0) - g.mean(axis=0)
    return float(np.linalg.norm(diff)), float(abs(diff[2]))


def alignment_scale(pred, gt, root=ROOT) -> float:
    """Least-squares scale about the root: sum <p, g> / sum |p|^2 on root-centred sets."""
    p, g = _pair(pred, gt)
    pt = p - p[root]
    gt_ = g - g[root]
    den = float(np.sum(pt * pt))
    if den == 0.0:
        raise DegenerateAlignment("prediction collapses onto its root")
    return float(np.sum(pt * gt_)) / den


def aligned_mje(pred, gt, root=ROOT):
    """Returns (mje after root translation and scale, rs_mje after root translation)."""
    p, g = _pair(pred, gt)
    rs = p - p[root] + g[root]
    s = alignment_scale(p, g, root)
    al = s * (p - p[root]) + g[root]
    return cs_mje(al, g), cs_mje(rs, g)


@dataclass
class MetricReport:
    cs_mje: float
    cs_auc: float
    te: float
    de: float
    mje: float
    rs_mje: float
    n_samples: int
    invalid_joint_count: int = 0
    per_sample: dict = field(default_factory=dict)

    def row(self):
        return {k: getattr(self, k) for k in ("cs_mje", "cs_auc", "te", "de", "mje", "rs_mje",
                                              "invalid_joint_count")}


def sample_metrics(pred, gt) -> dict:
    err = joint_errors(pred, gt)
    te, de = te_de(pred, gt)
    try:
        mje, rs = aligned_mje(pred, gt)
    except DegenerateAlignment:
        mje, rs = float("nan"), aligned_rs(pred, gt)
    return {"cs_mje": float(err.mean()), "cs_auc": auc_pck(err), "te": te, "de": de,
            "mje": mje, "rs_mje": rs, "errors": err}


def aligned_rs(pred, gt, root=ROOT) -> float:
    p, g = _pair(pred, gt)
    return cs_mje(p - p[root] + g[root], g)


def evaluate(preds, gts, invalid=None) -> MetricReport:
    """Aggregate metrics over samples.

    Means are taken over samples; the AUC pools every joint error.
    """
    if len(preds) == 0:
        raise EmptyBatch("no samples")
    if len(preds) != len(gts):
        raise ShapeError("prediction and ground-truth counts differ")
    rows = [sample_metrics(p, g) for p, g in zip(preds, gts)]
    keys = ("cs_mje", "cs_auc", "te", "de", "mje", "rs_mje")
    per = {k: np.array([r[k] for r in rows]) for k in keys}
    errs = np.concatenate([r["errors"] for r in rows])
    inv = np.zeros(len(rows), dtype=int) if invalid is None else np.asarray(invalid, dtype=int)
    per["invalid_joint_count"] = inv
    return MetricReport(
        cs_mje=float(per["cs_mje"].mean()), cs_auc=auc_pck(errs), te=float(per["te"].mean()),
        de=float(per["de"].mean()), mje=float(np.nanmean(per["mje"])),
        rs_mje=float(per["rs_mje"].mean()), n_samples=len(rows),
        invalid_joint_count=int(inv.sum()), per_sample=per)


def evaluate_predictions(predictions, scenes) -> MetricReport:
    return evaluate([p.joints for p in predictions], [s.joints for s in scenes],
                    [p.n_invalid for p in predictions])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_scene_csv(path, report: MetricReport, names=None):
    """One row per scene plus a final ``mean`` summary row."""
    n = report.n_samples
    names = names or [str(i) for i in range(n)]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SCENE_COLUMNS)
        for i in range(n):
            w.writerow([names[i]] + [_fmt(report.per_sample[k][i]) for k in SCENE_COLUMNS[1:]])
        summary = report.row()
        w.writerow(["mean"] + [_fmt(summary[k]) for k in SCENE_COLUMNS[1:]])


def run_ablation(model, scenes, sweep: dict, params: VotingParams = VotingParams(),
                 step: float = 16.0):
    """One row per (parameter, value) in ``sweep``; other settings stay at the base values.

    ``sweep`` maps any of ``delta``, ``K``, ``fraction``, ``step`` to a list of values.
    Joints without voters are counted, never raised.
    """
    from .inference import predict

    rows = []
    for name, values in sweep.items():
        if name not in ("delta", "K", "fraction", "step", "r"):
            raise ValueError(f"cannot sweep {name!r}")
        for v in values:
            p, st = params, step
            if name == "step":
                st = float(v)
            else:
                p = dataclasses.replace(params, **{name: type(getattr(params, name))(v)})
            preds = [predict(model, sc, p, st) for sc in scenes]
            rep = evaluate_predictions(preds, scenes)
            n_pts = sum(pr.n_points for pr in preds)
            secs = sum(pr.seconds for pr in preds)
            rows.append(dict(param_name=name, param_value=v, **rep.row(),
                             pts_per_sec=n_pts / secs if secs > 0 else float("inf")))
    return rows


def write_ablation_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ABLATION_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in ABLATION_COLUMNS])


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
