"""Saliency evaluation metrics: MAE, F-measure curve, S-measure, mean E-measure.

Conventions, fixed here once and mirrored by the naive oracle implementations:

* Soft ground truth is binarized at 0.5 on entry.
* Threshold grid: tau_k = k / 256 for k = 0..255. All 256 thresholds lie
  strictly below 1, so a binary map binarizes back to itself at every
  threshold and identical (pred, gt) pairs score their ideal values.
* Binarization of predictions is strict: pred > tau.
* eps = 1e-8 regularizes every ratio; it enters numerator and denominator
  symmetrically in the similarity ratios, so exact agreement scores
  exactly 1 regardless of foreground size.
* Group values average per-image values (for the F curve: per-threshold
  average of per-image curves).
* Degenerate ground truth: all-background gt scores S = 1 - mean(pred) and
  E_tau = 1 - mean(binarized pred); all-foreground gt scores mean(pred) and
  mean(binarized pred).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .types import MapGroup

__all__ = [
    "THRESHOLDS",
    "MetricReport",
    "ImageMetrics",
    "mae",
    "f_measure_curve",
    "s_measure",
    "e_measure_mean",
    "evaluate",
    "write_metrics_csv",
]

THRESHOLDS = np.arange(256, dtype=np.float64) / 256.0
EPS = 1e-8
DEFAULT_BETA_SQ = 0.3
DEFAULT_S_ALPHA = 0.5


def _pair(pred: MapGroup, gt: MapGroup) -> tuple[np.ndarray, np.ndarray]:
    if pred.maps.shape != gt.maps.shape:
        raise ShapeError(
            f"prediction shape {pred.maps.shape} does not match ground truth {gt.maps.shape}"
        )
    return pred.maps.astype(np.float64), gt.maps.astype(np.float64) >= 0.5


def mae(pred: MapGroup, gt: MapGroup) -> float:
    """Mean absolute error over all pixels of all images."""
    p, g = _pair(pred, gt)
    per_image = [float(np.abs(p[n] - g[n].astype(np.float64)).mean()) for n in range(p.shape[0])]
    return float(np.mean(per_image))


def _image_f_curve(p: np.ndarray, g: np.ndarray, beta_sq: float) -> tuple[np.ndarray, bool]:
    """Per-threshold F scores for one image; flags zero-foreground gt."""
    fg = g.ravel()
    n_fg = int(fg.sum())
    if n_fg == 0:
        return np.zeros(256, dtype=np.float64), True
    binpred = p.ravel()[None, :] > THRESHOLDS[:, None]
    tp = (binpred & fg[None, :]).sum(axis=1).astype(np.float64)
    fp = (binpred & ~fg[None, :]).sum(axis=1).astype(np.float64)
    predicted = tp + fp
    precision = np.divide(tp, predicted, out=np.zeros(256), where=predicted > 0)
    recall = tp / n_fg
    denom = beta_sq * precision + recall
    f = np.divide(
        (1.0 + beta_sq) * precision * recall, denom, out=np.zeros(256), where=denom > 0
    )
    return f, False


def f_measure_curve(pred: MapGroup, gt: MapGroup, beta_sq: float = DEFAULT_BETA_SQ) -> np.ndarray:
    """Group F-measure curve: per-image F at each threshold, averaged.

    Images with zero-foreground ground truth contribute F = 0 at every
    threshold.
    """
    p, g = _pair(pred, gt)
    curves = np.stack([_image_f_curve(p[n], g[n], beta_sq)[0] for n in range(p.shape[0])])
    return curves.mean(axis=0)


def _object_similarity(x: np.ndarray) -> float:
    m = float(x.mean())
    s = float(x.std())
    return 2.0 * m / (m * m + 1.0 + 2.0 * s + EPS)


def _block_similarity(x: np.ndarray, y: np.ndarray) -> float:
    n = x.size
    xm = float(x.mean())
    ym = float(y.mean())
    if n > 1:
        sx = float(((x - xm) ** 2).sum()) / (n - 1)
        sy = float(((y - ym) ** 2).sum()) / (n - 1)
        sxy = float(((x - xm) * (y - ym)).sum()) / (n - 1)
    else:
        sx = sy = sxy = 0.0
    return (4.0 * xm * ym * sxy + EPS) / ((xm * xm + ym * ym) * (sx + sy) + EPS)


def _image_s(p: np.ndarray, g: np.ndarray, alpha: float) -> float:
    if not g.any():
        return min(1.0, max(0.0, 1.0 - float(p.mean())))
    if g.all():
        return min(1.0, max(0.0, float(p.mean())))
    mu = float(g.mean())
    s_object = mu * _object_similarity(p[g]) + (1.0 - mu) * _object_similarity((1.0 - p)[~g])

    # Region term: split both maps at the foreground centroid (rounded
    # half-up); the first block includes the centroid row/column.
    ys, xs = np.nonzero(g)
    cy = int(np.floor(ys.mean() + 0.5))
    cx = int(np.floor(xs.mean() + 0.5))
    h, w = g.shape
    g64 = g.astype(np.float64)
    s_region = 0.0
    for r0, r1 in ((0, cy + 1), (cy + 1, h)):
        for c0, c1 in ((0, cx + 1), (cx + 1, w)):
            n_block = (r1 - r0) * (c1 - c0)
            if n_block <= 0:
                continue
            weight = n_block / (h * w)
            s_region += weight * _block_similarity(p[r0:r1, c0:c1], g64[r0:r1, c0:c1])
    s = alpha * s_object + (1.0 - alpha) * s_region
    return min(1.0, max(0.0, s))


def s_measure(pred: MapGroup, gt: MapGroup, alpha: float = DEFAULT_S_ALPHA) -> float:
    """Structure similarity: object term + centroid-split region term."""
    p, g = _pair(pred, gt)
    return float(np.mean([_image_s(p[n], g[n], alpha) for n in range(p.shape[0])]))


def _alignment(phi_g: np.ndarray, phi_p: np.ndarray) -> np.ndarray:
    xi = (2.0 * phi_g * phi_p + EPS) / (phi_g * phi_g + phi_p * phi_p + EPS)
    return (xi + 1.0) ** 2 / 4.0


def _image_e(p: np.ndarray, g: np.ndarray) -> float:
    hw = g.size
    binpred = p.ravel()[None, :] > THRESHOLDS[:, None]
    fg_bin = binpred.sum(axis=1).astype(np.float64)
    if not g.any():
        e_tau = 1.0 - fg_bin / hw
        return float(e_tau.mean())
    if g.all():
        return float((fg_bin / hw).mean())
    # Mixed gt: the alignment map takes one of four values per threshold,
    # fixed by the (gt, binarized pred) pixel class, so per-class counts
    # suffice.
    fg = g.ravel()
    mu_g = float(fg.sum()) / hw
    tp = (binpred & fg[None, :]).sum(axis=1).astype(np.float64)
    fp = (binpred & ~fg[None, :]).sum(axis=1).astype(np.float64)
    fn = float(fg.sum()) - tp
    tn = hw - tp - fp - fn
    mu_p = (tp + fp) / hw
    phi_g_fg, phi_g_bg = 1.0 - mu_g, -mu_g
    phi_p_fg, phi_p_bg = 1.0 - mu_p, -mu_p
    e_tau = (
        tp * _alignment(np.full(256, phi_g_fg), phi_p_fg)
        + fn * _alignment(np.full(256, phi_g_fg), phi_p_bg)
        + fp * _alignment(np.full(256, phi_g_bg), phi_p_fg)
        + tn * _alignment(np.full(256, phi_g_bg), phi_p_bg)
    ) / hw
    return float(e_tau.mean())


def e_measure_mean(pred: MapGroup, gt: MapGroup) -> float:
    """Enhanced-alignment measure averaged over thresholds and images."""
    p, g = _pair(pred, gt)
    return float(np.mean([_image_e(p[n], g[n]) for n in range(p.shape[0])]))


@dataclass(frozen=True)
class ImageMetrics:
    """Metrics of a single prediction/ground-truth pair."""

    image_id: str
    mae: float
    f_max: float
    f_avg: float
    s_measure: float
    e_mean: float


@dataclass(frozen=True)
class MetricReport:
    """Group-level metric values plus the per-image breakdown."""

    mae: float
    f_max: float
    f_avg: float
    s_measure: float
    e_mean: float
    per_image: tuple[ImageMetrics, ...]
    zero_foreground: tuple[int, ...]


def evaluate(
    pred: MapGroup,
    gt: MapGroup,
    image_ids: list[str] | None = None,
    beta_sq: float = DEFAULT_BETA_SQ,
    s_alpha: float = DEFAULT_S_ALPHA,
) -> MetricReport:
    """Compute the full metric suite for a group.

    Group F values come from the per-threshold average of per-image curves;
    per-image rows carry each image's own curve extrema.
    """
    p, g = _pair(pred, gt)
    n = p.shape[0]
    if image_ids is None:
        image_ids = [f"{i:03d}" for i in range(n)]
    if len(image_ids) != n:
        raise ShapeError(f"got {len(image_ids)} image ids for {n} images")

    curves = []
    flagged = []
    rows = []
    for i in range(n):
        curve, flag = _image_f_curve(p[i], g[i], beta_sq)
        curves.append(curve)
        if flag:
            flagged.append(i)
        rows.append(
            ImageMetrics(
                image_id=image_ids[i],
                mae=float(np.abs(p[i] - g[i].astype(np.float64)).mean()),
                f_max=float(curve.max()),
                f_avg=float(curve.mean()),
                s_measure=_image_s(p[i], g[i], s_alpha),
                e_mean=_image_e(p[i], g[i]),
            )
        )
    group_curve = np.stack(curves).mean(axis=0)
    return MetricReport(
        mae=float(np.mean([r.mae for r in rows])),
        f_max=float(group_curve.max()),
        f_avg=float(group_curve.mean()),
        s_measure=float(np.mean([r.s_measure for r in rows])),
        e_mean=float(np.mean([r.e_mean for r in rows])),
        per_image=tuple(rows),
        zero_foreground=tuple(flagged),
    )


def write_metrics_csv(path, group: str, report: MetricReport) -> None:
    """Write per-image rows (lexicographic by image id) plus the aggregate.

    Columns: group,image,mae,fmax,favg,smeasure,emean. The aggregate row
    uses the image id ``__group__`` and comes last.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "image", "mae", "fmax", "favg", "smeasure", "emean"])
        for row in sorted(report.per_image, key=lambda r: r.image_id):
            writer.writerow(
                [group, row.image_id]
                + [f"{v:.9f}" for v in (row.mae, row.f_max, row.f_avg, row.s_measure, row.e_mean)]
            )
        writer.writerow(
            [group, "__group__"]
            + [
                f"{v:.9f}"
                for v in (report.mae, report.f_max, report.f_avg, report.s_measure, report.e_mean)
            ]
        )
