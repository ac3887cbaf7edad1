"""Computational evaluation: saliency shift, mask similarity, and fidelity.

Fidelity is reported as mean absolute pixel difference split over the full
frame, background, and foreground.  Rendered reports multiply every value
by 100; an undefined relative increase (zero initial saliency) renders as
null/"undefined".
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, fields

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, MaskError, ShapeError
from .imaging import MaskLayer, RasterImage
from .saliency import SaliencyMap, mask_at_resolution, mean_mask_saliency

_EPS = float(np.finfo(np.float64).eps)


@dataclass
class MetricsReport:
    saliency_increase_absolute: float
    saliency_increase_relative: float | None
    cc: float
    wfb: float
    fidelity_full: float
    fidelity_bg: float
    fidelity_fg: float

    def to_row(self) -> dict:
        """Rendered values (x100); None stays None for the emitters."""
        row = {}
        for f in fields(self):
            value = getattr(self, f.name)
            row[f.name] = None if value is None else value * 100.0
        return row


def saliency_increase(
    before: SaliencyMap, after: SaliencyMap, mask: MaskLayer
) -> tuple[float, float | None]:
    """(absolute, relative) change of mean saliency inside the mask.

    Relative is None when the initial mean is zero (the blow-up case).
    """
    if (before.height, before.width) != (after.height, after.width):
        raise ShapeError("saliency maps must share a resolution")
    initial = mean_mask_saliency(before, mask)
    absolute = mean_mask_saliency(after, mask) - initial
    relative = None if initial == 0.0 else absolute / initial
    return absolute, relative


def pearson_cc(saliency: SaliencyMap, mask: MaskLayer) -> float:
    """Pearson correlation between the map and the binarized mask."""
    m = mask_at_resolution(mask, saliency.height, saliency.width).astype(np.float64)
    s = saliency.values.ravel()
    m = m.ravel()
    if s.std() == 0.0 or m.std() == 0.0:
        raise DegenerateInputError("correlation requires nonzero variance in both inputs")
    sz = (s - s.mean()) / s.std()
    mz = (m - m.mean()) / m.std()
    return float(np.mean(sz * mz))


def _gaussian_kernel(size: int = 7, sigma: float = 5.0) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    k = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    return k / k.sum()


def weighted_fbeta(saliency: SaliencyMap, mask: MaskLayer) -> float:
    """Weighted F-beta between the map and the mask (beta^2 = 1).

    Errors |S - m| are corrected for foreground dependency through a 7x7
    Gaussian (sigma 5) and weighted by a distance-decayed importance on the
    background, following the standard weighted F-measure construction.
    S is min-max normalized to [0, 1] first.
    """
    gt = mask_at_resolution(mask, saliency.height, saliency.width)
    if not gt.any():
        raise MaskError("binarized mask is empty at saliency resolution")
    s = saliency.values
    lo, hi = s.min(), s.max()
    s = np.zeros_like(s) if hi == lo else (s - lo) / (hi - lo)

    gt_f = gt.astype(np.float64)
    err = np.abs(s - gt_f)

    dist, (iy, ix) = ndimage.distance_transform_edt(~gt, return_indices=True)
    err_t = err.copy()
    bg = ~gt
    err_t[bg] = err[iy[bg], ix[bg]]
    err_blur = ndimage.correlate(err_t, _gaussian_kernel(), mode="constant", cval=0.0)

    min_err = err.copy()
    swap = gt & (err_blur < err)
    min_err[swap] = err_blur[swap]

    importance = np.ones_like(err)
    importance[bg] = 2.0 - np.exp(np.log(0.5) / 5.0 * dist[bg])
    weighted_err = min_err * importance

    fg_count = float(gt.sum())
    tp = fg_count - weighted_err[gt].sum()
    fp = weighted_err[bg].sum()
    recall = 1.0 - weighted_err[gt].mean()
    precision = tp / (_EPS + tp + fp)
    return float(2.0 * recall * precision / (_EPS + recall + precision))


def fidelity_splits(
    original: RasterImage, edited: RasterImage, mask: MaskLayer
) -> tuple[float, float, float]:
    """Mean absolute pixel difference over (full, background, foreground).

    An empty split (mask all-foreground or all-background) contributes 0.
    """
    if original.data.shape != edited.data.shape:
        raise ShapeError("original and edited images must share dimensions")
    if mask.weights.shape != original.data.shape[:2]:
        raise ShapeError("mask dimensions must match the images")
    diff = np.abs(original.data - edited.data)
    fg = mask.binarized()
    full = float(diff.mean())
    bg_diff = diff[~fg]
    fg_diff = diff[fg]
    bg_mean = float(bg_diff.mean()) if bg_diff.size else 0.0
    fg_mean = float(fg_diff.mean()) if fg_diff.size else 0.0
    return full, bg_mean, fg_mean


def compute_report(
    original: RasterImage,
    edited: RasterImage,
    mask: MaskLayer,
    saliency_before: SaliencyMap,
    saliency_after: SaliencyMap,
) -> MetricsReport:
    absolute, relative = saliency_increase(saliency_before, saliency_after, mask)
    full, bg, fg = fidelity_splits(original, edited, mask)
    return MetricsReport(
        saliency_increase_absolute=absolute,
        saliency_increase_relative=relative,
        cc=pearson_cc(saliency_after, mask),
        wfb=weighted_fbeta(saliency_after, mask),
        fidelity_full=full,
        fidelity_bg=bg,
        fidelity_fg=fg,
    )


def reports_to_csv(reports: list[MetricsReport]) -> str:
    names = [f.name for f in fields(MetricsReport)]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        row = report.to_row()
        writer.writerow(
            {k: ("undefined" if v is None else f"{v:.6f}") for k, v in row.items()}
        )
    return buf.getvalue()


def reports_to_json(reports: list[MetricsReport]) -> str:
    return json.dumps([r.to_row() for r in reports], indent=2)
