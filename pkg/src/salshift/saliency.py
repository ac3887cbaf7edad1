"""Attention proxy: a deterministic center-surround saliency model.

The map is computed on a downscaled copy of the image from luminance,
red-green, and blue-yellow opponent channels.  Each channel is decomposed
into a Gaussian pyramid; absolute differences between upsampled center and
surround levels are accumulated, and the result is z-scored and passed
through a temperature softmax so the map is strictly positive and sums
to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import InputTooSmallError, MaskError, NumericError, RangeError, ShapeError
from .imaging import MaskLayer, RasterImage, fit_max_dimension, resize_nearest

MIN_IMAGE_SIDE = 32

_ZSCORE_EPS = 1e-12


@dataclass
class SaliencyMap:
    """Nonnegative (H, W) map summing to 1, the stand-in for viewer attention."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"saliency map must be (H, W), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericError("saliency map contains non-finite values")
        if arr.min() < 0.0:
            raise RangeError("saliency map values must be nonnegative")
        total = arr.sum()
        if abs(total - 1.0) > 1e-6:
            raise RangeError(f"saliency map must sum to 1, got {total}")
        self.values = arr

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class ProxySaliencyConfig:
    working_max_dim: int = 256
    center_levels: tuple = (1, 2)
    surround_deltas: tuple = (2, 3)
    channel_weights: tuple = (1.0, 1.0, 1.0)
    temperature: float = 1.0

    def __post_init__(self):
        if self.working_max_dim < MIN_IMAGE_SIDE:
            raise RangeError(f"working dimension must be >= {MIN_IMAGE_SIDE}")
        if self.temperature <= 0.0:
            raise RangeError("softmax temperature must be positive")
        self.center_levels = tuple(int(v) for v in self.center_levels)
        self.surround_deltas = tuple(int(v) for v in self.surround_deltas)


# Rows: luminance, red-green opponency, blue-yellow opponency.
_OPPONENT_MATRIX = np.array(
    [
        [0.27, 0.67, 0.06],
        [1.0, -1.0, 0.0],
        [-0.5, -0.5, 1.0],
    ]
)


def _opponent_stack(arr: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """(H, W, 3) stack of luminance, red-green, and blue-yellow channels."""
    return cv2.transform(arr, _OPPONENT_MATRIX.astype(arr.dtype), dst=out)


def raw_map_array(
    arr: np.ndarray,
    config: ProxySaliencyConfig | None = None,
    workspace: dict | None = None,
) -> np.ndarray:
    """Raw center-surround map of an (H, W, 3) array; dtype follows the input.

    ``workspace`` (an initially-empty dict owned by the caller) lets repeated
    same-shape calls reuse output buffers; it makes the call non-reentrant.
    """
    config = config or ProxySaliencyConfig()
    if max(arr.shape[0], arr.shape[1]) < MIN_IMAGE_SIDE:
        raise InputTooSmallError(
            f"image max side must be >= {MIN_IMAGE_SIDE}px, got {arr.shape[1]}x{arr.shape[0]}"
        )
    out_h, out_w = fit_max_dimension(arr.shape[0], arr.shape[1], config.working_max_dim)
    if (out_h, out_w) != arr.shape[:2]:
        arr = cv2.resize(arr, (out_w, out_h), interpolation=cv2.INTER_LINEAR)

    ws = workspace if workspace is not None else {}
    if ws.get("shape") != (out_h, out_w, arr.dtype.str):
        ws.clear()
        ws["shape"] = (out_h, out_w, arr.dtype.str)
        ws["stack"] = np.empty((out_h, out_w, 3), dtype=arr.dtype)
        ws["diff"] = np.empty((out_h, out_w, 3), dtype=arr.dtype)
        ws["raw"] = np.empty((out_h, out_w), dtype=arr.dtype)
        ws["pair"] = np.empty((out_h, out_w), dtype=arr.dtype)
        ws["up"] = {}

    stack = _opponent_stack(arr, out=ws["stack"])
    depth = max(config.center_levels) + max(config.surround_deltas)
    pyramid = [stack]
    for _ in range(depth):
        prev = pyramid[-1]
        half = ((prev.shape[1] + 1) // 2, (prev.shape[0] + 1) // 2)
        pyramid.append(cv2.pyrDown(prev, dstsize=half, borderType=cv2.BORDER_REPLICATE))
    needed = sorted(
        set(config.center_levels)
        | {c + d for c in config.center_levels for d in config.surround_deltas}
    )
    upsampled = {}
    for level in needed:
        dst = ws["up"].setdefault(level, np.empty((out_h, out_w, 3), dtype=arr.dtype))
        upsampled[level] = cv2.resize(
            pyramid[level], (out_w, out_h), dst=dst, interpolation=cv2.INTER_LINEAR
        )

    weights = np.asarray(config.channel_weights, dtype=arr.dtype).reshape(1, 3)
    raw, diff, pair = ws["raw"], ws["diff"], ws["pair"]
    raw.fill(0.0)
    for c in config.center_levels:
        for d in config.surround_deltas:
            cv2.absdiff(upsampled[c], upsampled[c + d], dst=diff)
            cv2.transform(diff, weights, dst=pair)
            cv2.add(raw, pair, dst=raw)
    return raw


def proxy_raw_map(image: RasterImage, config: ProxySaliencyConfig | None = None) -> np.ndarray:
    """Center-surround contrast accumulated over channels, before normalization.

    The raw map retains its scale; callers normalize via ``normalize_softmax``
    (which is invariant to positive affine rescaling of the raw values).
    """
    return raw_map_array(image.data, config)


def _softmax(z: np.ndarray, temperature: float) -> np.ndarray:
    scaled = z / temperature
    scaled = scaled - scaled.max()
    e = np.exp(scaled)
    return e / e.sum()


def normalize_softmax(raw: np.ndarray, temperature: float = 1.0) -> SaliencyMap:
    """z-score the raw map, then softmax so values are positive and sum to 1.

    A constant raw map (zero variance) normalizes to the uniform map.
    """
    if temperature <= 0.0:
        raise RangeError("softmax temperature must be positive")
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise NumericError("raw saliency values must be finite")
    std = raw.std()
    if std < _ZSCORE_EPS:
        z = np.zeros_like(raw)
    else:
        z = (raw - raw.mean()) / std
    return SaliencyMap(_softmax(z, temperature))


def compute_proxy_saliency(
    image: RasterImage, config: ProxySaliencyConfig | None = None
) -> SaliencyMap:
    config = config or ProxySaliencyConfig()
    return normalize_softmax(proxy_raw_map(image, config), config.temperature)


def mask_at_resolution(mask: MaskLayer, height: int, width: int) -> np.ndarray:
    """Binarize at 0.5, then nearest-resample to the saliency grid."""
    return resize_nearest(mask.binarized().astype(np.float64), height, width) >= 0.5


def attention_loss(saliency: SaliencyMap, mask: MaskLayer) -> float:
    """Negative mean saliency inside the mask (area-normalized).

    Always negative; for a uniform map it equals -1/(H*W) regardless of the
    mask, and minimizing it concentrates predicted attention in the mask.
    """
    m = mask_at_resolution(mask, saliency.height, saliency.width)
    area = int(m.sum())
    if area == 0:
        raise MaskError("binarized mask is empty at saliency resolution")
    return float(-(saliency.values[m].sum()) / area)


def mean_mask_saliency(saliency: SaliencyMap, mask: MaskLayer) -> float:
    """Mean saliency inside the mask; the sign-flipped attention loss."""
    return -attention_loss(saliency, mask)
