"""Core image/mask/parameter types and the parametric edit pipeline.

Pixels are planar H x W x 3 float64 buffers in [0, 1].  Five global
transforms (sharpen, exposure, contrast, tone curve, color curves) are
applied in a configurable order, separately to the foreground and
background regions of a mask, and blended into the final image.  Every
stage clamps its output back into [0, 1] before the next stage runs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import cv2
import numpy as np

from .errors import RangeError, ShapeError

SHARPNESS_RANGE = (-2.0, 2.0)
EXPOSURE_RANGE = (-3.0, 3.0)
CONTRAST_RANGE = (-1.0, 1.0)
# The curve normalizer divides by the sum of the curve values, so 0 is
# excluded from the legal range.
CURVE_RANGE = (0.01, 3.0)
DEFAULT_CURVE_RESOLUTION = 8

LUMA_WEIGHTS = np.array([0.27, 0.67, 0.06])

STAGE_NAMES = ("sharpen", "exposure", "contrast", "tone", "color")
DEFAULT_PIPELINE_ORDER = STAGE_NAMES

# Interpolation may mildly exaggerate an edit past the optimized recipe;
# projection keeps the extrapolated parameters legal.
MAX_INTERPOLATION_ALPHA = 1.5

_CONTRAST_EPS = 1e-6


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class RasterImage:
    """An RGB image as an (H, W, 3) float array with values in [0, 1].

    float64 by default; float32 buffers (from the reduced-precision delivery
    path) are kept as-is rather than paying a widening pass.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = self.data
        if not isinstance(arr, np.ndarray) or arr.dtype not in (np.float32, np.float64):
            arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeError(f"image data must be (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError("image must be at least 1x1")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def copy(self) -> "RasterImage":
        return RasterImage(self.data.copy())


@dataclass
class MaskLayer:
    """Per-pixel region weights in [0, 1]; >= 0.5 counts as foreground."""

    weights: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"mask weights must be (H, W), got {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise RangeError("mask weights must lie in [0, 1]")
        self.weights = arr

    @property
    def height(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    def binarized(self) -> np.ndarray:
        return self.weights >= 0.5

    def matches(self, image: RasterImage) -> bool:
        return (self.height, self.width) == (image.height, image.width)


def _check_scalar(name: str, value: float, lo: float, hi: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < lo or value > hi:
        raise RangeError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return value


@dataclass
class ParamSet:
    """One region's transform parameters.

    ``tone`` is a single curve of ``curve_resolution`` values shared by all
    channels; ``color`` holds one curve per channel, shaped (3, L).
    """

    sharpness: float = 0.0
    exposure: float = 0.0
    contrast: float = 0.0
    tone: np.ndarray = field(default_factory=lambda: np.ones(DEFAULT_CURVE_RESOLUTION))
    color: np.ndarray = field(default_factory=lambda: np.ones((3, DEFAULT_CURVE_RESOLUTION)))

    def __post_init__(self):
        self.tone = np.asarray(self.tone, dtype=np.float64)
        self.color = np.asarray(self.color, dtype=np.float64)
        if self.tone.ndim != 1 or self.tone.size < 2:
            raise ShapeError("tone curve must be a 1-D array of at least 2 values")
        if self.color.shape != (3, self.tone.size):
            raise ShapeError(
                f"color curves must be shaped (3, {self.tone.size}), got {self.color.shape}"
            )

    @property
    def curve_resolution(self) -> int:
        return self.tone.size

    def validate(self) -> "ParamSet":
        """Raise RangeError unless every value is within its closed range."""
        _check_scalar("sharpness", self.sharpness, *SHARPNESS_RANGE)
        _check_scalar("exposure", self.exposure, *EXPOSURE_RANGE)
        _check_scalar("contrast", self.contrast, *CONTRAST_RANGE)
        lo, hi = CURVE_RANGE
        for label, curve in (("tone", self.tone), ("color", self.color)):
            if not np.all(np.isfinite(curve)):
                raise RangeError(f"{label} curve contains non-finite values")
            if curve.min() < lo or curve.max() > hi:
                raise RangeError(f"{label} curve values must lie in [{lo}, {hi}]")
        return self

    def project(self) -> "ParamSet":
        """Clamp every value into its legal range (a new ParamSet)."""
        return ParamSet(
            sharpness=float(np.clip(self.sharpness, *SHARPNESS_RANGE)),
            exposure=float(np.clip(self.exposure, *EXPOSURE_RANGE)),
            contrast=float(np.clip(self.contrast, *CONTRAST_RANGE)),
            tone=np.clip(self.tone, *CURVE_RANGE),
            color=np.clip(self.color, *CURVE_RANGE),
        )

    def is_identity(self) -> bool:
        return (
            self.sharpness == 0.0
            and self.exposure == 0.0
            and self.contrast == 0.0
            and bool(np.all(self.tone == 1.0))
            and bool(np.all(self.color == 1.0))
        )

    def copy(self) -> "ParamSet":
        return ParamSet(
            sharpness=self.sharpness,
            exposure=self.exposure,
            contrast=self.contrast,
            tone=self.tone.copy(),
            color=self.color.copy(),
        )


def identity_params(curve_resolution: int = DEFAULT_CURVE_RESOLUTION) -> ParamSet:
    """The parameter assignment under which the pipeline is a no-op."""
    if curve_resolution < 2:
        raise RangeError("curve resolution must be at least 2")
    return ParamSet(
        sharpness=0.0,
        exposure=0.0,
        contrast=0.0,
        tone=np.ones(curve_resolution),
        color=np.ones((3, curve_resolution)),
    )


@dataclass
class EditRecipe:
    """A foreground/background parameter pair plus pipeline metadata."""

    foreground: ParamSet
    background: ParamSet
    pipeline_order: tuple = DEFAULT_PIPELINE_ORDER
    mode: str = "increase"
    provenance: dict | None = None

    def __post_init__(self):
        self.pipeline_order = tuple(self.pipeline_order)
        if sorted(self.pipeline_order) != sorted(STAGE_NAMES):
            raise RangeError(
                f"pipeline order must be a permutation of {STAGE_NAMES}, "
                f"got {self.pipeline_order}"
            )
        if self.mode not in ("increase", "decrease"):
            raise RangeError(f"mode must be 'increase' or 'decrease', got {self.mode!r}")
        if self.foreground.curve_resolution != self.background.curve_resolution:
            raise ShapeError("foreground and background curve resolutions differ")

    @property
    def curve_resolution(self) -> int:
        return self.foreground.curve_resolution

    def is_identity(self) -> bool:
        return self.foreground.is_identity() and self.background.is_identity()

    def copy(self) -> "EditRecipe":
        return EditRecipe(
            foreground=self.foreground.copy(),
            background=self.background.copy(),
            pipeline_order=self.pipeline_order,
            mode=self.mode,
            provenance=copy.deepcopy(self.provenance),
        )


def identity_recipe(curve_resolution: int = DEFAULT_CURVE_RESOLUTION) -> EditRecipe:
    return EditRecipe(
        foreground=identity_params(curve_resolution),
        background=identity_params(curve_resolution),
    )


# ---------------------------------------------------------------------------
# Transform stages (array level)
# ---------------------------------------------------------------------------


def luminance_array(arr: np.ndarray) -> np.ndarray:
    """Per-pixel 0.27 R + 0.67 G + 0.06 B."""
    return arr @ LUMA_WEIGHTS.astype(arr.dtype, copy=False)


def luminance(image: RasterImage) -> np.ndarray:
    return luminance_array(image.data)


_SOBEL_DERIV = np.array([-1.0, 0.0, 1.0])
_SOBEL_SMOOTH = np.array([1.0, 2.0, 1.0])


def _sobel_edges(arr: np.ndarray) -> np.ndarray:
    """Per-channel gradient magnitude from the 1/8-scaled Sobel pair.

    Cross-correlation with replicate (edge-clamp) padding; both kernels are
    separable, so each is two 1-D passes.  Squaring both responses makes the
    result independent of kernel orientation.
    """
    # f1 = (1/8) [1,2,1]^T [-1,0,1]  (horizontal gradient)
    g1 = cv2.sepFilter2D(
        arr, -1, _SOBEL_DERIV, _SOBEL_SMOOTH, borderType=cv2.BORDER_REPLICATE
    )
    # f2 = (1/8) [-1,0,1]^T [1,2,1]  (vertical gradient)
    g2 = cv2.sepFilter2D(
        arr, -1, _SOBEL_SMOOTH, _SOBEL_DERIV, borderType=cv2.BORDER_REPLICATE
    )
    # numpy, not cv2.magnitude: the latter's SIMD prologue makes results
    # depend on buffer alignment, which breaks byte-reproducibility
    g1 *= g1
    g2 *= g2
    g1 += g2
    np.sqrt(g1, out=g1)
    g1 /= 8.0
    return g1


def sharpen_array(arr: np.ndarray, p1: float) -> np.ndarray:
    if p1 == 0.0:
        return arr
    # I + p1*edges*I factored as I * (1 + p1*edges)
    scale = _sobel_edges(arr)
    scale *= p1
    scale += 1.0
    scale *= arr
    return np.clip(scale, 0.0, 1.0, out=scale)


def exposure_array(arr: np.ndarray, p2: float) -> np.ndarray:
    if p2 == 0.0:
        return arr
    out = arr * float(np.exp(p2 * np.log(2.0)))
    # the multiplier is positive, so only the upper bound needs clamping
    return np.minimum(out, 1.0, out=out)


def contrast_array(arr: np.ndarray, p3: float) -> np.ndarray:
    if p3 == 0.0:
        return arr
    lum = luminance_array(arr)
    # Analytic limit of the ratio at lum -> 0 is 0; the epsilon keeps
    # near-black pixels near 0 instead of dividing by zero.
    ratio = 0.5 * (1.0 - np.cos(np.pi * lum)) / np.maximum(lum, _CONTRAST_EPS)
    # (1-p3)*I + p3*I*ratio factored as I * ((1-p3) + p3*ratio); the factor
    # (1-p3) + p3*ratio is nonnegative for every p3 in [-1,1] since the
    # cosine ratio lies in [0,1], so only the upper bound needs clamping
    scale = ratio
    scale *= p3
    scale += 1.0 - p3
    out = cv2.multiply(arr, cv2.merge([scale, scale, scale]))
    return np.minimum(out, 1.0, out=out)


def curve_array(arr: np.ndarray, curve: np.ndarray) -> np.ndarray:
    """Monotone piecewise-linear remap: sum_i clip(L*x - i, 0, 1) * c_i / sum(c).

    Evaluated segment-wise: with k = floor(L*x), the sum telescopes to
    (cumsum_k + (L*x - k) * c_k) / sum(c), one gather per pixel instead of
    L ramp passes.  A constant curve is the identity map on [0, 1]; that
    case short-circuits so identity parameters reproduce inputs bit-exactly.
    """
    curve = np.asarray(curve, dtype=np.float64)
    n = curve.size
    if np.all(curve == curve[0]):
        return arr
    dtype = arr.dtype
    prefix = np.concatenate(([0.0], np.cumsum(curve)))[:n].astype(dtype)
    segments = curve.astype(dtype)
    scaled = arr * float(n)
    index = np.clip(scaled.astype(np.intp), 0, n - 1)
    frac = scaled
    frac -= index
    acc = segments.take(index)
    acc *= frac
    acc += prefix.take(index)
    acc /= float(curve.sum())
    # nonnegative by construction; only the upper bound can overshoot (1 ulp)
    return np.minimum(acc, 1.0, out=acc)


def color_array(arr: np.ndarray, curves: np.ndarray) -> np.ndarray:
    curves = np.asarray(curves, dtype=np.float64)
    if np.all(curves == curves[0, 0]):
        return arr
    out = np.empty_like(arr)
    for c in range(3):
        out[..., c] = curve_array(arr[..., c], curves[c])
    return out


# ---------------------------------------------------------------------------
# Public stage operations (validated)
# ---------------------------------------------------------------------------


def sharpen(image: RasterImage, p1: float) -> RasterImage:
    """Edge-weighted sharpening; p1 < 0 softens, p1 > 0 accentuates."""
    _check_scalar("sharpness", p1, *SHARPNESS_RANGE)
    return RasterImage(sharpen_array(image.data, float(p1)))


def adjust_exposure(image: RasterImage, p2: float) -> RasterImage:
    """Multiply by 2**p2, then clamp."""
    _check_scalar("exposure", p2, *EXPOSURE_RANGE)
    return RasterImage(exposure_array(image.data, float(p2)))


def adjust_contrast(image: RasterImage, p3: float) -> RasterImage:
    """Blend toward a cosine-remapped copy; mid-gray (lum 0.5) is a fixed point."""
    _check_scalar("contrast", p3, *CONTRAST_RANGE)
    return RasterImage(contrast_array(image.data, float(p3)))


def apply_curve(
    image: RasterImage,
    curve: Sequence[float] | np.ndarray,
    per_channel: np.ndarray | None = None,
) -> RasterImage:
    """Apply a shared tone curve, or per-channel color curves when given."""
    lo, hi = CURVE_RANGE
    if per_channel is not None:
        curves = np.asarray(per_channel, dtype=np.float64)
        if curves.min() < lo or curves.max() > hi:
            raise RangeError(f"curve values must lie in [{lo}, {hi}]")
        return RasterImage(color_array(image.data, curves))
    curve = np.asarray(curve, dtype=np.float64)
    if curve.min() < lo or curve.max() > hi:
        raise RangeError(f"curve values must lie in [{lo}, {hi}]")
    return RasterImage(curve_array(image.data, curve))


def apply_param_set_array(
    arr: np.ndarray,
    params: ParamSet,
    order: Iterable[str] = DEFAULT_PIPELINE_ORDER,
) -> np.ndarray:
    for stage in order:
        arr = apply_stage_array(arr, params, stage)
    return arr


def apply_stage_array(arr: np.ndarray, params: ParamSet, stage: str) -> np.ndarray:
    if stage == "sharpen":
        return sharpen_array(arr, params.sharpness)
    if stage == "exposure":
        return exposure_array(arr, params.exposure)
    if stage == "contrast":
        return contrast_array(arr, params.contrast)
    if stage == "tone":
        return curve_array(arr, params.tone)
    if stage == "color":
        return color_array(arr, params.color)
    raise RangeError(f"unknown pipeline stage {stage!r}")


def apply_param_set(
    image: RasterImage,
    params: ParamSet,
    order: Iterable[str] = DEFAULT_PIPELINE_ORDER,
) -> RasterImage:
    """Run all five stages in the given order, clamping after each."""
    order = tuple(order)
    if sorted(order) != sorted(STAGE_NAMES):
        raise RangeError(f"order must be a permutation of {STAGE_NAMES}")
    params.validate()
    return RasterImage(apply_param_set_array(image.data, params, order))


def composite_arrays(
    arr: np.ndarray, mask_weights: np.ndarray, recipe: EditRecipe
) -> np.ndarray:
    """Blend the two transformed streams: fg*m + bg*(1-m)."""
    if arr.shape[:2] != mask_weights.shape:
        raise ShapeError(
            f"image {arr.shape[:2]} and mask {mask_weights.shape} dimensions differ"
        )
    if recipe.is_identity():
        # Both streams equal the input, so the real-valued blend is exactly
        # the input; skipping the multiply avoids soft-mask rounding.
        return arr.copy()
    fg = apply_param_set_array(arr, recipe.foreground, recipe.pipeline_order)
    bg = apply_param_set_array(arr, recipe.background, recipe.pipeline_order)
    # literal fg*m + bg*(1-m); cv2's elementwise ops are exactly rounded, so
    # this is bitwise-identical to the numpy expression
    m = np.ascontiguousarray(mask_weights, dtype=arr.dtype)
    m3 = cv2.merge([m, m, m])
    blended = cv2.multiply(fg, m3)
    np.subtract(np.asarray(1.0, dtype=arr.dtype), m3, out=m3)
    return cv2.add(blended, cv2.multiply(bg, m3), dst=blended)


def composite(image: RasterImage, mask: MaskLayer, recipe: EditRecipe) -> RasterImage:
    recipe.foreground.validate()
    recipe.background.validate()
    return RasterImage(composite_arrays(image.data, mask.weights, recipe))


def render_edit(
    image: RasterImage,
    mask: MaskLayer,
    recipe: EditRecipe,
    alpha: float = 1.0,
    working_dtype=np.float32,
) -> RasterImage:
    """Interpolate the recipe by alpha and composite at working precision.

    The delivery path (CLI apply, video frames, service renders) runs the
    pipeline in float32: deviations from the float64 reference are below
    1e-6, two orders of magnitude under the 8-bit quantization step, and
    halving the memory traffic keeps full-resolution edits interactive.
    Identity recipes still reproduce the input bit-exactly.
    """
    scaled = interpolate_params(recipe, alpha)
    scaled.foreground.validate()
    scaled.background.validate()
    if scaled.is_identity():
        return image.copy()
    arr = composite_arrays(
        np.ascontiguousarray(image.data, dtype=working_dtype),
        np.ascontiguousarray(mask.weights, dtype=working_dtype),
        scaled,
    )
    return RasterImage(arr)


# ---------------------------------------------------------------------------
# Parameter interpolation (the "saliency slider")
# ---------------------------------------------------------------------------


def _lerp_params(params: ParamSet, alpha: float) -> ParamSet:
    if alpha == 1.0:
        return params.copy()
    ident = identity_params(params.curve_resolution)
    blended = ParamSet(
        sharpness=(1.0 - alpha) * ident.sharpness + alpha * params.sharpness,
        exposure=(1.0 - alpha) * ident.exposure + alpha * params.exposure,
        contrast=(1.0 - alpha) * ident.contrast + alpha * params.contrast,
        tone=(1.0 - alpha) * ident.tone + alpha * params.tone,
        color=(1.0 - alpha) * ident.color + alpha * params.color,
    )
    return blended.project()


def interpolate_params(recipe: EditRecipe, alpha: float) -> EditRecipe:
    """Scale the edit between identity (0), the recipe (1), and a mild
    extrapolation past it (up to 1.5); results are projected into range."""
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha < 0.0 or alpha > MAX_INTERPOLATION_ALPHA:
        raise RangeError(f"alpha must lie in [0, {MAX_INTERPOLATION_ALPHA}], got {alpha}")
    return EditRecipe(
        foreground=_lerp_params(recipe.foreground, alpha),
        background=_lerp_params(recipe.background, alpha),
        pipeline_order=recipe.pipeline_order,
        mode=recipe.mode,
        provenance=copy.deepcopy(recipe.provenance),
    )


# ---------------------------------------------------------------------------
# Resampling helpers (shared by saliency, optimizer, service)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=512)
def _bilinear_plan(src: int, dst: int, dtype: str):
    """Index/weight vectors for separable bilinear resampling along one axis."""
    coords = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    i0 = np.floor(coords).astype(np.intp)
    t = (coords - i0).astype(dtype)
    i0c = np.clip(i0, 0, src - 1)
    i1c = np.clip(i0 + 1, 0, src - 1)
    return i0c, i1c, t, (np.asarray(1.0, dtype=dtype) - t)


def _resample_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    out = arr
    h, w = arr.shape[:2]
    if h != out_h:
        i0, i1, t, s = _bilinear_plan(h, out_h, arr.dtype.str)
        shape = (out_h,) + (1,) * (out.ndim - 1)
        out = out.take(i0, axis=0) * s.reshape(shape) + out.take(i1, axis=0) * t.reshape(shape)
    if w != out_w:
        i0, i1, t, s = _bilinear_plan(w, out_w, arr.dtype.str)
        shape = (1, out_w) + (1,) * (out.ndim - 2)
        out = out.take(i0, axis=1) * s.reshape(shape) + out.take(i1, axis=1) * t.reshape(shape)
    return out


def resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of an (H, W) or (H, W, C) array."""
    h, w = arr.shape[:2]
    if (h, w) == (out_h, out_w):
        return arr.copy()
    return np.ascontiguousarray(_resample_bilinear(arr, out_h, out_w))


@lru_cache(maxsize=256)
def _nearest_plan(src: int, dst: int):
    idx = np.floor((np.arange(dst, dtype=np.float64) + 0.5) * (src / dst)).astype(np.intp)
    return np.clip(idx, 0, src - 1)


def resize_nearest(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize; preserves binarity of masks."""
    h, w = arr.shape[:2]
    if (h, w) == (out_h, out_w):
        return arr.copy()
    return np.ascontiguousarray(
        arr.take(_nearest_plan(h, out_h), axis=0).take(_nearest_plan(w, out_w), axis=1)
    )


def fit_max_dimension(height: int, width: int, max_dim: int) -> tuple[int, int]:
    """Output size whose longer side is max_dim, preserving aspect (no upscale)."""
    longest = max(height, width)
    if longest <= max_dim:
        return height, width
    scale = max_dim / longest
    return max(1, round(height * scale)), max(1, round(width * scale))
