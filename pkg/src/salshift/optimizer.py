"""Per-image search over the 70-dimensional edit-parameter space.

Projected gradient descent with momentum on a weighted objective:
attention (mean saliency inside the mask, sign depending on mode) plus a
pixel-fidelity surrogate and a parameter regularizer that keep the edit
subtle.  Gradients come from central finite differences, one evaluation
pair per parameter, computed against cached per-stream stage prefixes so
each evaluation only reruns the pipeline suffix that actually changed.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from typing import Callable, Sequence

import cv2
import numpy as np

from .errors import MaskError, NumericError, RangeError
from .imaging import (
    CONTRAST_RANGE,
    CURVE_RANGE,
    DEFAULT_CURVE_RESOLUTION,
    DEFAULT_PIPELINE_ORDER,
    EXPOSURE_RANGE,
    SHARPNESS_RANGE,
    EditRecipe,
    MaskLayer,
    ParamSet,
    RasterImage,
    apply_stage_array,
    fit_max_dimension,
    resize_bilinear,
)
from .saliency import (
    ProxySaliencyConfig,
    SaliencyMap,
    _softmax,
    _ZSCORE_EPS,
    raw_map_array,
)

SaliencySource = Callable[[RasterImage], SaliencyMap]


@dataclass
class ObjectiveConfig:
    lambda_attention: float = 2.5e4
    lambda_fidelity: float = 10.0
    lambda_reg: float = 0.1
    mode: str = "increase"
    working_resolution: int = 224

    def __post_init__(self):
        if min(self.lambda_attention, self.lambda_fidelity, self.lambda_reg) < 0:
            raise RangeError("objective weights must be nonnegative")
        if self.working_resolution < 64:
            raise RangeError("working resolution must be >= 64")
        if self.mode not in ("increase", "decrease"):
            raise RangeError("mode must be 'increase' or 'decrease'")


@dataclass
class OptimizerConfig:
    iterations: int = 100
    step_size: float = 0.02
    momentum: float = 0.9
    fd_step: float = 0.01  # fraction of each parameter's range half-width
    seed: int = 0
    restarts: int = 1
    workers: int = 1  # >1 distributes finite-difference evaluations

    def __post_init__(self):
        if self.iterations < 1:
            raise RangeError("iterations must be >= 1")
        if self.fd_step <= 0:
            raise RangeError("finite-difference step must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise RangeError("momentum must lie in [0, 1)")
        if self.restarts < 1:
            raise RangeError("restarts must be >= 1")


@dataclass
class ObjectiveBreakdown:
    total: float
    attention: float
    fidelity: float
    regularization: float

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "attention": self.attention,
            "fidelity": self.fidelity,
            "regularization": self.regularization,
        }


# ---------------------------------------------------------------------------
# Parameter vector layout: [fg | bg], each region
# [sharpness, exposure, contrast, tone(L), color_r(L), color_g(L), color_b(L)]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VectorLayout:
    curve_resolution: int = DEFAULT_CURVE_RESOLUTION
    lower: np.ndarray = field(init=False, repr=False)
    upper: np.ndarray = field(init=False, repr=False)
    identity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L = self.curve_resolution
        lo = [SHARPNESS_RANGE[0], EXPOSURE_RANGE[0], CONTRAST_RANGE[0]] + [CURVE_RANGE[0]] * (4 * L)
        hi = [SHARPNESS_RANGE[1], EXPOSURE_RANGE[1], CONTRAST_RANGE[1]] + [CURVE_RANGE[1]] * (4 * L)
        ident = [0.0, 0.0, 0.0] + [1.0] * (4 * L)
        object.__setattr__(self, "lower", np.array(lo * 2))
        object.__setattr__(self, "upper", np.array(hi * 2))
        object.__setattr__(self, "identity", np.array(ident * 2))

    @property
    def region_size(self) -> int:
        return 3 + 4 * self.curve_resolution

    @property
    def size(self) -> int:
        return 2 * self.region_size

    @property
    def half_width(self) -> np.ndarray:
        return (self.upper - self.lower) / 2.0

    def params_from_vector(self, region: np.ndarray) -> ParamSet:
        L = self.curve_resolution
        return ParamSet(
            sharpness=float(region[0]),
            exposure=float(region[1]),
            contrast=float(region[2]),
            tone=region[3 : 3 + L].copy(),
            color=region[3 + L : 3 + 4 * L].reshape(3, L).copy(),
        )

    def vector_from_params(self, params: ParamSet) -> np.ndarray:
        return np.concatenate(
            [
                [params.sharpness, params.exposure, params.contrast],
                params.tone,
                params.color.ravel(),
            ]
        )

    def recipe_to_vector(self, recipe: EditRecipe) -> np.ndarray:
        return np.concatenate(
            [
                self.vector_from_params(recipe.foreground),
                self.vector_from_params(recipe.background),
            ]
        )

    def vector_to_recipe(
        self,
        vec: np.ndarray,
        order: Sequence[str] = DEFAULT_PIPELINE_ORDER,
        mode: str = "increase",
        provenance: dict | None = None,
    ) -> EditRecipe:
        n = self.region_size
        return EditRecipe(
            foreground=self.params_from_vector(vec[:n]),
            background=self.params_from_vector(vec[n:]),
            pipeline_order=tuple(order),
            mode=mode,
            provenance=provenance,
        )

    def stage_of_index(self, k: int) -> tuple[int, str]:
        """(region, stage name) for a flat vector index."""
        region, local = divmod(k, self.region_size)
        L = self.curve_resolution
        if local == 0:
            return region, "sharpen"
        if local == 1:
            return region, "exposure"
        if local == 2:
            return region, "contrast"
        if local < 3 + L:
            return region, "tone"
        return region, "color"


def _normalized_distance(vec: np.ndarray, layout: VectorLayout) -> np.ndarray:
    return (vec - layout.identity) / layout.half_width


# ---------------------------------------------------------------------------
# The objective evaluator
# ---------------------------------------------------------------------------


class CompositeObjective:
    """Evaluates the weighted objective at a parameter vector.

    ``set_base`` caches each stream's per-stage outputs, plus the clipped
    segment ramps and numerators of the tone and color curve stages, so
    ``total_perturbed`` (one parameter changed) reruns only the pipeline
    suffix that depends on it -- curve-value perturbations reduce to a
    fused multiply-add on the cached numerator.  Instances reuse internal
    buffers and are not safe for concurrent use.
    """

    def __init__(
        self,
        image_array: np.ndarray,
        mask_weights: np.ndarray,
        config: ObjectiveConfig,
        saliency_fn: Callable[[np.ndarray], np.ndarray] | None,
        order: Sequence[str] = DEFAULT_PIPELINE_ORDER,
        curve_resolution: int = DEFAULT_CURVE_RESOLUTION,
        dtype=np.float64,
    ):
        self.arr = np.ascontiguousarray(image_array, dtype=dtype)
        self.mask = np.ascontiguousarray(mask_weights, dtype=np.float64)
        self.m3 = np.ascontiguousarray(
            np.repeat(self.mask[..., None].astype(dtype), 3, axis=2)
        )
        self.inv_m3 = np.asarray(1.0, dtype=dtype) - self.m3
        self.config = config
        self.order = tuple(order)
        self.layout = VectorLayout(curve_resolution)
        self.saliency_fn = saliency_fn
        self._mask_cache: dict[tuple[int, int], tuple[np.ndarray, int]] = {}
        self._base_vec: np.ndarray | None = None
        self._prefix: list[list[np.ndarray]] = [[], []]
        self._parts: list[np.ndarray] = []
        self._curves: list[dict] = [{}, {}]
        self._buf3 = np.empty_like(self.arr)
        self._fid = np.empty_like(self.arr)
        if not (self.mask >= 0.5).any():
            raise MaskError("binarized mask is empty")

    # -- attention helpers -------------------------------------------------

    def _mask_at(self, shape: tuple[int, int]) -> tuple[np.ndarray, int]:
        cached = self._mask_cache.get(shape)
        if cached is None:
            from .saliency import mask_at_resolution

            m = mask_at_resolution(MaskLayer(self.mask), shape[0], shape[1])
            idx = np.flatnonzero(m.ravel())
            if idx.size == 0:
                raise MaskError("binarized mask is empty at saliency resolution")
            cached = (idx, idx.size)
            self._mask_cache[shape] = cached
        return cached

    def _attention_term(self, comp: np.ndarray) -> float:
        if self.config.lambda_attention == 0.0:
            return 0.0
        values = self.saliency_fn(comp)
        idx, area = self._mask_at(values.shape)
        loss = -float(np.take(values.reshape(-1), idx).sum()) / area
        return loss if self.config.mode == "increase" else -loss

    # -- full evaluation ---------------------------------------------------

    def _terms(self, comp: np.ndarray, vec: np.ndarray) -> ObjectiveBreakdown:
        cfg = self.config
        attention = self._attention_term(comp)
        if comp is self.arr:
            fidelity = 0.0
        else:
            cv2.absdiff(comp, self.arr, dst=self._fid)
            s = cv2.mean(self._fid)
            fidelity = (s[0] + s[1] + s[2]) / 3.0
        reg = float(np.mean(_normalized_distance(vec, self.layout) ** 2))
        total = (
            cfg.lambda_attention * attention
            + cfg.lambda_fidelity * fidelity
            + cfg.lambda_reg * reg
        )
        return ObjectiveBreakdown(total, attention, fidelity, reg)

    def _region_params(self, vec: np.ndarray, region: int) -> ParamSet:
        n = self.layout.region_size
        return self.layout.params_from_vector(vec[region * n : (region + 1) * n])

    def _run_stream(self, vec: np.ndarray, region: int) -> list[np.ndarray]:
        params = self._region_params(vec, region)
        outputs = []
        arr = self.arr
        for stage in self.order:
            arr = apply_stage_array(arr, params, stage)
            outputs.append(arr)
        return outputs

    def composite_array(self, vec: np.ndarray) -> np.ndarray:
        fg = self._run_stream(vec, 0)[-1]
        bg = self._run_stream(vec, 1)[-1]
        if fg is self.arr and bg is self.arr:
            # Identity on both streams; the blend is exactly the input.
            return self.arr
        return fg * self.m3 + bg * self.inv_m3

    def breakdown(self, vec: np.ndarray) -> ObjectiveBreakdown:
        return self._terms(self.composite_array(vec), vec)

    # -- cached perturbation path ------------------------------------------

    def _curve_cache(self, x: np.ndarray, curve: np.ndarray) -> dict:
        """Segment ramps and numerator of y = clip(sum_i ramp_i * c_i / sum c)."""
        n = curve.size
        scaled = x * float(n)
        ramps = [np.clip(scaled, 0.0, 1.0)]
        for i in range(1, n):
            ramps.append(np.clip(scaled - float(i), 0.0, 1.0))
        numerator = ramps[0] * float(curve[0])
        for i in range(1, n):
            numerator += ramps[i] * float(curve[i])
        return {"ramps": ramps, "numerator": numerator, "total": float(curve.sum())}

    def set_base(self, vec: np.ndarray) -> None:
        self._base_vec = vec.copy()
        self._prefix = [self._run_stream(vec, 0), self._run_stream(vec, 1)]
        self._parts = [
            self._prefix[0][-1] * self.m3,
            self._prefix[1][-1] * self.inv_m3,
        ]
        # Curve caches are built lazily: a worker handling only one region's
        # parameters never pays for the other region's ramps.
        self._curves = [{}, {}]

    def _region_curves(self, region: int) -> dict:
        caches = self._curves[region]
        if not caches:
            vec = self._base_vec
            params = self._region_params(vec, region)
            outputs = self._prefix[region]
            tone_pos = self.order.index("tone")
            tone_in = self.arr if tone_pos == 0 else outputs[tone_pos - 1]
            caches["tone"] = self._curve_cache(tone_in, params.tone)
            color_pos = self.order.index("color")
            color_in = self.arr if color_pos == 0 else outputs[color_pos - 1]
            caches["color"] = [
                self._curve_cache(np.ascontiguousarray(color_in[..., ch]), params.color[ch])
                for ch in range(3)
            ]
        return caches

    def _perturbed_curve(self, cache: dict, index: int, delta: float) -> np.ndarray:
        out = cache["ramps"][index] * delta
        out += cache["numerator"]
        out /= cache["total"] + delta
        return np.clip(out, 0.0, 1.0, out=out)

    def _perturbed_stream(self, k: int, value: float) -> tuple[int, np.ndarray]:
        vec = self._base_vec
        region, stage = self.layout.stage_of_index(k)
        pos = self.order.index(stage)
        local = k - region * self.layout.region_size
        L = self.layout.curve_resolution
        outputs = self._prefix[region]

        if stage == "tone":
            delta = float(value - vec[k])
            arr = self._perturbed_curve(self._region_curves(region)["tone"], local - 3, delta)
        elif stage == "color":
            ci = local - 3 - L
            ch, seg = divmod(ci, L)
            delta = float(value - vec[k])
            channel = self._perturbed_curve(self._region_curves(region)["color"][ch], seg, delta)
            arr = outputs[pos].copy()
            arr[..., ch] = channel
        else:
            patched = vec.copy()
            patched[k] = value
            params = self._region_params(patched, region)
            arr = self.arr if pos == 0 else outputs[pos - 1]
            arr = apply_stage_array(arr, params, stage)

        if pos + 1 < len(self.order):
            params_rest = self._region_params(vec, region)
            for stage_name in self.order[pos + 1 :]:
                arr = apply_stage_array(arr, params_rest, stage_name)
        return region, arr

    def total_perturbed(self, k: int, value: float) -> float:
        """Objective total with base_vec[k] replaced by value."""
        assert self._base_vec is not None, "set_base must run first"
        region, arr = self._perturbed_stream(k, value)
        comp = self._buf3
        if region == 0:
            cv2.multiply(arr, self.m3, dst=comp)
            cv2.add(comp, self._parts[1], dst=comp)
        else:
            cv2.multiply(arr, self.inv_m3, dst=comp)
            cv2.add(comp, self._parts[0], dst=comp)
        patched = self._base_vec.copy()
        patched[k] = value
        return self._terms(comp, patched).total


def _make_saliency_array_fn(
    source, proxy: ProxySaliencyConfig | None
) -> Callable[[np.ndarray], np.ndarray]:
    """Adapt a saliency source to a plain array->array function.

    ``source`` may be None (built-in proxy), a ProxySaliencyConfig, a
    provider SPEC string, or any RasterImage -> SaliencyMap callable.
    """
    if source is None or isinstance(source, ProxySaliencyConfig):
        cfg = source if isinstance(source, ProxySaliencyConfig) else (proxy or ProxySaliencyConfig())
        workspace: dict = {}

        def proxy_fn(arr: np.ndarray) -> np.ndarray:
            raw = raw_map_array(arr, cfg, workspace)
            std = raw.std()
            z = np.zeros_like(raw) if std < _ZSCORE_EPS else (raw - raw.mean()) / std
            return _softmax(z, float(cfg.temperature))

        return proxy_fn
    if isinstance(source, str):
        from .providers import parse_provider_spec, query_provider

        spec = parse_provider_spec(source)

        def provider_fn(arr: np.ndarray) -> np.ndarray:
            return query_provider(spec, RasterImage(arr)).values

        return provider_fn

    def callable_fn(arr: np.ndarray) -> np.ndarray:
        return source(RasterImage(arr)).values

    return callable_fn


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def objective(
    image: RasterImage,
    mask: MaskLayer,
    recipe: EditRecipe,
    saliency_source: SaliencySource | ProxySaliencyConfig | str | None = None,
    config: ObjectiveConfig | None = None,
) -> ObjectiveBreakdown:
    """Evaluate the weighted objective for one recipe.

    The image is used at its given resolution; resize beforehand when
    evaluating at the optimizer's working resolution.  When
    ``lambda_attention`` is 0 the saliency model is skipped entirely and the
    attention term reports 0.
    """
    config = config or ObjectiveConfig()
    evaluator = CompositeObjective(
        image.data,
        mask.weights,
        config,
        _make_saliency_array_fn(saliency_source, None),
        recipe.pipeline_order,
        recipe.curve_resolution,
    )
    return evaluator.breakdown(evaluator.layout.recipe_to_vector(recipe))


def _gradient_entries(
    vec: np.ndarray, layout: VectorLayout, fd_step: float
) -> list[tuple[int, float, float, float]]:
    """(index, plus_value, minus_value, denominator); NaN value means 'use base J'."""
    entries = []
    h = fd_step * layout.half_width
    for k in range(layout.size):
        hk = h[k]
        plus, minus = vec[k] + hk, vec[k] - hk
        if plus > layout.upper[k]:
            entries.append((k, np.nan, minus, hk))
        elif minus < layout.lower[k]:
            entries.append((k, plus, np.nan, hk))
        else:
            entries.append((k, plus, minus, 2.0 * hk))
    return entries


def _gradient_from_evals(
    entries, totals: dict[tuple[int, float], float], base_total: float
) -> np.ndarray:
    grad = np.empty(len(entries))
    for i, (k, plus, minus, denom) in enumerate(entries):
        jp = base_total if np.isnan(plus) else totals[(k, plus)]
        jm = base_total if np.isnan(minus) else totals[(k, minus)]
        grad[i] = (jp - jm) / denom
    return grad


def _serial_gradient(
    evaluator: CompositeObjective, vec: np.ndarray, fd_step: float, base_total: float
) -> np.ndarray:
    entries = _gradient_entries(vec, evaluator.layout, fd_step)
    evaluator.set_base(vec)
    totals = {}
    for k, plus, minus, _ in entries:
        for value in (plus, minus):
            if not np.isnan(value):
                totals[(k, value)] = evaluator.total_perturbed(k, value)
    return _gradient_from_evals(entries, totals, base_total)


def finite_diff_gradient(
    image: RasterImage,
    mask: MaskLayer,
    recipe: EditRecipe,
    config: ObjectiveConfig | None = None,
    opt_config: OptimizerConfig | None = None,
    saliency_source=None,
) -> np.ndarray:
    """Central-difference gradient of the objective, one entry per parameter.

    Steps are scaled to each parameter's range half-width; parameters within
    a step of a range bound fall back to a one-sided difference.
    """
    config = config or ObjectiveConfig()
    opt_config = opt_config or OptimizerConfig()
    evaluator = CompositeObjective(
        image.data,
        mask.weights,
        config,
        _make_saliency_array_fn(saliency_source, None),
        recipe.pipeline_order,
        recipe.curve_resolution,
    )
    vec = evaluator.layout.recipe_to_vector(recipe)
    base_total = evaluator.breakdown(vec).total
    return _serial_gradient(evaluator, vec, opt_config.fd_step, base_total)


# ---------------------------------------------------------------------------
# Worker-side state for parallel finite differences
# ---------------------------------------------------------------------------

_WORKER: CompositeObjective | None = None
_WORKER_BASE: bytes | None = None


def _worker_init(payload: dict) -> None:
    global _WORKER
    # One cv2 thread per worker: the workers already saturate the cores, and
    # cv2's dispatch overhead dominates on small images.
    cv2.setNumThreads(1)
    _WORKER = CompositeObjective(
        payload["image"],
        payload["mask"],
        payload["config"],
        _make_saliency_array_fn(payload["saliency"], None),
        payload["order"],
        payload["curve_resolution"],
        dtype=payload["dtype"],
    )


def _worker_chunk(base_bytes: bytes, evals: list[tuple[int, float]]) -> list[float]:
    global _WORKER_BASE
    assert _WORKER is not None
    if _WORKER_BASE != base_bytes:
        _WORKER.set_base(np.frombuffer(base_bytes, dtype=np.float64).copy())
        _WORKER_BASE = base_bytes
    return [_WORKER.total_perturbed(k, value) for k, value in evals]


class _ParallelGradient:
    def __init__(self, evaluator: CompositeObjective, saliency_descriptor, workers: int):
        payload = {
            "image": evaluator.arr,
            "mask": evaluator.mask,
            "config": evaluator.config,
            "saliency": saliency_descriptor,
            "order": evaluator.order,
            "curve_resolution": evaluator.layout.curve_resolution,
            "dtype": evaluator.arr.dtype,
        }
        self.pool = ProcessPoolExecutor(
            max_workers=workers,
            mp_context=get_context("fork"),
            initializer=_worker_init,
            initargs=(payload,),
        )
        self.workers = workers
        self.layout = evaluator.layout

    def __call__(self, vec: np.ndarray, fd_step: float, base_total: float) -> np.ndarray:
        entries = _gradient_entries(vec, self.layout, fd_step)
        evals = [
            (k, value)
            for k, plus, minus, _ in entries
            for value in (plus, minus)
            if not np.isnan(value)
        ]
        chunks = np.array_split(np.arange(len(evals)), self.workers)
        base_bytes = vec.tobytes()
        futures = [
            self.pool.submit(_worker_chunk, base_bytes, [evals[i] for i in chunk])
            for chunk in chunks
            if len(chunk)
        ]
        totals = {}
        for fut, chunk in zip(futures, [c for c in chunks if len(c)]):
            for i, total in zip(chunk, fut.result()):
                totals[evals[i]] = total
        return _gradient_from_evals(entries, totals, base_total)

    def close(self):
        self.pool.shutdown()


# ---------------------------------------------------------------------------
# The optimizer loop
# ---------------------------------------------------------------------------


def _prepare_working(image: RasterImage, mask: MaskLayer, resolution: int):
    h, w = fit_max_dimension(image.height, image.width, resolution)
    arr = resize_bilinear(image.data, h, w)
    weights = np.clip(resize_bilinear(mask.weights, h, w), 0.0, 1.0)
    return arr, weights


def _check_mask(mask: MaskLayer) -> None:
    binary = mask.binarized()
    if not binary.any():
        raise MaskError("binarized mask is empty")
    if binary.all():
        raise MaskError("binarized mask covers the whole image")


def _descend(
    evaluator: CompositeObjective,
    gradient_fn,
    start: np.ndarray,
    obj_cfg: ObjectiveConfig,
    opt_cfg: OptimizerConfig,
) -> tuple[np.ndarray, ObjectiveBreakdown, list[dict]]:
    layout = evaluator.layout
    half = layout.half_width
    vec = np.clip(start, layout.lower, layout.upper)
    velocity = np.zeros(layout.size)

    current = evaluator.breakdown(vec)
    best_vec, best = vec.copy(), current
    trace = [{"iteration": 0, **current.as_dict(), "best_total": best.total}]

    for iteration in range(1, opt_cfg.iterations + 1):
        grad = gradient_fn(vec, opt_cfg.fd_step, current.total)
        scaled = grad * half
        # Clip to unit infinity-norm so the step size stays meaningful across
        # the wildly different scales the attention weight can produce.
        peak = float(np.abs(scaled).max())
        if peak > 1.0:
            scaled = scaled / peak
        velocity = opt_cfg.momentum * velocity - opt_cfg.step_size * scaled
        vec = np.clip(vec + velocity * half, layout.lower, layout.upper)
        current = evaluator.breakdown(vec)
        if not np.isfinite(current.total):
            raise NumericError(f"objective became non-finite at iteration {iteration}")
        if current.total < best.total:
            best_vec, best = vec.copy(), current
        trace.append({"iteration": iteration, **current.as_dict(), "best_total": best.total})
    return best_vec, best, trace


def _optimize_single(
    arr: np.ndarray,
    weights: np.ndarray,
    start: np.ndarray,
    obj_cfg: ObjectiveConfig,
    opt_cfg: OptimizerConfig,
    saliency_source,
    provenance_extra: dict,
) -> EditRecipe:
    descriptor = saliency_source
    picklable = descriptor is None or isinstance(descriptor, (str, ProxySaliencyConfig))
    # float32 working buffers: the search needs speed, not 1e-9 pixel math;
    # final parameters are applied through the float64 pipeline.
    evaluator = CompositeObjective(
        arr,
        weights,
        obj_cfg,
        _make_saliency_array_fn(saliency_source, None),
        dtype=np.float32,
    )
    pool = None
    if opt_cfg.workers > 1 and picklable:
        pool = _ParallelGradient(evaluator, descriptor, opt_cfg.workers)
        gradient_fn = pool
    else:
        def gradient_fn(vec, fd_step, base_total):
            return _serial_gradient(evaluator, vec, fd_step, base_total)

    prior_threads = cv2.getNumThreads()
    cv2.setNumThreads(1)
    try:
        best_vec, best, trace = _descend(evaluator, gradient_fn, start, obj_cfg, opt_cfg)
    finally:
        cv2.setNumThreads(prior_threads)
        if pool is not None:
            pool.close()

    provenance = {
        "seed": opt_cfg.seed,
        "iterations": opt_cfg.iterations,
        "mode": obj_cfg.mode,
        "objective_trace": trace,
        "final_objective": best.as_dict(),
        **provenance_extra,
    }
    return evaluator.layout.vector_to_recipe(
        best_vec, DEFAULT_PIPELINE_ORDER, obj_cfg.mode, provenance
    )


def optimize(
    image: RasterImage,
    mask: MaskLayer,
    obj_config: ObjectiveConfig | None = None,
    opt_config: OptimizerConfig | None = None,
    saliency_source=None,
) -> EditRecipe:
    """Search for the recipe minimizing the objective; deterministic per seed.

    The search runs at the configured working resolution; the returned
    parameters are resolution-independent and apply at any size.  With
    ``restarts > 1`` the best recipe across seeded restarts is returned.
    """
    obj_config = obj_config or ObjectiveConfig()
    opt_config = opt_config or OptimizerConfig()
    if opt_config.restarts > 1:
        return multi_style(
            image, mask, opt_config.restarts, opt_config.seed, obj_config, opt_config,
            saliency_source,
        )[0]
    if not mask.matches(image):
        raise MaskError("mask dimensions must match the image")
    _check_mask(mask)
    arr, weights = _prepare_working(image, mask, obj_config.working_resolution)
    layout = VectorLayout(DEFAULT_CURVE_RESOLUTION)
    return _optimize_single(
        arr, weights, layout.identity.copy(), obj_config, opt_config, saliency_source, {}
    )


def multi_style(
    image: RasterImage,
    mask: MaskLayer,
    n: int,
    seed: int | None = None,
    obj_config: ObjectiveConfig | None = None,
    opt_config: OptimizerConfig | None = None,
    saliency_source=None,
) -> list[EditRecipe]:
    """n seeded restarts from Gaussian-perturbed identity, best objective first.

    The first restart starts exactly at identity, so ``multi_style(n=1)``
    degenerates to ``optimize``.
    """
    if n < 1:
        raise RangeError("style count must be >= 1")
    obj_config = obj_config or ObjectiveConfig()
    opt_config = opt_config or OptimizerConfig()
    if seed is None:
        seed = opt_config.seed
    if not mask.matches(image):
        raise MaskError("mask dimensions must match the image")
    _check_mask(mask)

    arr, weights = _prepare_working(image, mask, obj_config.working_resolution)
    layout = VectorLayout(DEFAULT_CURVE_RESOLUTION)
    rng = np.random.default_rng(seed)
    starts = [layout.identity.copy()]
    for _ in range(n - 1):
        jitter = rng.normal(0.0, 0.1, size=layout.size) * layout.half_width
        starts.append(np.clip(layout.identity + jitter, layout.lower, layout.upper))

    single_cfg = replace(opt_config, restarts=1)
    recipes = []
    for index, start in enumerate(starts):
        recipe = _optimize_single(
            arr,
            weights,
            start,
            obj_config,
            single_cfg,
            saliency_source,
            {"restart": index, "master_seed": seed},
        )
        recipes.append(recipe)
    recipes.sort(key=lambda r: r.provenance["final_objective"]["total"])
    return recipes


def default_worker_count() -> int:
    return max(1, os.cpu_count() or 1)
