"""Versioned JSON persistence for edit recipes.

Version 1 documents are strict: unknown fields anywhere are rejected, and
out-of-range values fail with the offending field path.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import RecipeFormatError
from .imaging import (
    CONTRAST_RANGE,
    CURVE_RANGE,
    EXPOSURE_RANGE,
    SHARPNESS_RANGE,
    STAGE_NAMES,
    EditRecipe,
    ParamSet,
)

DOCUMENT_VERSION = 1
TOOL_VERSION = "0.1.0"

_SCALAR_RANGES = {
    "sharpness": SHARPNESS_RANGE,
    "exposure": EXPOSURE_RANGE,
    "contrast": CONTRAST_RANGE,
}


def _params_to_dict(params: ParamSet) -> dict:
    return {
        "sharpness": params.sharpness,
        "exposure": params.exposure,
        "contrast": params.contrast,
        "tone": [float(v) for v in params.tone],
        "color": {
            "r": [float(v) for v in params.color[0]],
            "g": [float(v) for v in params.color[1]],
            "b": [float(v) for v in params.color[2]],
        },
    }


def serialize_recipe(recipe: EditRecipe) -> dict:
    provenance = recipe.provenance or {}
    return {
        "version": DOCUMENT_VERSION,
        "curve_resolution": recipe.curve_resolution,
        "pipeline_order": list(recipe.pipeline_order),
        "mode": recipe.mode,
        "foreground": _params_to_dict(recipe.foreground),
        "background": _params_to_dict(recipe.background),
        "provenance": {
            "seed": provenance.get("seed"),
            "iterations": provenance.get("iterations"),
            "tool_version": provenance.get("tool_version", TOOL_VERSION),
        },
    }


def recipe_to_json(recipe: EditRecipe) -> str:
    return json.dumps(serialize_recipe(recipe), indent=2)


def _require_keys(obj: dict, allowed: set, path: str) -> None:
    if not isinstance(obj, dict):
        raise RecipeFormatError(f"{path or 'document'}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise RecipeFormatError(
            f"{path or 'document'}: unknown field(s) {sorted(unknown)} "
            f"(version {DOCUMENT_VERSION} documents are strict)"
        )
    missing = allowed - set(obj)
    if missing:
        raise RecipeFormatError(f"{path or 'document'}: missing field(s) {sorted(missing)}")


def _check_number(value, lo: float, hi: float, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecipeFormatError(f"{path}: expected a number")
    value = float(value)
    if not np.isfinite(value) or value < lo or value > hi:
        raise RecipeFormatError(f"{path}: {value} is outside [{lo}, {hi}]")
    return value


def _parse_curve(values, resolution: int, path: str) -> np.ndarray:
    if not isinstance(values, list) or len(values) != resolution:
        raise RecipeFormatError(f"{path}: expected a list of {resolution} values")
    lo, hi = CURVE_RANGE
    return np.array([_check_number(v, lo, hi, f"{path}[{i}]") for i, v in enumerate(values)])


def _parse_params(obj, resolution: int, path: str) -> ParamSet:
    _require_keys(obj, {"sharpness", "exposure", "contrast", "tone", "color"}, path)
    scalars = {
        name: _check_number(obj[name], lo, hi, f"{path}.{name}")
        for name, (lo, hi) in _SCALAR_RANGES.items()
    }
    tone = _parse_curve(obj["tone"], resolution, f"{path}.tone")
    _require_keys(obj["color"], {"r", "g", "b"}, f"{path}.color")
    color = np.stack(
        [
            _parse_curve(obj["color"][ch], resolution, f"{path}.color.{ch}")
            for ch in ("r", "g", "b")
        ]
    )
    return ParamSet(tone=tone, color=color, **scalars)


def parse_recipe(document: dict | str) -> EditRecipe:
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise RecipeFormatError(f"invalid JSON: {exc}") from exc
    _require_keys(
        document,
        {
            "version",
            "curve_resolution",
            "pipeline_order",
            "mode",
            "foreground",
            "background",
            "provenance",
        },
        "",
    )
    if document["version"] != DOCUMENT_VERSION:
        raise RecipeFormatError(
            f"version: unsupported document version {document['version']!r}"
        )
    resolution = document["curve_resolution"]
    if not isinstance(resolution, int) or resolution < 2:
        raise RecipeFormatError("curve_resolution: expected an integer >= 2")
    order = document["pipeline_order"]
    if not isinstance(order, list) or sorted(order) != sorted(STAGE_NAMES):
        raise RecipeFormatError(
            f"pipeline_order: must be a permutation of {list(STAGE_NAMES)}"
        )
    mode = document["mode"]
    if mode not in ("increase", "decrease"):
        raise RecipeFormatError("mode: must be 'increase' or 'decrease'")
    provenance = document["provenance"]
    _require_keys(provenance, {"seed", "iterations", "tool_version"}, "provenance")
    return EditRecipe(
        foreground=_parse_params(document["foreground"], resolution, "foreground"),
        background=_parse_params(document["background"], resolution, "background"),
        pipeline_order=tuple(order),
        mode=mode,
        provenance=dict(provenance),
    )


def save_recipes(recipes: list[EditRecipe] | EditRecipe, path: str | Path) -> None:
    """Write one document, or a JSON array when given several recipes."""
    if isinstance(recipes, EditRecipe):
        payload = serialize_recipe(recipes)
    else:
        payload = [serialize_recipe(r) for r in recipes]
    Path(path).write_text(json.dumps(payload, indent=2))


def load_recipes(path: str | Path) -> list[EditRecipe]:
    """Read a recipe file holding either one document or an array of them."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RecipeFormatError(f"{path}: {exc}") from exc
    documents = payload if isinstance(payload, list) else [payload]
    if not documents:
        raise RecipeFormatError(f"{path}: empty recipe array")
    return [parse_recipe(doc) for doc in documents]
