"""Image and mask file I/O plus the netpbm codecs used by the provider protocol.

8-bit channels map to [0, 1] as v/255 (16-bit as v/65535); saving quantizes
with round(v*255), so a save/load round trip moves any pixel by at most 1/510.
"""

from __future__ import annotations

import io
import logging
import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError, ShapeError
from .imaging import MaskLayer, RasterImage, luminance_array, resize_bilinear

logger = logging.getLogger(__name__)

_SAVE_SUFFIXES = {".png", ".ppm"}


def _from_pil(img: Image.Image) -> np.ndarray:
    """Decode to float64 RGB in [0, 1], scaling by the source bit depth."""
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
        return np.repeat(arr[..., None], 3, axis=2)
    if img.mode == "CMYK":
        raise ImageFormatError("CMYK images are not supported; convert to RGB first")
    if img.mode not in ("RGB", "L"):
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    return arr


def load_image(path: str | Path) -> RasterImage:
    """Load a PNG, PPM (P6), or JPEG file."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.format not in ("PNG", "PPM", "JPEG"):
                raise ImageFormatError(f"{path}: unsupported format {img.format}")
            return RasterImage(_from_pil(img))
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc


def save_image(image: RasterImage, path: str | Path) -> None:
    """Write PNG or PPM (chosen by extension); pixels quantize to round(v*255)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in _SAVE_SUFFIXES:
        raise ImageFormatError(f"{path}: output must be .png or .ppm")
    data = quantize_u8(image.data)
    if suffix == ".ppm":
        path.write_bytes(encode_ppm(image))
        return
    Image.fromarray(data, mode="RGB").save(path, format="PNG", optimize=False)


def encode_png(image: RasterImage) -> bytes:
    """In-memory PNG bytes; the single encoder shared by CLI and service."""
    buf = io.BytesIO()
    Image.fromarray(quantize_u8(image.data), mode="RGB").save(
        buf, format="PNG", optimize=False
    )
    return buf.getvalue()


def decode_png(data: bytes) -> RasterImage:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return RasterImage(_from_pil(img))
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageFormatError(f"undecodable image payload: {exc}") from exc


def quantize_u8(arr: np.ndarray) -> np.ndarray:
    scaled = arr * np.asarray(255.0, dtype=arr.dtype)
    np.rint(scaled, out=scaled)
    np.clip(scaled, 0, 255, out=scaled)
    return scaled.astype(np.uint8)


def load_mask(
    path: str | Path,
    match: tuple[int, int] | None = None,
    allow_resize: bool = False,
) -> MaskLayer:
    """Load a grayscale or RGB mask; RGB collapses via luminance.

    ``match`` is the paired image's (height, width).  On mismatch the mask is
    bilinearly resized when ``allow_resize`` is set (with a warning), and
    rejected otherwise.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = _from_pil(img)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc
    weights = luminance_array(arr) if not _is_gray(arr) else arr[..., 0]
    if match is not None and weights.shape != tuple(match):
        if not allow_resize:
            raise ShapeError(
                f"{path}: mask is {weights.shape[1]}x{weights.shape[0]} but the "
                f"image is {match[1]}x{match[0]} (pass allow_resize to resample)"
            )
        logger.warning(
            "resizing mask %s from %dx%d to %dx%d",
            path,
            weights.shape[1],
            weights.shape[0],
            match[1],
            match[0],
        )
        weights = resize_bilinear(weights, match[0], match[1])
    return MaskLayer(np.clip(weights, 0.0, 1.0))


def _is_gray(arr: np.ndarray) -> bool:
    return bool(
        np.array_equal(arr[..., 0], arr[..., 1]) and np.array_equal(arr[..., 0], arr[..., 2])
    )


# ---------------------------------------------------------------------------
# Binary netpbm codecs (provider wire format)
# ---------------------------------------------------------------------------


def encode_ppm(image: RasterImage) -> bytes:
    """Binary P6, maxval 255."""
    data = quantize_u8(image.data)
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + data.tobytes()


def encode_pgm(values: np.ndarray, maxval: int = 255) -> bytes:
    """Binary P5 from a float array, min-max scaled to [0, maxval]."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    scaled = np.zeros_like(values) if hi == lo else (values - lo) / (hi - lo)
    h, w = values.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        payload = np.round(scaled * maxval).astype(">u2").tobytes()
    else:
        payload = np.round(scaled * maxval).astype(np.uint8).tobytes()
    return header + payload


_PNM_TOKEN = re.compile(rb"(?:\s*(?:#[^\n]*\n)?)*(\S+)")


def _read_pnm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    for _ in range(count):
        m = _PNM_TOKEN.match(data, pos)
        if not m:
            raise ImageFormatError("truncated netpbm header")
        tokens.append(m.group(1))
        pos = m.end()
    # Exactly one whitespace byte separates the header from the payload.
    if pos >= len(data) or data[pos : pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise ImageFormatError("malformed netpbm header")
    return tokens, pos + 1


def decode_pgm(data: bytes) -> np.ndarray:
    """Binary P5 to a float array in [0, 1]; accepts maxval up to 65535."""
    (magic, w, h, maxval), pos = _read_pnm_tokens(data, 4)
    if magic != b"P5":
        raise ImageFormatError(f"expected P5 magic, got {magic!r}")
    width, height, maxval = int(w), int(h), int(maxval)
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise ImageFormatError("invalid PGM dimensions or maxval")
    n = width * height
    payload = data[pos:]
    if maxval > 255:
        if len(payload) != 2 * n:
            raise ImageFormatError(
                f"PGM payload is {len(payload)} bytes, expected {2 * n}"
            )
        arr = np.frombuffer(payload, dtype=">u2").astype(np.float64)
    else:
        if len(payload) != n:
            raise ImageFormatError(f"PGM payload is {len(payload)} bytes, expected {n}")
        arr = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    return (arr / maxval).reshape(height, width)


def decode_ppm(data: bytes) -> RasterImage:
    """Binary P6 to a RasterImage; accepts maxval up to 65535."""
    (magic, w, h, maxval), pos = _read_pnm_tokens(data, 4)
    if magic != b"P6":
        raise ImageFormatError(f"expected P6 magic, got {magic!r}")
    width, height, maxval = int(w), int(h), int(maxval)
    n = width * height * 3
    payload = data[pos:]
    if maxval > 255:
        if len(payload) != 2 * n:
            raise ImageFormatError("truncated PPM payload")
        arr = np.frombuffer(payload, dtype=">u2").astype(np.float64)
    else:
        if len(payload) != n:
            raise ImageFormatError("truncated PPM payload")
        arr = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    return RasterImage((arr / maxval).reshape(height, width, 3))
