"""External saliency providers.

A provider is addressed by a SPEC string:

  exec:<command>   one subprocess invocation per image; the image is written
                   to stdin as binary PPM (P6, maxval 255) and the provider
                   responds on stdout with a raw map as binary PGM (P5)
  http:<url>       POST the image as a PNG body; the response body is the PGM

The returned raw map may be at any resolution and any positive scale; it is
z-scored and softmax-normalized before use, so providers only need to get
the relative ordering right.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass

import requests

from .errors import ImageFormatError, ProviderError
from .fileio import decode_pgm, encode_png, encode_ppm
from .imaging import RasterImage
from .saliency import SaliencyMap, normalize_softmax

DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class ProviderSpec:
    transport: str  # "exec" | "http"
    target: str
    timeout: float = DEFAULT_TIMEOUT


def parse_provider_spec(spec: str, timeout: float = DEFAULT_TIMEOUT) -> ProviderSpec:
    transport, sep, target = spec.partition(":")
    if not sep or transport not in ("exec", "http") or not target:
        raise ProviderError(
            f"provider spec must look like 'exec:<command>' or 'http:<url>', got {spec!r}"
        )
    if transport == "http" and not target.startswith(("http://", "https://")):
        target = "http:" + target if target.startswith("//") else spec
    return ProviderSpec(transport=transport, target=target, timeout=timeout)


def _query_exec(spec: ProviderSpec, image: RasterImage) -> bytes:
    argv = shlex.split(spec.target)
    try:
        result = subprocess.run(
            argv,
            input=encode_ppm(image),
            capture_output=True,
            timeout=spec.timeout,
        )
    except subprocess.TimeoutExpired as exc:
        raise ProviderError(f"provider {spec.target!r} timed out after {spec.timeout}s") from exc
    except OSError as exc:
        raise ProviderError(f"provider {spec.target!r} failed to start: {exc}") from exc
    if result.returncode != 0:
        detail = result.stderr.decode("utf-8", "replace").strip()
        raise ProviderError(f"provider {spec.target!r} exited {result.returncode}: {detail}")
    return result.stdout


def _query_http(spec: ProviderSpec, image: RasterImage) -> bytes:
    try:
        response = requests.post(
            spec.target,
            data=encode_png(image),
            headers={"Content-Type": "image/png"},
            timeout=spec.timeout,
        )
    except requests.RequestException as exc:
        raise ProviderError(f"provider {spec.target!r} unreachable: {exc}") from exc
    if response.status_code != 200:
        raise ProviderError(f"provider {spec.target!r} returned HTTP {response.status_code}")
    return response.content


def query_provider(
    spec: ProviderSpec | str,
    image: RasterImage,
    temperature: float = 1.0,
) -> SaliencyMap:
    """Send the image to the provider and softmax-normalize its raw map."""
    if isinstance(spec, str):
        spec = parse_provider_spec(spec)
    payload = _query_exec(spec, image) if spec.transport == "exec" else _query_http(spec, image)
    try:
        raw = decode_pgm(payload)
    except ImageFormatError as exc:
        raise ProviderError(f"provider returned an invalid map: {exc}") from exc
    return normalize_softmax(raw, temperature)
