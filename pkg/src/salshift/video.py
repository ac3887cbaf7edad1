"""Frame-sequence processing: one fixed recipe applied across a video.

The recipe is typically optimized on the first frame; applying the same
parameters to every frame (with that frame's mask) is what gives temporal
stability.  Frames are paired with masks by natural sort order.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import VideoError
from .fileio import load_image, load_mask, save_image
from .imaging import EditRecipe, render_edit

_IMAGE_SUFFIXES = {".png", ".ppm", ".jpg", ".jpeg"}


def natural_key(name: str):
    return [int(part) if part.isdigit() else part.lower() for part in re.split(r"(\d+)", name)]


def list_frames(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    files = [p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES]
    return sorted(files, key=lambda p: natural_key(p.name))


@dataclass
class FrameSequence:
    """Ordered (frame path, mask path) pairs; playback order is natural sort."""

    pairs: list[tuple[Path, Path]]

    @classmethod
    def from_directories(cls, frames_dir: str | Path, masks_dir: str | Path) -> "FrameSequence":
        frames = list_frames(frames_dir)
        masks = list_frames(masks_dir)
        if not frames:
            raise VideoError(f"no frames found in {frames_dir}")
        if len(frames) != len(masks):
            raise VideoError(
                f"frame/mask counts differ: {len(frames)} frames, {len(masks)} masks"
            )
        return cls(pairs=list(zip(frames, masks)))

    def __len__(self) -> int:
        return len(self.pairs)


def _output_name(frame_path: Path) -> str:
    # Editing output is written losslessly; JPEG sources come back as PNG.
    if frame_path.suffix.lower() in (".jpg", ".jpeg"):
        return frame_path.stem + ".png"
    return frame_path.name


def video_apply(
    frames: FrameSequence,
    recipe: EditRecipe,
    out_dir: str | Path,
    max_workers: int = 4,
) -> int:
    """Composite every frame with its mask under the single fixed recipe.

    Outputs are named like the inputs.  Any unreadable frame aborts the run
    with the failing index.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(index: int) -> int:
        frame_path, mask_path = frames.pairs[index]
        try:
            image = load_image(frame_path)
            mask = load_mask(mask_path, match=(image.height, image.width), allow_resize=False)
            edited = render_edit(image, mask, recipe)
            save_image(edited, out_dir / _output_name(frame_path))
        except Exception as exc:
            raise VideoError(f"frame {index} ({frame_path.name}): {exc}") from exc
        return index

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for _ in pool.map(process, range(len(frames))):
            pass
    return len(frames)
