"""Sequence ingestion: frame directories, annotation files, synthetic specs.

Annotation format: one line per frame holding 8 whitespace-separated reals
``x1 y1 x2 y2 x3 y3 x4 y4`` in corner order top-left, top-right,
bottom-right, bottom-left. A single leading header line is skipped when its
first token is not numeric.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from .image import GrayImage

__all__ = [
    "IngestionError",
    "IMAGE_EXTENSIONS",
    "load_image",
    "load_frames",
    "load_ground_truth",
    "write_ground_truth",
    "load_sequence",
]

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm",
                    ".tif", ".tiff"}


class IngestionError(ValueError):
    """A sequence or annotation file could not be read as documented."""


def load_image(path) -> GrayImage:
    """Decode one image file to grayscale (luma weights for color inputs)."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            array = np.asarray(img, dtype=np.float64)
    except (OSError, ValueError) as err:
        raise IngestionError(f"cannot decode image {path}: {err}") from err
    return GrayImage.from_array(array)


def load_frames(directory) -> List[GrayImage]:
    """All image files of a directory, sorted by filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestionError(f"{directory} is not a directory")
    paths = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in IMAGE_EXTENSIONS)
    if len(paths) < 2:
        raise IngestionError(f"{directory} holds fewer than 2 image files")
    return [load_image(p) for p in paths]


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_ground_truth(path) -> np.ndarray:
    """Parse an annotation file into an (F, 4, 2) corner array."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise IngestionError(f"cannot read annotations {path}: {err}") from err
    boxes = []
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            continue
        if lineno == 1 and not _is_number(tokens[0]):
            continue  # header line
        if len(tokens) != 8:
            raise IngestionError(
                f"{path}:{lineno}: expected 8 values, got {len(tokens)}")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError as err:
            raise IngestionError(f"{path}:{lineno}: {err}") from err
        boxes.append(np.asarray(values).reshape(4, 2))
    if not boxes:
        raise IngestionError(f"{path}: no annotation lines found")
    return np.asarray(boxes)


def write_ground_truth(path, gt) -> None:
    """Write corners in the documented text format (round-trips exactly)."""
    gt = np.asarray(gt, dtype=np.float64)
    if gt.ndim != 3 or gt.shape[1:] != (4, 2):
        raise ValueError("ground truth must be (F, 4, 2)")
    with open(path, "w", encoding="utf-8") as handle:
        for box in gt:
            handle.write(" ".join(f"{v:.17g}" for v in box.ravel()) + "\n")


def load_sequence(seq_path, gt_path=None
                  ) -> Tuple[List[GrayImage], Optional[np.ndarray]]:
    """Load a frame directory (+ optional annotations) or a synthetic spec.

    A directory yields its image files; a ``.json`` file is interpreted as a
    synthetic-sequence description and rendered, in which case the exact
    generated annotations are returned and ``gt_path`` must be omitted.
    """
    seq_path = Path(seq_path)
    if seq_path.is_dir():
        frames = load_frames(seq_path)
        gt = None
        if gt_path is not None:
            gt = load_ground_truth(gt_path)
            if gt.shape[0] != len(frames):
                raise IngestionError(
                    f"{gt_path}: {gt.shape[0]} annotation lines for "
                    f"{len(frames)} frames")
        return frames, gt
    if seq_path.suffix.lower() == ".json":
        if gt_path is not None:
            raise IngestionError(
                "synthetic sequences generate their own ground truth; "
                "--gt is not applicable")
        from .synthetic import generate_synthetic, spec_from_json
        spec, seed = spec_from_json(seq_path)
        frames, gt = generate_synthetic(spec, seed=seed)
        return frames, gt
    raise IngestionError(
        f"{seq_path} is neither a frame directory nor a synthetic spec file")
