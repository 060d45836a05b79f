"""Synthetic sequences with exact ground truth.

Each frame renders a source image inverse-warped by a scripted trajectory,
optionally followed by a per-frame gain/bias change and additive Gaussian
noise. The annotated corners are the trajectory applied to the initial box,
so the ground truth is exact by construction and any tracking error is the
tracker's own.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from . import ssm
from .image import GeometryError, GrayImage, _bilinear, validate_quad
from .sm import gaussian_param_sigmas

__all__ = [
    "texture_image",
    "SyntheticSpec",
    "random_walk_motion",
    "translation_jump_motion",
    "generate_synthetic",
    "spec_from_json",
]


def texture_image(width: int, height: int, seed: int = 0,
                  scales: Sequence[float] = (2.0, 8.0, 24.0),
                  weights: Optional[Sequence[float]] = None,
                  low: float = 40.0, high: float = 215.0) -> GrayImage:
    """Deterministic multi-scale random texture, intensities in [low, high].

    Smoothed white noise at several correlation lengths, so there is both
    fine detail for precision and large-scale structure for a usable basin
    of convergence.
    """
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = [1.0] * len(scales)
    acc = np.zeros((height, width))
    for sigma, weight in zip(scales, weights):
        layer = gaussian_filter(rng.standard_normal((height, width)), sigma,
                                mode="reflect")
        spread = layer.std()
        if spread > 0:
            acc += weight * layer / spread
    lo, hi = acc.min(), acc.max()
    if hi - lo < 1e-12:
        return GrayImage(np.full((height, width), 0.5 * (low + high)))
    return GrayImage(low + (acc - lo) * (high - low) / (hi - lo))


@dataclass
class SyntheticSpec:
    """A source image, an initial box, and an absolute warp per frame."""

    source: GrayImage
    corners: np.ndarray                       # (4, 2) initial box
    motions: List[ssm.WarpParams]             # motions[0] is the identity
    gain_range: Tuple[float, float] = (1.0, 1.0)
    bias_range: Tuple[float, float] = (0.0, 0.0)
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.corners = validate_quad(self.corners)
        if not self.motions:
            raise ValueError("motion script is empty")


def _box_inside(corners: np.ndarray, width: int, height: int,
                margin: float) -> bool:
    return bool(np.all(corners[:, 0] >= margin)
                and np.all(corners[:, 0] <= width - 1 - margin)
                and np.all(corners[:, 1] >= margin)
                and np.all(corners[:, 1] <= height - 1 - margin))


def translation_jump_motion(corners, n_frames: int, step_px: float, seed: int,
                            frame_size: Tuple[int, int],
                            margin: float = 5.0) -> List[ssm.WarpParams]:
    """Pure-translation trajectory jumping exactly step_px per frame.

    Directions are uniform at random; a jump that would push the box out of
    the frame is redrawn, so the walk stays inside the margins.
    """
    corners = validate_quad(corners)
    width, height = frame_size
    rng = np.random.default_rng(seed)
    offset = np.zeros(2)
    motions = [ssm.identity_params("translation")]
    for _ in range(n_frames - 1):
        for _ in range(64):
            angle = rng.uniform(0.0, 2.0 * np.pi)
            jump = step_px * np.array([np.cos(angle), np.sin(angle)])
            if _box_inside(corners + offset + jump, width, height, margin):
                offset = offset + jump
                break
        motions.append(ssm.WarpParams("translation", offset.copy()))
    return motions


def random_walk_motion(kind: str, corners, n_frames: int, step_px: float,
                       seed: int, frame_size: Tuple[int, int],
                       margin: float = 5.0) -> List[ssm.WarpParams]:
    """Incremental random warp walk with ~step_px RMS corner motion per frame."""
    corners = validate_quad(corners)
    width, height = frame_size
    rng = np.random.default_rng(seed)
    sigmas = gaussian_param_sigmas(kind, corners, step_px)
    identity = ssm.identity_params(
        kind, ref=corners if kind == "corners" else None)
    current = identity
    motions = [identity]
    for _ in range(n_frames - 1):
        accepted = None
        for _ in range(64):
            jump = identity.with_values(
                identity.values + rng.normal(size=identity.values.shape) * sigmas)
            try:
                candidate = ssm.compose(current, jump)
                box = ssm.params_to_corners(candidate, corners)
                validate_quad(box)
            except (GeometryError, ValueError):
                continue
            if _box_inside(box, width, height, margin):
                accepted = candidate
                break
        current = accepted if accepted is not None else current
        motions.append(current)
    return motions


def generate_synthetic(spec: SyntheticSpec,
                       seed: int = 0) -> Tuple[List[GrayImage], np.ndarray]:
    """Render the scripted sequence; returns (frames, ground truth corners).

    Frame t is the source sampled through the inverse of motion t, so the
    patch under the annotated corners of frame t reproduces the source patch
    under the initial box (up to the photometric perturbation and noise).
    """
    rng = np.random.default_rng(seed)
    height, width = spec.source.height, spec.source.width
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    pixel_grid = np.column_stack([xs.ravel(), ys.ravel()])
    ones = np.ones(pixel_grid.shape[0])

    frames = []
    boxes = []
    for motion in spec.motions:
        matrix = ssm.matrix_from_params(motion)
        inverse = np.linalg.inv(matrix)
        mapped = np.column_stack([pixel_grid, ones]) @ inverse.T
        w = mapped[:, 2]
        if np.any(np.abs(w) < 1e-9):
            raise GeometryError("trajectory warp is degenerate over the frame")
        sample_x = mapped[:, 0] / w
        sample_y = mapped[:, 1] / w
        rendered = _bilinear(spec.source.pixels, sample_x, sample_y)
        rendered = rendered.reshape(height, width)
        gain = rng.uniform(*spec.gain_range)
        bias = rng.uniform(*spec.bias_range)
        rendered = gain * rendered + bias
        if spec.noise_sigma > 0:
            rendered = rendered + rng.normal(0.0, spec.noise_sigma,
                                             size=rendered.shape)
        frames.append(GrayImage(np.clip(rendered, 0.0, 255.0)))
        boxes.append(ssm.warp_points(motion, spec.corners))
    return frames, np.asarray(boxes)


def spec_from_json(path) -> Tuple[SyntheticSpec, int]:
    """Load a synthetic-sequence description file.

    Schema (JSON object):
      source:  {"texture": {"width", "height", "seed"}} or {"file": path}
      corners: [[x, y] * 4] initial box, clockwise from top-left
      frames:  frame count
      motion:  {"kind": "random_walk", "ssm", "step_px", "seed"}
               {"kind": "translation_jumps", "step_px", "seed"}
               {"kind": "params", "ssm", "per_frame": [[...], ...]}
      gain_range, bias_range, noise_sigma, seed: optional photometric fields
    Returns the spec plus the rendering seed.
    """
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    try:
        source_spec = data["source"]
        corners = np.asarray(data["corners"], dtype=np.float64)
        n_frames = int(data["frames"])
    except KeyError as err:
        raise ValueError(f"synthetic spec is missing field {err}") from err

    if "texture" in source_spec:
        t = source_spec["texture"]
        source = texture_image(int(t["width"]), int(t["height"]),
                               seed=int(t.get("seed", 0)))
    elif "file" in source_spec:
        from .sequences import load_image
        source = load_image(source_spec["file"])
    else:
        raise ValueError("synthetic source must give 'texture' or 'file'")

    motion = data.get("motion", {"kind": "random_walk", "ssm": "translation",
                                 "step_px": 1.0, "seed": 0})
    frame_size = (source.width, source.height)
    kind = motion.get("kind", "random_walk")
    if kind == "random_walk":
        motions = random_walk_motion(motion.get("ssm", "translation"), corners,
                                     n_frames, float(motion.get("step_px", 1.0)),
                                     int(motion.get("seed", 0)), frame_size)
    elif kind == "translation_jumps":
        motions = translation_jump_motion(corners, n_frames,
                                          float(motion.get("step_px", 1.0)),
                                          int(motion.get("seed", 0)), frame_size)
    elif kind == "params":
        ssm_kind = motion["ssm"]
        ref = corners if ssm_kind == "corners" else None
        motions = [ssm.WarpParams(ssm_kind, np.asarray(row, dtype=np.float64),
                                  ref)
                   for row in motion["per_frame"]]
        if len(motions) != n_frames:
            raise ValueError("per_frame motion length disagrees with 'frames'")
    else:
        raise ValueError(f"unknown motion kind {kind!r}")

    spec = SyntheticSpec(
        source=source,
        corners=corners,
        motions=motions,
        gain_range=tuple(data.get("gain_range", (1.0, 1.0))),
        bias_range=tuple(data.get("bias_range", (0.0, 0.0))),
        noise_sigma=float(data.get("noise_sigma", 0.0)),
    )
    return spec, int(data.get("seed", 0))
