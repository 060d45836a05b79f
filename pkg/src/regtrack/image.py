"""Grayscale image container with sub-pixel access, smoothing and grid sampling.

Everything downstream (warps, appearance models, optimizers) works on patches
sampled from these images, so the conventions fixed here matter: intensities
are float64 in [0, 255], coordinates are (x, y) with x along columns, and
out-of-bounds reads clamp to the image border so that a tracker which
transiently leaves the frame still sees a well-defined signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class GeometryError(ValueError):
    """A geometric construction (grid, quadrilateral, warp) is degenerate."""


class GrayImage:
    """Single-channel image of float64 intensities supporting sub-pixel reads."""

    __slots__ = ("pixels", "height", "width")

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=np.float64)
        if pixels.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {pixels.shape}")
        if pixels.shape[0] < 2 or pixels.shape[1] < 2:
            raise ValueError(f"image must be at least 2x2, got {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("image contains non-finite intensities")
        self.pixels = pixels
        self.height, self.width = pixels.shape

    @classmethod
    def from_array(cls, array: np.ndarray) -> "GrayImage":
        """Build from a 2-D gray or 3-D color array (luma conversion)."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 3:
            array = array[..., :3] @ LUMA_WEIGHTS
        return cls(array)

    def __repr__(self) -> str:  # pragma: no cover
        return f"GrayImage({self.width}x{self.height})"


@dataclass
class Patch:
    """Sampled intensities plus the coordinates they were read from."""

    values: np.ndarray  # (N,)
    coords: np.ndarray  # (N, 2)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.values.shape[0] != self.coords.shape[0]:
            raise ValueError("patch values and coords disagree in length")

    def __len__(self) -> int:
        return self.values.shape[0]


def _as_coords(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"expected (N, 2) coordinates, got shape {coords.shape}")
    if coords.shape[0] == 0:
        raise ValueError("empty coordinate set")
    if not np.all(np.isfinite(coords)):
        raise ValueError("non-finite coordinates")
    return coords


def _bilinear(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorised bilinear read with border clamping."""
    h, w = pixels.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs), w - 2).astype(np.intp)
    y0 = np.minimum(np.floor(ys), h - 2).astype(np.intp)
    fx = xs - x0
    fy = ys - y0
    top = (1.0 - fx) * pixels[y0, x0] + fx * pixels[y0, x0 + 1]
    bottom = (1.0 - fx) * pixels[y0 + 1, x0] + fx * pixels[y0 + 1, x0 + 1]
    return (1.0 - fy) * top + fy * bottom


def sample_bilinear(img: GrayImage, pt) -> float:
    """Bilinearly interpolated intensity at a single (x, y) location.

    Coordinates outside the image are clamped to the border. Integer
    coordinates return the exact pixel value.
    """
    pt = np.asarray(pt, dtype=np.float64)
    if pt.shape != (2,):
        raise ValueError(f"expected an (x, y) pair, got shape {pt.shape}")
    if not np.all(np.isfinite(pt)):
        raise ValueError("non-finite coordinate")
    return float(_bilinear(img.pixels, pt[0:1], pt[1:2])[0])


def extract_patch(img: GrayImage, coords) -> Patch:
    """Sample the image at every coordinate of an (N, 2) grid."""
    coords = _as_coords(coords)
    values = _bilinear(img.pixels, coords[:, 0], coords[:, 1])
    return Patch(values=values, coords=coords)


def gaussian_kernel(sigma: float = 1.0, radius: int = 2) -> np.ndarray:
    """Normalised 1-D Gaussian taps covering [-radius, radius]."""
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (offsets / sigma) ** 2)
    return taps / taps.sum()


def gaussian_smooth(img: GrayImage, sigma: float = 1.0) -> GrayImage:
    """Separable 5x5 Gaussian blur with border replication."""
    kernel = gaussian_kernel(sigma=sigma, radius=2)
    padded = np.pad(img.pixels, 2, mode="edge")
    rows = sum(kernel[k] * padded[:, k:k + img.width] for k in range(5))
    out = sum(kernel[k] * rows[k:k + img.height, :] for k in range(5))
    return GrayImage(out)


def image_gradient(img: GrayImage, coords, step: float = 1.0) -> np.ndarray:
    """Per-point central-difference intensity gradient, shape (N, 2).

    Column 0 holds dI/dx and column 1 dI/dy, both computed from bilinear
    reads displaced by ``step`` pixels (so the result is exact on images
    that are linear in x and y).
    """
    coords = _as_coords(coords)
    xs, ys = coords[:, 0], coords[:, 1]
    px = img.pixels
    gx = (_bilinear(px, xs + step, ys) - _bilinear(px, xs - step, ys)) / (2.0 * step)
    gy = (_bilinear(px, xs, ys + step) - _bilinear(px, xs, ys - step)) / (2.0 * step)
    return np.column_stack([gx, gy])


def _segments_cross(a, b, c, d) -> bool:
    """True if open segments ab and cd properly intersect."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def validate_quad(corners) -> np.ndarray:
    """Check that 4 ordered corners form a usable quadrilateral."""
    corners = np.asarray(corners, dtype=np.float64)
    if corners.shape != (4, 2):
        raise ValueError(f"expected 4 corner points, got shape {corners.shape}")
    if not np.all(np.isfinite(corners)):
        raise GeometryError("non-finite corner coordinates")
    x, y = corners[:, 0], corners[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    if area < 1e-9:
        raise GeometryError("degenerate quadrilateral (zero area)")
    if _segments_cross(corners[0], corners[1], corners[2], corners[3]) or \
            _segments_cross(corners[1], corners[2], corners[3], corners[0]):
        raise GeometryError("self-intersecting quadrilateral")
    return corners


def unit_square_to_quad(corners) -> np.ndarray:
    """Homography matrix mapping the unit square to 4 ordered corners.

    Corner order is top-left, top-right, bottom-right, bottom-left, i.e. the
    images of (0,0), (1,0), (1,1), (0,1). Uses the closed-form projective
    mapping; the affine branch handles parallelogram targets exactly.
    """
    corners = validate_quad(corners)
    (x0, y0), (x1, y1), (x2, y2), (x3, y3) = corners
    sx = x0 - x1 + x2 - x3
    sy = y0 - y1 + y2 - y3
    if abs(sx) < 1e-12 and abs(sy) < 1e-12:
        return np.array([
            [x1 - x0, x3 - x0, x0],
            [y1 - y0, y3 - y0, y0],
            [0.0, 0.0, 1.0],
        ])
    dx1, dx2 = x1 - x2, x3 - x2
    dy1, dy2 = y1 - y2, y3 - y2
    den = dx1 * dy2 - dx2 * dy1
    if abs(den) < 1e-12:
        raise GeometryError("degenerate quadrilateral for projective mapping")
    g = (sx * dy2 - dx2 * sy) / den
    h = (dx1 * sy - sx * dy1) / den
    return np.array([
        [x1 - x0 + g * x1, x3 - x0 + h * x3, x0],
        [y1 - y0 + g * y1, y3 - y0 + h * y3, y0],
        [g, h, 1.0],
    ])


def apply_homography(matrix: np.ndarray, points) -> np.ndarray:
    """Apply a 3x3 homogeneous transform to (N, 2) points."""
    points = np.asarray(points, dtype=np.float64)
    ph = np.column_stack([points, np.ones(points.shape[0])])
    mapped = ph @ matrix.T
    w = mapped[:, 2]
    if np.any(np.abs(w) < 1e-12):
        raise GeometryError("point mapped to the plane at infinity")
    return mapped[:, :2] / w[:, None]


def sampling_grid(corners, res_x: int, res_y: int) -> np.ndarray:
    """Uniform res_x x res_y grid over a quadrilateral, row-major, shape (N, 2).

    Grid nodes on the unit square are pushed through the square-to-quad
    homography, so for an axis-aligned rectangle this reduces to a uniform
    lattice and for a generic quadrilateral the rows converge projectively.
    """
    if res_x < 2 or res_y < 2:
        raise ValueError("sampling resolution must be at least 2x2")
    matrix = unit_square_to_quad(corners)
    u = np.linspace(0.0, 1.0, res_x)
    v = np.linspace(0.0, 1.0, res_y)
    uu, vv = np.meshgrid(u, v)
    unit_points = np.column_stack([uu.ravel(), vv.ravel()])
    return apply_homography(matrix, unit_points)
