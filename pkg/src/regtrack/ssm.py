"""Parametric 2-D warps: actions, Jacobians, composition and point fitting.

Seven parameterizations are supported. Five come from the standard hierarchy
of planar transforms (translation, isometry, similitude, affine, homography)
and two are alternative 8-DOF parameterizations of the projective group:
``sl3`` (coefficients on a traceless generator basis, mapped through the
matrix exponential) and ``corners`` (the warped positions of a reference
box's four corners, turned into a homography on demand).

All kinds compose exactly through 3x3 matrix products; parameter vectors are
recovered from matrices afterwards, so the group laws hold at the level of
the warp action.

Conventions:
  * points are (N, 2) arrays of (x, y);
  * similitude stores log-scale so Newton steps stay unconstrained;
  * affine/homography store raw matrix entries (h33 fixed at 1);
  * the ``corners`` kind carries its reference box on the parameter object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm, expm_frechet, logm

from .image import GeometryError, apply_homography, validate_quad

__all__ = [
    "FitError",
    "GeometryError",
    "WarpParams",
    "SSM_KINDS",
    "PARAM_COUNTS",
    "MIN_FIT_POINTS",
    "identity_params",
    "matrix_from_params",
    "params_from_matrix",
    "warp_points",
    "compose",
    "invert",
    "warp_jacobian",
    "params_from_points",
    "params_to_corners",
]

SSM_KINDS = ("translation", "isometry", "similitude", "affine",
             "homography", "sl3", "corners")

PARAM_COUNTS = {
    "translation": 2,
    "isometry": 3,
    "similitude": 4,
    "affine": 6,
    "homography": 8,
    "sl3": 8,
    "corners": 8,
}

HOMOGRAPHY_FAMILY = ("homography", "sl3", "corners")

MIN_FIT_POINTS = {
    "translation": 1,
    "isometry": 2,
    "similitude": 2,
    "affine": 3,
    "homography": 4,
    "sl3": 4,
    "corners": 4,
}

# Traceless generators of the projective group: x/y translation, rotation,
# isotropic scale, stretch, shear, and the two projective directions.
SL3_BASIS = np.array([
    [[0, 0, 1], [0, 0, 0], [0, 0, 0]],
    [[0, 0, 0], [0, 0, 1], [0, 0, 0]],
    [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
    [[1, 0, 0], [0, 1, 0], [0, 0, -2]],
    [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
    [[0, 0, 0], [0, 0, 0], [1, 0, 0]],
    [[0, 0, 0], [0, 0, 0], [0, 1, 0]],
], dtype=np.float64)

# Unit square, corner order TL, TR, BR, BL. Default reference box for the
# corners parameterization when none is supplied.
UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


class FitError(ValueError):
    """Point configuration does not determine the requested warp."""


@dataclass(frozen=True)
class WarpParams:
    """A warp of one of the supported kinds.

    ``values`` has the kind's parameter count. For the corners kind ``ref``
    holds the reference box whose corner images the values are; other kinds
    leave it None.
    """

    kind: str
    values: np.ndarray
    ref: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.kind not in PARAM_COUNTS:
            raise ValueError(f"unknown SSM kind {self.kind!r}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (PARAM_COUNTS[self.kind],):
            raise ValueError(
                f"{self.kind} expects {PARAM_COUNTS[self.kind]} parameters, "
                f"got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite warp parameters")
        object.__setattr__(self, "values", values)
        if self.kind == "corners":
            if self.ref is None:
                object.__setattr__(self, "ref", UNIT_SQUARE.copy())
            else:
                object.__setattr__(self, "ref", validate_quad(self.ref))
        elif self.ref is not None:
            raise ValueError(f"kind {self.kind!r} does not take a reference box")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "WarpParams":
        return WarpParams(self.kind, values, self.ref)


def identity_params(kind: str, ref=None) -> WarpParams:
    """Parameters whose warp is the identity map.

    For the corners kind the identity is the reference box itself (defaults
    to the unit square when no box is given).
    """
    if kind == "translation":
        values = np.zeros(2)
    elif kind == "isometry":
        values = np.zeros(3)
    elif kind == "similitude":
        values = np.zeros(4)
    elif kind == "affine":
        values = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    elif kind == "homography":
        values = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    elif kind == "sl3":
        values = np.zeros(8)
    elif kind == "corners":
        box = UNIT_SQUARE if ref is None else np.asarray(ref, dtype=np.float64)
        return WarpParams("corners", box.reshape(8).copy(), box)
    else:
        raise ValueError(f"unknown SSM kind {kind!r}")
    return WarpParams(kind, values)


def _dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT homography estimate from >= 4 correspondences."""

    def normalize(pts):
        centroid = pts.mean(axis=0)
        spread = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
        if spread < 1e-12:
            raise FitError("coincident points in homography fit")
        s = np.sqrt(2.0) / spread
        t = np.array([[s, 0.0, -s * centroid[0]],
                      [0.0, s, -s * centroid[1]],
                      [0.0, 0.0, 1.0]])
        return (pts - centroid) * s, t

    src_n, t_src = normalize(src)
    dst_n, t_dst = normalize(dst)
    n = src.shape[0]
    a = np.zeros((2 * n, 9))
    x, y = src_n[:, 0], src_n[:, 1]
    u, v = dst_n[:, 0], dst_n[:, 1]
    a[0::2] = np.column_stack([x, y, np.ones(n), np.zeros((n, 3)),
                               -u * x, -u * y, -u])
    a[1::2] = np.column_stack([np.zeros((n, 3)), x, y, np.ones(n),
                               -v * x, -v * y, -v])
    _, sv, vt = np.linalg.svd(a)
    if sv[-2] < 1e-9 * max(sv[0], 1.0):
        raise FitError("degenerate point configuration for homography")
    h = vt[-1].reshape(3, 3)
    h_sv = np.linalg.svd(h, compute_uv=False)
    if h_sv[-1] < 1e-9 * h_sv[0]:
        # e.g. a collinear source triple with non-collinear images
        raise FitError("point configuration admits only a singular homography")
    matrix = np.linalg.inv(t_dst) @ h @ t_src
    if abs(matrix[2, 2]) < 1e-12:
        raise GeometryError("fitted homography has vanishing h33")
    return matrix / matrix[2, 2]


def matrix_from_params(p: WarpParams) -> np.ndarray:
    """3x3 homogeneous matrix realizing the warp."""
    v = p.values
    if p.kind == "translation":
        m = np.eye(3)
        m[:2, 2] = v
    elif p.kind == "isometry":
        c, s = np.cos(v[2]), np.sin(v[2])
        m = np.array([[c, -s, v[0]], [s, c, v[1]], [0.0, 0.0, 1.0]])
    elif p.kind == "similitude":
        scale = np.exp(v[2])
        c, s = scale * np.cos(v[3]), scale * np.sin(v[3])
        m = np.array([[c, -s, v[0]], [s, c, v[1]], [0.0, 0.0, 1.0]])
    elif p.kind == "affine":
        m = np.array([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [0.0, 0.0, 1.0]])
    elif p.kind == "homography":
        m = np.array([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], 1.0]])
    elif p.kind == "sl3":
        m = expm(np.tensordot(v, SL3_BASIS, axes=1))
    elif p.kind == "corners":
        m = unit_box_dlt(p.ref, v.reshape(4, 2))
    else:  # pragma: no cover
        raise ValueError(f"unknown SSM kind {p.kind!r}")
    if abs(np.linalg.det(m)) < 1e-12:
        raise GeometryError("warp matrix is singular")
    return m


def unit_box_dlt(ref: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Exact homography taking the reference box corners to new corners."""
    return _dlt_homography(np.asarray(ref, dtype=np.float64),
                           np.asarray(corners, dtype=np.float64))


def _polish_sl3(coeffs: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gauss-Newton refinement of exp-coefficients toward a det-1 matrix.

    The principal matrix logarithm leaves ~1e-11 coefficient error, which
    the projective columns amplify to above-tolerance point errors; two
    corrections against the exact exponential reach machine precision.
    """
    for _ in range(3):
        generator = np.tensordot(coeffs, SL3_BASIS, axes=1)
        current = expm(generator)
        residual = (current - target).reshape(9)
        if np.abs(residual).max() < 1e-14:
            break
        jac = np.stack([
            expm_frechet(generator, basis, compute_expm=False).reshape(9)
            for basis in SL3_BASIS], axis=1)
        try:
            delta, *_ = np.linalg.lstsq(jac, -residual, rcond=None)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)):
            break
        coeffs = coeffs + delta
    return coeffs


def params_from_matrix(kind: str, matrix: np.ndarray, ref=None) -> WarpParams:
    """Recover kind-specific parameters from a 3x3 transform.

    The matrix must actually lie in the requested family (up to scale for
    the projective kinds); no projection onto the family is attempted except
    for the deliberate normalizations noted inline.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if abs(m[2, 2]) < 1e-12:
        raise GeometryError("matrix has vanishing h33")
    if kind in ("translation", "isometry", "similitude", "affine", "homography"):
        m = m / m[2, 2]
    if kind == "translation":
        return WarpParams(kind, m[:2, 2].copy())
    if kind == "isometry":
        theta = np.arctan2(m[1, 0], m[0, 0])
        return WarpParams(kind, np.array([m[0, 2], m[1, 2], theta]))
    if kind == "similitude":
        scale = np.hypot(m[0, 0], m[1, 0])
        if scale < 1e-12:
            raise GeometryError("similitude with vanishing scale")
        theta = np.arctan2(m[1, 0], m[0, 0])
        return WarpParams(kind, np.array([m[0, 2], m[1, 2], np.log(scale), theta]))
    if kind == "affine":
        return WarpParams(kind, m[:2, :].reshape(6).copy())
    if kind == "homography":
        return WarpParams(kind, np.concatenate([m[0], m[1], m[2, :2]]))
    if kind == "sl3":
        det = np.linalg.det(m)
        if det <= 0:
            raise GeometryError("matrix outside the identity component of SL(3)")
        mn = m / np.cbrt(det)
        log = logm(mn)
        if np.iscomplexobj(log):
            if np.abs(log.imag).max() > 1e-9:
                raise GeometryError("matrix logarithm left the real algebra")
            log = log.real
        log = log - (np.trace(log) / 3.0) * np.eye(3)
        basis_flat = SL3_BASIS.reshape(8, 9).T
        coeffs, *_ = np.linalg.lstsq(basis_flat, log.reshape(9), rcond=None)
        return WarpParams(kind, _polish_sl3(coeffs, mn))
    if kind == "corners":
        box = UNIT_SQUARE if ref is None else np.asarray(ref, dtype=np.float64)
        corners = apply_homography(m, box)
        return WarpParams(kind, corners.reshape(8), box)
    raise ValueError(f"unknown SSM kind {kind!r}")


def warp_points(p: WarpParams, points) -> np.ndarray:
    """Apply the warp to (N, 2) points, with homogeneous normalization."""
    return apply_homography(matrix_from_params(p), points)


def compose(p: WarpParams, dp: WarpParams) -> WarpParams:
    """Parameters p' with w(x, p') = w(w(x, dp), p) for all x."""
    if p.kind != dp.kind:
        raise ValueError(f"cannot compose {p.kind!r} with {dp.kind!r}")
    if p.kind == "corners" and not np.allclose(p.ref, dp.ref):
        raise ValueError("corner warps with different reference boxes")
    matrix = matrix_from_params(p) @ matrix_from_params(dp)
    return params_from_matrix(p.kind, matrix, ref=p.ref)


def invert(p: WarpParams) -> WarpParams:
    """Parameters of the inverse warp."""
    if p.kind == "sl3":
        # exp(-A) inverts exp(A) exactly
        return p.with_values(-p.values)
    matrix = np.linalg.inv(matrix_from_params(p))
    return params_from_matrix(p.kind, matrix, ref=p.ref)


def _homography_entry_jacobian(matrix: np.ndarray, points: np.ndarray) -> np.ndarray:
    """d(warped point)/d(8 matrix entries) for an h33-normalized matrix, (N,2,8)."""
    m = matrix / matrix[2, 2]
    x, y = points[:, 0], points[:, 1]
    den = m[2, 0] * x + m[2, 1] * y + 1.0
    if np.any(np.abs(den) < 1e-12):
        raise GeometryError("point mapped to the plane at infinity")
    wx = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / den
    wy = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / den
    n = points.shape[0]
    jac = np.zeros((n, 2, 8))
    jac[:, 0, 0] = x / den
    jac[:, 0, 1] = y / den
    jac[:, 0, 2] = 1.0 / den
    jac[:, 1, 3] = x / den
    jac[:, 1, 4] = y / den
    jac[:, 1, 5] = 1.0 / den
    jac[:, 0, 6] = -wx * x / den
    jac[:, 0, 7] = -wx * y / den
    jac[:, 1, 6] = -wy * x / den
    jac[:, 1, 7] = -wy * y / den
    return jac


def warp_jacobian(p: WarpParams, points) -> np.ndarray:
    """Analytic d w(x, p) / d p per point, shape (N, 2, S)."""
    points = np.asarray(points, dtype=np.float64)
    x, y = points[:, 0], points[:, 1]
    n = points.shape[0]
    v = p.values

    if p.kind == "translation":
        jac = np.zeros((n, 2, 2))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        return jac

    if p.kind == "isometry":
        c, s = np.cos(v[2]), np.sin(v[2])
        jac = np.zeros((n, 2, 3))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        jac[:, 0, 2] = -s * x - c * y
        jac[:, 1, 2] = c * x - s * y
        return jac

    if p.kind == "similitude":
        scale = np.exp(v[2])
        c, s = np.cos(v[3]), np.sin(v[3])
        jac = np.zeros((n, 2, 4))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        jac[:, 0, 2] = scale * (c * x - s * y)
        jac[:, 1, 2] = scale * (s * x + c * y)
        jac[:, 0, 3] = scale * (-s * x - c * y)
        jac[:, 1, 3] = scale * (c * x - s * y)
        return jac

    if p.kind == "affine":
        jac = np.zeros((n, 2, 6))
        jac[:, 0, 0] = x
        jac[:, 0, 1] = y
        jac[:, 0, 2] = 1.0
        jac[:, 1, 3] = x
        jac[:, 1, 4] = y
        jac[:, 1, 5] = 1.0
        return jac

    if p.kind == "homography":
        return _homography_entry_jacobian(matrix_from_params(p), points)

    if p.kind == "sl3":
        generator = np.tensordot(v, SL3_BASIS, axes=1)
        ph = np.column_stack([x, y, np.ones(n)])
        if np.allclose(v, 0.0):
            matrix = np.eye(3)
            d_matrices = SL3_BASIS
        else:
            matrix = expm(generator)
            d_matrices = np.stack([
                expm_frechet(generator, basis, compute_expm=False)
                for basis in SL3_BASIS
            ])
        mapped = ph @ matrix.T
        w = mapped[:, 2]
        if np.any(np.abs(w) < 1e-12):
            raise GeometryError("point mapped to the plane at infinity")
        d_mapped = np.einsum("sij,nj->nsi", d_matrices, ph)
        jac = np.empty((n, 2, 8))
        for axis in range(2):
            jac[:, axis, :] = (d_mapped[:, :, axis] * w[:, None]
                               - mapped[:, axis:axis + 1] * d_mapped[:, :, 2]
                               ) / (w ** 2)[:, None]
        return jac

    if p.kind == "corners":
        matrix = matrix_from_params(p)
        if abs(matrix[2, 2]) < 1e-12:
            raise GeometryError("corner warp has vanishing h33")
        point_jac = _homography_entry_jacobian(matrix, points)
        corner_jac = _homography_entry_jacobian(matrix, p.ref).reshape(8, 8)
        # chain rule through the matrix entries: dw/dq = dw/dh . (dq/dh)^-1
        try:
            dh_dq = np.linalg.inv(corner_jac)
        except np.linalg.LinAlgError as err:
            raise GeometryError("reference corners give a singular system") from err
        return point_jac @ dh_dq

    raise ValueError(f"unknown SSM kind {p.kind!r}")


def _fit_translation(src, dst):
    return np.mean(dst - src, axis=0)


def _fit_rigid(src, dst):
    """Least-squares rotation + translation via the complex phase trick."""
    sc = src[:, 0] + 1j * src[:, 1]
    dc = dst[:, 0] + 1j * dst[:, 1]
    sc_c = sc - sc.mean()
    dc_c = dc - dc.mean()
    corr = np.sum(dc_c * np.conj(sc_c))
    theta = 0.0 if abs(corr) < 1e-15 else float(np.angle(corr))
    rot = np.exp(1j * theta)
    t = dc.mean() - rot * sc.mean()
    return np.array([t.real, t.imag, theta])


def _fit_similarity(src, dst):
    """Least-squares scaled rotation + translation (log-scale output)."""
    sc = src[:, 0] + 1j * src[:, 1]
    dc = dst[:, 0] + 1j * dst[:, 1]
    sc_c = sc - sc.mean()
    dc_c = dc - dc.mean()
    denom = np.sum(sc_c * np.conj(sc_c)).real
    if denom < 1e-12:
        raise FitError("coincident source points for similitude fit")
    coeff = np.sum(dc_c * np.conj(sc_c)) / denom
    scale = abs(coeff)
    if scale < 1e-12:
        raise FitError("similitude fit collapsed to zero scale")
    t = dc.mean() - coeff * sc.mean()
    return np.array([t.real, t.imag, np.log(scale), float(np.angle(coeff))])


def _fit_affine(src, dst):
    n = src.shape[0]
    design = np.column_stack([src, np.ones(n)])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("collinear points for affine fit")
    coeffs, *_ = np.linalg.lstsq(design, dst, rcond=None)
    return np.array([coeffs[0, 0], coeffs[1, 0], coeffs[2, 0],
                     coeffs[0, 1], coeffs[1, 1], coeffs[2, 1]])


def params_from_points(kind: str, src, dst, ref=None) -> WarpParams:
    """Least-squares warp of the given kind taking src points toward dst.

    Exact for minimal point sets; for extra points the fit minimizes the sum
    of squared distances (homography family uses the normalized DLT).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src and dst must be matching (N, 2) arrays")
    if src.shape[0] < MIN_FIT_POINTS[kind]:
        raise FitError(
            f"{kind} needs at least {MIN_FIT_POINTS[kind]} correspondences, "
            f"got {src.shape[0]}")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise ValueError("non-finite correspondence coordinates")

    if kind == "translation":
        return WarpParams(kind, _fit_translation(src, dst))
    if kind == "isometry":
        return WarpParams(kind, _fit_rigid(src, dst))
    if kind == "similitude":
        return WarpParams(kind, _fit_similarity(src, dst))
    if kind == "affine":
        return WarpParams(kind, _fit_affine(src, dst))
    if kind in HOMOGRAPHY_FAMILY:
        matrix = _dlt_homography(src, dst)
        return params_from_matrix(kind, matrix, ref=ref)
    raise ValueError(f"unknown SSM kind {kind!r}")


def params_to_corners(p: WarpParams, init_corners) -> np.ndarray:
    """Image of a 4-corner box under the warp, shape (4, 2)."""
    init_corners = np.asarray(init_corners, dtype=np.float64)
    if init_corners.shape != (4, 2):
        raise ValueError("expected a 4-corner box")
    return warp_points(p, init_corners)
