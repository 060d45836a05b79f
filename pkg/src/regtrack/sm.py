"""Search methods that drive a warp to maximize patch similarity.

Gradient-descent family (Newton-type steps on the similarity surface):
  * fclk -- forward compositional
  * iclk -- inverse compositional (template-side Jacobian/Hessian cached)
  * falk -- forward additive
  * ialk -- inverse additive (template gradients, current-warp Jacobian)
  * esm  -- forward compositional with the difference of the forward and
            inverse Jacobians and the sum of both self-Hessians

Stochastic family: nn (exhaustive nearest-neighbour over pre-rendered warp
samples), pf (sequential importance resampling particle filter), ransac
(a grid of 2-DOF subtrackers whose center correspondences are fit robustly).

Composites run a stochastic stage and refine its output with a GD stage:
nnic = nn + iclk, pffc = pf + fclk, rklt = ransac + fclk.

Hessians everywhere are self-Hessians: the intensity-space second derivative
is evaluated at the perfect-match point, where every appearance model's
gradient vanishes, so the second chain-rule term drops exactly.

Trackers expect images to be smoothed upstream; they never mutate frames.
A tracker instance is single-threaded state; distinct instances share
nothing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import am
from . import ssm
from .image import (GeometryError, GrayImage, apply_homography, extract_patch,
                    image_gradient, sampling_grid, unit_square_to_quad,
                    validate_quad)

__all__ = [
    "GD_VARIANTS",
    "STOCHASTIC_KINDS",
    "COMPOSITE_STAGES",
    "SM_KINDS",
    "StepError",
    "GDConfig",
    "NNConfig",
    "PFConfig",
    "RansacConfig",
    "NNIndex",
    "ParticleSet",
    "newton_step",
    "gaussian_param_sigmas",
    "ransac_fit",
    "Tracker",
    "TrackerSpec",
]

GD_VARIANTS = ("iclk", "fclk", "falk", "ialk", "esm")
STOCHASTIC_KINDS = ("nn", "pf", "ransac")
COMPOSITE_STAGES = {
    "nnic": ("nn", "iclk"),
    "pffc": ("pf", "fclk"),
    "rklt": ("ransac", "fclk"),
}
SM_KINDS = GD_VARIANTS + STOCHASTIC_KINDS + tuple(COMPOSITE_STAGES)


class StepError(RuntimeError):
    """A Newton step could not be computed or kept diverging."""


@dataclass
class GDConfig:
    """Iteration budget and stopping rule for the gradient-descent family."""

    max_iters: int = 30
    stop_norm: float = 1e-4       # L2 norm of the corner change per iteration
    corner_clamp: float = 50.0    # largest corner move a single step may make
    gauss_newton: bool = False    # ssd only; identical to its self-Hessian


@dataclass
class NNConfig:
    samples: int = 1000
    target_px: float = 6.0        # RMS corner displacement of the sampler
    max_redraws: int = 10


@dataclass
class PFConfig:
    particles: int = 500
    beta: float = 50.0
    target_px: float = 2.0        # RMS corner displacement of the dynamics
    ess_fraction: float = 0.5     # resample when ESS < fraction * particles
    mismatch_gray: float = 20.0   # gray-level scale for weight normalization


@dataclass
class RansacConfig:
    grid_size: int = 10
    sub_resolution: int = 25
    inlier_px: float = 2.0
    hypotheses: int = 50


@dataclass
class NNIndex:
    """Pre-rendered (warp delta, template patch) pairs; entry 0 is identity."""

    deltas: List[ssm.WarpParams]
    patches: np.ndarray  # (M, N)


@dataclass
class ParticleSet:
    params: np.ndarray   # (P, S)
    weights: np.ndarray  # (P,), non-negative, sums to 1


def newton_step(jac: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Solve H dp = -J^T for an ascent step on a maximized objective.

    H is expected to be (approximately) negative definite. Indefinite or
    singular Hessians are repaired by clamping eigenvalues away from zero on
    the negative side, which guarantees an ascent direction; a Hessian with
    no curvature at all raises StepError unless the gradient is zero too.
    """
    jac = np.asarray(jac, dtype=np.float64).ravel()
    hess = np.asarray(hess, dtype=np.float64)
    if not (np.all(np.isfinite(jac)) and np.all(np.isfinite(hess))):
        raise StepError("non-finite Newton system")
    sym = 0.5 * (hess + hess.T)
    diag = np.abs(np.diag(sym))
    peak = diag.max() if diag.size else 0.0
    if peak < 1e-300:
        if np.allclose(jac, 0.0):
            return np.zeros_like(jac)
        raise StepError("curvature-free Hessian")
    # Jacobi equilibration: warp parameters mix pixel-scale and curvature
    # parameters, so the raw system can be conditioned like 1e9
    scale = 1.0 / np.sqrt(np.maximum(diag, 1e-12 * peak))
    balanced = sym * np.outer(scale, scale)
    eigvals, eigvecs = np.linalg.eigh(balanced)
    top = np.abs(eigvals).max()
    if top < 1e-300:
        raise StepError("curvature-free Hessian")
    clamped = np.minimum(eigvals, -1e-10 * top)
    step = -scale * ((eigvecs / clamped) @ (eigvecs.T @ (scale * jac)))
    if not np.all(np.isfinite(step)):
        raise StepError("Newton solve produced non-finite step")
    return step


def gaussian_param_sigmas(ssm_kind: str, corners, target_px: float) -> np.ndarray:
    """Per-parameter Gaussian sigmas inducing ~target_px RMS corner motion.

    Calibrated from the warp Jacobian at identity on the box corners:
    independent parameter noise with these sigmas moves the corners by
    target_px in the RMS sense, to first order, for every warp kind.
    """
    corners = validate_quad(corners)
    ident = ssm.identity_params(
        ssm_kind, ref=corners if ssm_kind == "corners" else None)
    jac = ssm.warp_jacobian(ident, corners)           # (4, 2, S)
    speed = np.sqrt((jac ** 2).sum(axis=1).mean(axis=0))
    n_params = speed.shape[0]
    sigmas = np.zeros(n_params)
    active = speed > 1e-12
    sigmas[active] = target_px / (speed[active] * np.sqrt(n_params))
    return sigmas


def ransac_fit(ssm_kind: str, src: np.ndarray, dst: np.ndarray,
               rng: np.random.Generator, config: RansacConfig, ref=None):
    """Robust warp fit from point correspondences.

    Repeatedly fits minimal subsets, keeps the hypothesis with the largest
    consensus under the inlier threshold, and refits on its inlier set.
    Returns (params, inlier mask) or None when no hypothesis gathered a
    minimal consensus. Correspondences are canonically reordered before the
    draws, so for a fixed generator state the outcome does not depend on the
    caller's ordering.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    order = np.lexsort((src[:, 1], src[:, 0]))
    src, dst = src[order], dst[order]
    count = src.shape[0]
    minimal = ssm.MIN_FIT_POINTS[ssm_kind]

    best_inliers = None
    best_count = 0
    for _ in range(config.hypotheses):
        idx = rng.choice(count, size=minimal, replace=False)
        try:
            cand = ssm.params_from_points(ssm_kind, src[idx], dst[idx], ref=ref)
            projected = ssm.warp_points(cand, src)
        except (ssm.FitError, GeometryError, ValueError):
            continue
        residuals = np.linalg.norm(projected - dst, axis=1)
        inliers = residuals < config.inlier_px
        if inliers.sum() > best_count:
            best_count = int(inliers.sum())
            best_inliers = inliers
    if best_inliers is None or best_count < minimal:
        return None
    try:
        refit = ssm.params_from_points(ssm_kind, src[best_inliers],
                                       dst[best_inliers], ref=ref)
    except (ssm.FitError, GeometryError, ValueError):
        return None
    restored = np.zeros(count, dtype=bool)
    restored[order] = best_inliers
    return refit, restored


@dataclass
class _Subtracker:
    template: np.ndarray
    grid: np.ndarray
    ref_center: np.ndarray
    shift: np.ndarray
    alive: bool = True


def _translation_fclk(img: GrayImage, template: np.ndarray, grid: np.ndarray,
                      shift: np.ndarray, am_kind: str, cfg: GDConfig,
                      constants: am.SSIMConstants) -> Tuple[np.ndarray, bool]:
    """Minimal 2-DOF forward-compositional loop used by the ransac subtrackers."""
    p = shift.copy()
    imap = None
    if am_kind in am.HISTOGRAM_KINDS:
        vals0 = extract_patch(img, grid + p).values
        imap = am.build_intensity_map(am_kind, template, vals0)
    for _ in range(cfg.max_iters):
        coords = grid + p
        vals = extract_patch(img, coords).values
        pix_jac = image_gradient(img, coords)
        grad_c = am.gradient(am_kind, template, vals, "candidate", imap, constants)
        jac = grad_c @ pix_jac
        hess = am.self_hessian(am_kind, vals, constants).project(pix_jac)
        try:
            dp = newton_step(jac, hess)
        except StepError:
            return p, True
        move = 2.0 * float(np.hypot(dp[0], dp[1]))
        if move > cfg.corner_clamp:
            dp = dp * (cfg.corner_clamp / move)
            move = cfg.corner_clamp
        p = p + dp
        if move < cfg.stop_norm:
            break
    return p, False


class Tracker:
    """One tracked object: template, warp state, and the chosen search method.

    The template is sampled once from the first frame over the initial box
    and never updated. ``track`` advances the warp by one frame and returns
    the new corner estimate; ``params`` and ``corners`` always agree.
    """

    def __init__(self, frame: GrayImage, corners, am_kind: str = "ssim",
                 ssm_kind: str = "homography", sm_kind: str = "fclk",
                 resolution: Tuple[int, int] = (50, 50),
                 gd: Optional[GDConfig] = None,
                 nn: Optional[NNConfig] = None,
                 pf: Optional[PFConfig] = None,
                 ransac: Optional[RansacConfig] = None,
                 seed: int = 0,
                 constants: am.SSIMConstants = am.DEFAULT_CONSTANTS):
        if am_kind not in am.AM_KINDS:
            raise ValueError(f"unknown AM kind {am_kind!r}")
        if ssm_kind not in ssm.SSM_KINDS:
            raise ValueError(f"unknown SSM kind {ssm_kind!r}")
        if sm_kind not in SM_KINDS:
            raise ValueError(f"unknown SM kind {sm_kind!r}")
        if resolution[0] < 2 or resolution[1] < 2:
            raise ValueError("sampling resolution must be at least 2x2")
        self.am_kind = am_kind
        self.ssm_kind = ssm_kind
        self.sm_kind = sm_kind
        self.gd = gd if gd is not None else GDConfig()
        self.nn = nn if nn is not None else NNConfig()
        self.pf = pf if pf is not None else PFConfig()
        self.ransac = ransac if ransac is not None else RansacConfig()
        if self.gd.gauss_newton and am_kind != "ssd":
            raise ValueError("the Gauss-Newton Hessian is only usable with ssd")
        self.constants = constants
        self.rng = np.random.default_rng(seed)

        self.init_corners = validate_quad(corners)
        self.grid = sampling_grid(self.init_corners, resolution[0], resolution[1])
        self.template = extract_patch(frame, self.grid)
        self._identity = ssm.identity_params(
            ssm_kind, ref=self.init_corners if ssm_kind == "corners" else None)
        self.params = self._identity
        self.corners = self.init_corners.copy()
        self.iterations = 0
        self.lost = False
        self.last_stage_params: Optional[ssm.WarpParams] = None

        self._gd_variant = sm_kind if sm_kind in GD_VARIANTS else \
            COMPOSITE_STAGES.get(sm_kind, (None, None))[1]
        self._stochastic_kind = sm_kind if sm_kind in STOCHASTIC_KINDS else \
            COMPOSITE_STAGES.get(sm_kind, (None, None))[0]

        self._b_id = None
        self._grad0 = None
        self._g0 = None
        self._h_ic = None
        if self._gd_variant in ("fclk", "iclk", "esm"):
            self._b_id = ssm.warp_jacobian(self._identity, self.grid)
        if self._gd_variant in ("iclk", "ialk", "esm"):
            self._grad0 = image_gradient(frame, self.grid)
        if self._gd_variant in ("iclk", "esm"):
            self._g0 = np.einsum("nc,ncs->ns", self._grad0, self._b_id)
            self._h_ic = am.self_hessian(
                am_kind, self.template.values, constants).project(self._g0)

        self._nn_index: Optional[NNIndex] = None
        self._particles: Optional[ParticleSet] = None
        self._pf_sigmas: Optional[np.ndarray] = None
        self._subtrackers: Optional[List[_Subtracker]] = None
        if self._stochastic_kind == "nn":
            self._nn_index = self._build_nn_index(frame)
        elif self._stochastic_kind == "pf":
            self._pf_sigmas = gaussian_param_sigmas(
                ssm_kind, self.init_corners, self.pf.target_px)
            count = self.pf.particles
            self._particles = ParticleSet(
                params=np.tile(self.params.values, (count, 1)),
                weights=np.full(count, 1.0 / count))
        elif self._stochastic_kind == "ransac":
            self._subtrackers = self._build_subtrackers(frame)

    # ------------------------------------------------------------------ #
    # public API
    # ------------------------------------------------------------------ #

    def track(self, frame: GrayImage) -> np.ndarray:
        """Advance the warp estimate by one (pre-smoothed) frame."""
        self.lost = False
        self.last_stage_params = None
        if self.sm_kind in GD_VARIANTS:
            params, iters, lost = self._track_gd(frame, self.sm_kind, self.params)
            self.lost = lost
        elif self.sm_kind == "nn":
            params, iters = self._track_nn(frame, self.params), 1
        elif self.sm_kind == "pf":
            params, iters = self._track_pf(frame), 1
        elif self.sm_kind == "ransac":
            params, iters = self._track_ransac(frame, self.params), 1
        else:
            params, iters = self._track_composite(frame)
        self.params = params
        self.corners = ssm.params_to_corners(params, self.init_corners)
        self.iterations = iters
        return self.corners.copy()

    def gd_refine(self, frame: GrayImage, start: ssm.WarpParams):
        """Run this tracker's GD stage from an explicit starting warp."""
        if self._gd_variant is None:
            raise ValueError(f"{self.sm_kind!r} has no gradient-descent stage")
        return self._track_gd(frame, self._gd_variant, start)

    # ------------------------------------------------------------------ #
    # gradient-descent family
    # ------------------------------------------------------------------ #

    def _track_gd(self, frame: GrayImage, variant: str,
                  start: ssm.WarpParams) -> Tuple[ssm.WarpParams, int, bool]:
        entry = start
        p = start
        iterations = 0
        imap = None
        if self.am_kind in am.HISTOGRAM_KINDS:
            try:
                vals = extract_patch(frame, ssm.warp_points(p, self.grid)).values
            except GeometryError:
                return entry, 0, True
            imap = am.build_intensity_map(self.am_kind, self.template.values, vals)
        for _ in range(self.gd.max_iters):
            iterations += 1
            try:
                jac, hess = self._gd_quantities(frame, p, variant, imap)
                dp = newton_step(jac, hess)
                p, move = self._apply_step(p, dp, variant)
            except (StepError, GeometryError, ssm.FitError):
                return entry, iterations, True
            if move < self.gd.stop_norm:
                break
        return p, iterations, False

    def _gd_quantities(self, frame, p, variant, imap):
        coords = ssm.warp_points(p, self.grid)
        vals = extract_patch(frame, coords).values
        t_vals = self.template.values
        kind, consts = self.am_kind, self.constants

        if variant == "iclk":
            grad_t = am.gradient(kind, t_vals, vals, "template", imap, consts)
            return grad_t @ self._g0, self._h_ic

        if variant == "fclk":
            g_fwd = self._composite_pixel_jacobian(frame, p)
            grad_c = am.gradient(kind, t_vals, vals, "candidate", imap, consts)
            hess = am.self_hessian(kind, vals, consts).project(g_fwd)
            return grad_c @ g_fwd, hess

        if variant == "esm":
            g_fwd = self._composite_pixel_jacobian(frame, p)
            grad_c = am.gradient(kind, t_vals, vals, "candidate", imap, consts)
            jac_fc = grad_c @ g_fwd
            hess_fc = am.self_hessian(kind, vals, consts).project(g_fwd)
            grad_t = am.gradient(kind, t_vals, vals, "template", imap, consts)
            jac_ic = grad_t @ self._g0
            return jac_fc - jac_ic, hess_fc + self._h_ic

        warp_jac = ssm.warp_jacobian(p, self.grid)
        if variant == "falk":
            pixel_grad = image_gradient(frame, coords)
        elif variant == "ialk":
            pixel_grad = self._grad0
        else:  # pragma: no cover
            raise ValueError(f"unknown GD variant {variant!r}")
        g = np.einsum("nc,ncs->ns", pixel_grad, warp_jac)
        grad_c = am.gradient(kind, t_vals, vals, "candidate", imap, consts)
        hess = am.self_hessian(kind, vals, consts).project(g)
        return grad_c @ g, hess

    def _composite_pixel_jacobian(self, frame, p, step: float = 1.0):
        """Gradient of the warped current patch w.r.t. template coordinates,
        chained onto the warp Jacobian at identity: the forward-compositional
        pixel Jacobian, shape (N, S)."""
        grad = np.empty((self.grid.shape[0], 2))
        for axis in range(2):
            plus = self.grid.copy()
            plus[:, axis] += step
            minus = self.grid.copy()
            minus[:, axis] -= step
            hi = extract_patch(frame, ssm.warp_points(p, plus)).values
            lo = extract_patch(frame, ssm.warp_points(p, minus)).values
            grad[:, axis] = (hi - lo) / (2.0 * step)
        return np.einsum("nc,ncs->ns", grad, self._b_id)

    def _apply_step(self, p, dp, variant):
        """Apply a parameter step with the divergence clamp on corner motion."""
        cur_corners = ssm.params_to_corners(p, self.init_corners)
        scale = 1.0
        for _ in range(6):
            stepped = dp * scale
            if variant in ("falk", "ialk"):
                p_new = p.with_values(p.values + stepped)
            else:
                delta = self._identity.with_values(
                    self._identity.values + stepped)
                if variant == "iclk":
                    delta = ssm.invert(delta)
                p_new = ssm.compose(p, delta)
            new_corners = ssm.params_to_corners(p_new, self.init_corners)
            move = float(np.linalg.norm(new_corners - cur_corners))
            if move <= self.gd.corner_clamp:
                return p_new, move
            scale *= 0.9 * self.gd.corner_clamp / move
        raise StepError("step kept exceeding the corner-motion clamp")

    # ------------------------------------------------------------------ #
    # nearest-neighbour search
    # ------------------------------------------------------------------ #

    def _build_nn_index(self, frame: GrayImage) -> NNIndex:
        sigmas = gaussian_param_sigmas(
            self.ssm_kind, self.init_corners, self.nn.target_px)
        deltas = [self._identity]
        patches = [self.template.values.copy()]
        base = self._identity.values
        for _ in range(self.nn.samples - 1):
            for _ in range(self.nn.max_redraws):
                values = base + self.rng.normal(size=base.shape) * sigmas
                try:
                    delta = self._identity.with_values(values)
                    validate_quad(ssm.params_to_corners(delta, self.init_corners))
                    coords = ssm.warp_points(delta, self.grid)
                except (GeometryError, ValueError):
                    continue
                break
            else:
                raise GeometryError("warp sampler kept producing degenerate draws")
            deltas.append(delta)
            patches.append(extract_patch(frame, coords).values)
        return NNIndex(deltas=deltas, patches=np.vstack(patches))

    def _track_nn(self, frame: GrayImage, start: ssm.WarpParams) -> ssm.WarpParams:
        current = extract_patch(frame, ssm.warp_points(start, self.grid)).values
        scores = am.batch_similarity(
            self.am_kind, current, self._nn_index.patches,
            reference_is_template=False, constants=self.constants)
        best = int(np.argmax(scores))
        if best == 0:
            return start
        return ssm.compose(start, ssm.invert(self._nn_index.deltas[best]))

    # ------------------------------------------------------------------ #
    # particle filter
    # ------------------------------------------------------------------ #

    def _track_pf(self, frame: GrayImage) -> ssm.WarpParams:
        pset = self._particles
        count, n_params = pset.params.shape
        noise = self.rng.normal(size=(count, n_params)) * self._pf_sigmas
        pset.params = pset.params + noise

        n_pixels = len(self.template)
        patches = np.zeros((count, n_pixels))
        valid = np.ones(count, dtype=bool)
        for i in range(count):
            try:
                particle = self._identity.with_values(pset.params[i])
                coords = ssm.warp_points(particle, self.grid)
                patches[i] = extract_patch(frame, coords).values
            except (GeometryError, ValueError):
                valid[i] = False
        scores = np.full(count, -np.inf)
        if np.any(valid):
            raw = am.batch_similarity(
                self.am_kind, self.template.values, patches[valid],
                reference_is_template=True, constants=self.constants)
            scores[valid] = am.normalized_score(
                self.am_kind, raw, n_pixels, self.pf.mismatch_gray)

        log_w = np.where(pset.weights > 0, np.log(pset.weights, where=pset.weights > 0,
                                                  out=np.full(count, -np.inf)), -np.inf)
        log_w = log_w + self.pf.beta * scores
        finite = np.isfinite(log_w)
        if not np.any(finite):
            pset.weights = np.full(count, 1.0 / count)
            self.lost = True
        else:
            log_w -= log_w[finite].max()
            weights = np.where(finite, np.exp(log_w, where=finite,
                                              out=np.zeros(count)), 0.0)
            total = weights.sum()
            if total <= 0 or not np.isfinite(total):
                pset.weights = np.full(count, 1.0 / count)
                self.lost = True
            else:
                pset.weights = weights / total

        ess = 1.0 / float(pset.weights @ pset.weights)
        if ess < self.pf.ess_fraction * count:
            pset.params = pset.params[self._systematic_resample(pset.weights)]
            pset.weights = np.full(count, 1.0 / count)

        estimate = pset.weights @ pset.params
        return self._identity.with_values(estimate)

    def _systematic_resample(self, weights: np.ndarray) -> np.ndarray:
        count = weights.shape[0]
        positions = (self.rng.random() + np.arange(count)) / count
        return np.searchsorted(np.cumsum(weights), positions)

    # ------------------------------------------------------------------ #
    # ransac over a subtracker grid
    # ------------------------------------------------------------------ #

    def _build_subtrackers(self, frame: GrayImage) -> List[_Subtracker]:
        matrix = unit_square_to_quad(self.init_corners)
        g = self.ransac.grid_size
        res = self.ransac.sub_resolution
        subs = []
        for j in range(g):
            for i in range(g):
                cell_unit = np.array([
                    [i / g, j / g], [(i + 1) / g, j / g],
                    [(i + 1) / g, (j + 1) / g], [i / g, (j + 1) / g]])
                cell = apply_homography(matrix, cell_unit)
                grid = sampling_grid(cell, res, res)
                center = apply_homography(
                    matrix, np.array([[(i + 0.5) / g, (j + 0.5) / g]]))[0]
                subs.append(_Subtracker(
                    template=extract_patch(frame, grid).values,
                    grid=grid, ref_center=center, shift=np.zeros(2)))
        return subs

    def _track_ransac(self, frame: GrayImage,
                      start: ssm.WarpParams) -> ssm.WarpParams:
        for sub in self._subtrackers:
            sub.shift, sub_lost = _translation_fclk(
                frame, sub.template, sub.grid, sub.shift,
                self.am_kind, self.gd, self.constants)
            center = sub.ref_center + sub.shift
            inside = (0.0 <= center[0] <= frame.width - 1.0
                      and 0.0 <= center[1] <= frame.height - 1.0)
            sub.alive = (not sub_lost) and inside

        alive_idx = [k for k, sub in enumerate(self._subtrackers) if sub.alive]
        minimal = ssm.MIN_FIT_POINTS[self.ssm_kind]
        if len(alive_idx) < minimal:
            self.lost = True
            return start
        src = np.array([self._subtrackers[k].ref_center for k in alive_idx])
        dst = src + np.array([self._subtrackers[k].shift for k in alive_idx])

        fit = self._ransac_fit(src, dst)
        if fit is None:
            self.lost = True
            return start
        params, inlier_mask = fit

        # re-seed drifted subtrackers onto the consensus warp
        inlier_of = dict(zip(alive_idx, inlier_mask))
        for k, sub in enumerate(self._subtrackers):
            if not inlier_of.get(k, False):
                seeded = ssm.warp_points(params, sub.ref_center[None, :])[0]
                sub.shift = seeded - sub.ref_center
        return params

    def _ransac_fit(self, src: np.ndarray, dst: np.ndarray):
        ref = self.init_corners if self.ssm_kind == "corners" else None
        return ransac_fit(self.ssm_kind, src, dst, self.rng, self.ransac,
                          ref=ref)

    # ------------------------------------------------------------------ #
    # composites
    # ------------------------------------------------------------------ #

    def _track_composite(self, frame: GrayImage) -> Tuple[ssm.WarpParams, int]:
        stochastic, _ = COMPOSITE_STAGES[self.sm_kind]
        if stochastic == "nn":
            seeded = self._track_nn(frame, self.params)
        elif stochastic == "pf":
            seeded = self._track_pf(frame)
        else:
            seeded = self._track_ransac(frame, self.params)
        self.last_stage_params = seeded
        refined, iterations, gd_lost = self._track_gd(
            frame, self._gd_variant, seeded)
        if gd_lost:
            return seeded, iterations
        return refined, iterations


# the dataclass below names its fields am/ssm/sm, shadowing the modules
# inside the class body
_SSIM_CONSTANTS = am.SSIMConstants


@dataclass
class TrackerSpec:
    """Declarative tracker configuration; builds concrete Tracker instances."""

    am: str = "ssim"
    ssm: str = "homography"
    sm: str = "fclk"
    resolution: Tuple[int, int] = (50, 50)
    gd: GDConfig = field(default_factory=GDConfig)
    nn: NNConfig = field(default_factory=NNConfig)
    pf: PFConfig = field(default_factory=PFConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    seed: int = 0
    constants: "am.SSIMConstants" = field(default_factory=_SSIM_CONSTANTS)

    def build(self, frame: GrayImage, corners, seed_offset: int = 0) -> Tracker:
        return Tracker(frame, corners, am_kind=self.am, ssm_kind=self.ssm,
                       sm_kind=self.sm, resolution=self.resolution,
                       gd=dataclasses.replace(self.gd),
                       nn=dataclasses.replace(self.nn),
                       pf=dataclasses.replace(self.pf),
                       ransac=dataclasses.replace(self.ransac),
                       seed=self.seed + seed_offset,
                       constants=self.constants)

    def describe(self) -> dict:
        return {"am": self.am, "ssm": self.ssm, "sm": self.sm,
                "resolution": f"{self.resolution[0]}x{self.resolution[1]}",
                "seed": self.seed}
