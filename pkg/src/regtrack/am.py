"""Appearance models: similarity values and their intensity-space derivatives.

Seven models are implemented: ssd, ncc, zncc, scv, rscv, ssim and spss. All
of them are oriented for maximization (the L2-type models are negated) and
all are stationary at a perfect match, which is what lets the optimizers
drop the second chain-rule term when they build Hessians at the
self-similarity point.

Derivative conventions:
  * ``gradient`` returns d f / d I as a length-N vector, with respect to
    either the candidate patch or the template patch;
  * second derivatives are returned in structured form (diagonal plus a
    short list of rank-one terms) and are only ever densified in tests --
    optimizers project them factor by factor;
  * sample statistics use the N-1 divisor throughout.

The scv/rscv models substitute one patch by its conditional expectation
given the other, estimated from a joint 256x256 histogram of rounded
intensities. The histogram is treated as per-frame data: gradients are taken
with the map held fixed, with respect to the substituted intensities on the
side the substitution touched. All closed forms here are validated against
finite differences of the similarity values in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

__all__ = [
    "AM_KINDS",
    "SSIMConstants",
    "SSIMIntermediates",
    "StructuredHessian",
    "IntensityMap",
    "SimilarityBundle",
    "similarity",
    "batch_similarity",
    "gradient",
    "hessian_full",
    "self_hessian",
    "build_intensity_map",
    "zscore_normalize",
    "evaluate_bundle",
    "normalized_score",
    "DEFAULT_CONSTANTS",
]

AM_KINDS = ("ssd", "ncc", "zncc", "scv", "rscv", "ssim", "spss")

HISTOGRAM_KINDS = ("scv", "rscv")

VARIANCE_EPS = 1e-12


@dataclass(frozen=True)
class SSIMConstants:
    """Stabilization constants for the structural-similarity family."""

    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


DEFAULT_CONSTANTS = SSIMConstants()


@dataclass
class SSIMIntermediates:
    """Shared statistics of a patch pair used by the ssim value/derivatives."""

    n: int
    mu_t: float
    mu_0: float
    var_t: float
    var_0: float
    cov: float
    t_centered: np.ndarray
    o_centered: np.ndarray
    a: float
    b: float
    c: float
    d: float
    value: float

    @property
    def cbar(self) -> float:
        return 2.0 * self.mu_t ** 2 + (self.c - self.mu_t ** 2 - self.mu_0 ** 2)

    @property
    def dbar(self) -> float:
        return 2.0 * self.var_t + (self.d - self.var_t - self.var_0)


@dataclass
class StructuredHessian:
    """N x N symmetric matrix stored as diagonal + sum of rank-one terms."""

    n: int
    diag: Optional[np.ndarray] = None
    terms: List[Tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)

    def densify(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        if self.diag is not None:
            out[np.diag_indices(self.n)] += self.diag
        for coeff, u, v in self.terms:
            out += coeff * np.outer(u, v)
        return out

    def project(self, basis: np.ndarray) -> np.ndarray:
        """Return basis.T @ H @ basis without densifying (basis is (N, S))."""
        s = basis.shape[1]
        out = np.zeros((s, s))
        if self.diag is not None:
            out += basis.T @ (self.diag[:, None] * basis)
        for coeff, u, v in self.terms:
            out += coeff * np.outer(basis.T @ u, basis.T @ v)
        return out


@dataclass
class IntensityMap:
    """Expected-intensity lookup over the 256 integer bins."""

    table: np.ndarray  # (256,)

    def apply(self, values: np.ndarray) -> np.ndarray:
        bins = np.clip(np.rint(values), 0, 255).astype(np.intp)
        return self.table[bins]


@dataclass
class SimilarityBundle:
    """Value, gradient and curvature of one model at one patch pair.

    ``hessian`` is the exact second derivative for ssim/spss and the
    perfect-match (self) form for the remaining models, matching what the
    Newton-type optimizers consume.
    """

    value: float
    grad: np.ndarray
    hessian: "StructuredHessian"


def _check_pair(template: np.ndarray, candidate: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    template = np.asarray(template, dtype=np.float64).ravel()
    candidate = np.asarray(candidate, dtype=np.float64).ravel()
    if template.shape != candidate.shape:
        raise ValueError(
            f"patch sizes disagree: {template.shape} vs {candidate.shape}")
    if template.size == 0:
        raise ValueError("empty patches")
    return template, candidate


def build_intensity_map(kind: str, template, candidate) -> IntensityMap:
    """Conditional-expectation table from the joint histogram of a patch pair.

    scv maps each occupied template bin to the mean candidate intensity seen
    with it; rscv conditions the other way around. Empty bins keep their own
    center so the map degrades to the identity off the data.
    """
    if kind not in HISTOGRAM_KINDS:
        raise ValueError(f"intensity maps are only defined for scv/rscv, not {kind!r}")
    template, candidate = _check_pair(template, candidate)
    if kind == "scv":
        source, target = template, candidate
    else:
        source, target = candidate, template
    bins = np.clip(np.rint(source), 0, 255).astype(np.intp)
    counts = np.bincount(bins, minlength=256).astype(np.float64)
    sums = np.bincount(bins, weights=target, minlength=256)
    table = np.arange(256, dtype=np.float64)
    occupied = counts > 0
    table[occupied] = sums[occupied] / counts[occupied]
    return IntensityMap(table=table)


def _effective_pair(kind, template, candidate, intensity_map):
    """Patch pair after the kind's substitution rule (if any)."""
    if kind == "scv":
        if intensity_map is None:
            intensity_map = build_intensity_map(kind, template, candidate)
        return intensity_map.apply(template), candidate
    if kind == "rscv":
        if intensity_map is None:
            intensity_map = build_intensity_map(kind, template, candidate)
        return template, intensity_map.apply(candidate)
    return template, candidate


def ssim_intermediates(template, candidate,
                       constants: SSIMConstants = DEFAULT_CONSTANTS) -> SSIMIntermediates:
    template, candidate = _check_pair(template, candidate)
    n = template.size
    if n < 2:
        raise ValueError("ssim needs at least 2 pixels")
    mu_t = candidate.mean()
    mu_0 = template.mean()
    t_centered = candidate - mu_t
    o_centered = template - mu_0
    var_t = t_centered @ t_centered / (n - 1)
    var_0 = o_centered @ o_centered / (n - 1)
    cov = t_centered @ o_centered / (n - 1)
    a = 2.0 * mu_t * mu_0 + constants.c1
    b = 2.0 * cov + constants.c2
    c = mu_t ** 2 + mu_0 ** 2 + constants.c1
    d = var_t + var_0 + constants.c2
    return SSIMIntermediates(n=n, mu_t=mu_t, mu_0=mu_0, var_t=var_t,
                             var_0=var_0, cov=cov, t_centered=t_centered,
                             o_centered=o_centered, a=a, b=b, c=c, d=d,
                             value=(a * b) / (c * d))


def _pearson(template: np.ndarray, candidate: np.ndarray) -> float:
    tb = candidate - candidate.mean()
    ob = template - template.mean()
    stt = tb @ tb
    soo = ob @ ob
    if stt < VARIANCE_EPS or soo < VARIANCE_EPS:
        return 0.0
    return float((tb @ ob) / np.sqrt(stt * soo))


def zscore_normalize(patch) -> np.ndarray:
    """(I - mean) / sample std; constant patches normalize to zeros."""
    patch = np.asarray(patch, dtype=np.float64).ravel()
    if patch.size < 2:
        raise ValueError("z-score normalization needs at least 2 pixels")
    centered = patch - patch.mean()
    var = centered @ centered / (patch.size - 1)
    if var < VARIANCE_EPS:
        return np.zeros_like(patch)
    return centered / np.sqrt(var)


def _spss_terms(template, candidate, constants):
    q = candidate ** 2 + template ** 2 + constants.c1
    f = (2.0 * candidate * template + constants.c1) / q
    return q, f


def similarity(kind: str, template, candidate, intensity_map=None,
               constants: SSIMConstants = DEFAULT_CONSTANTS) -> float:
    """Similarity value between a template patch and a candidate patch.

    Larger is always better: perfect match gives 0 for the (negated)
    L2-family, 1 for ncc/ssim, and N for spss.
    """
    if kind not in AM_KINDS:
        raise ValueError(f"unknown AM kind {kind!r}")
    template, candidate = _check_pair(template, candidate)
    if kind == "ssd":
        diff = candidate - template
        return float(-(diff @ diff))
    if kind == "ncc":
        return _pearson(template, candidate)
    if kind == "zncc":
        diff = zscore_normalize(candidate) - zscore_normalize(template)
        return float(-(diff @ diff))
    if kind in HISTOGRAM_KINDS:
        eff_t, eff_c = _effective_pair(kind, template, candidate, intensity_map)
        diff = eff_c - eff_t
        return float(-(diff @ diff))
    if kind == "ssim":
        return float(ssim_intermediates(template, candidate, constants).value)
    # spss
    _, f = _spss_terms(template, candidate, constants)
    return float(f.sum())


def batch_similarity(kind: str, reference, patches, reference_is_template: bool = True,
                     constants: SSIMConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Similarity of one reference patch against rows of an (M, N) matrix.

    Vectorized for the analytic kinds; the histogram kinds fall back to a
    per-row loop because each pair owns its own expectation map.
    """
    reference = np.asarray(reference, dtype=np.float64).ravel()
    patches = np.atleast_2d(np.asarray(patches, dtype=np.float64))
    if patches.shape[1] != reference.size:
        raise ValueError("patch matrix width disagrees with the reference")
    n = reference.size

    if kind in HISTOGRAM_KINDS:
        if reference_is_template:
            return np.array([similarity(kind, reference, row, constants=constants)
                             for row in patches])
        return np.array([similarity(kind, row, reference, constants=constants)
                         for row in patches])

    if kind == "ssd":
        diff = patches - reference[None, :]
        return -np.einsum("ij,ij->i", diff, diff)
    if kind in ("ncc", "zncc"):
        rb = reference - reference.mean()
        pb = patches - patches.mean(axis=1, keepdims=True)
        s_rr = rb @ rb
        s_pp = np.einsum("ij,ij->i", pb, pb)
        s_rp = pb @ rb
        valid = (s_pp > VARIANCE_EPS) & (s_rr > VARIANCE_EPS)
        rho = np.zeros(patches.shape[0])
        rho[valid] = s_rp[valid] / np.sqrt(s_pp[valid] * s_rr)
        if kind == "ncc":
            return rho
        out = -2.0 * (n - 1) * (1.0 - rho)
        # degenerate rows mirror the scalar-path sentinel (zero vectors)
        if not np.all(valid):
            for i in np.flatnonzero(~valid):
                row = patches[i]
                t, c = (reference, row) if reference_is_template else (row, reference)
                out[i] = similarity("zncc", t, c)
        return out
    if kind == "ssim":
        c1, c2 = constants.c1, constants.c2
        mu_r = reference.mean()
        mu_p = patches.mean(axis=1)
        rb = reference - mu_r
        pb = patches - mu_p[:, None]
        var_r = rb @ rb / (n - 1)
        var_p = np.einsum("ij,ij->i", pb, pb) / (n - 1)
        cov = (pb @ rb) / (n - 1)
        return ((2.0 * mu_p * mu_r + c1) * (2.0 * cov + c2)
                / ((mu_p ** 2 + mu_r ** 2 + c1) * (var_p + var_r + c2)))
    if kind == "spss":
        q = patches ** 2 + reference[None, :] ** 2 + constants.c1
        return ((2.0 * patches * reference[None, :] + constants.c1) / q).sum(axis=1)
    raise ValueError(f"unknown AM kind {kind!r}")


def _ssim_gradient(stats: SSIMIntermediates) -> np.ndarray:
    s0 = 2.0 / (stats.c * stats.d)
    return s0 * ((stats.a * stats.o_centered - stats.c * stats.value * stats.t_centered)
                 / (stats.n - 1)
                 + (stats.mu_0 * stats.b - stats.mu_t * stats.value * stats.d) / stats.n)


def gradient(kind: str, template, candidate, wrt: str = "candidate",
             intensity_map=None,
             constants: SSIMConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Analytic d f / d I with respect to the chosen patch, length N.

    For scv/rscv the derivative is taken with the expectation map held fixed
    and with respect to the substituted intensities on the side the
    substitution touched (the usual ssd-after-substitution convention).
    """
    if wrt not in ("candidate", "template"):
        raise ValueError(f"wrt must be 'candidate' or 'template', got {wrt!r}")
    if kind not in AM_KINDS:
        raise ValueError(f"unknown AM kind {kind!r}")
    template, candidate = _check_pair(template, candidate)

    if kind == "ssd":
        diff = candidate - template
        return -2.0 * diff if wrt == "candidate" else 2.0 * diff
    if kind in HISTOGRAM_KINDS:
        eff_t, eff_c = _effective_pair(kind, template, candidate, intensity_map)
        diff = eff_c - eff_t
        return -2.0 * diff if wrt == "candidate" else 2.0 * diff
    if kind in ("ncc", "zncc"):
        tb = candidate - candidate.mean()
        ob = template - template.mean()
        stt = tb @ tb
        soo = ob @ ob
        if stt < VARIANCE_EPS or soo < VARIANCE_EPS:
            return np.zeros_like(candidate)
        rho = (tb @ ob) / np.sqrt(stt * soo)
        if wrt == "candidate":
            grad = ob / np.sqrt(stt * soo) - rho * tb / stt
        else:
            grad = tb / np.sqrt(stt * soo) - rho * ob / soo
        if kind == "zncc":
            grad = 2.0 * (template.size - 1) * grad
        return grad
    if kind == "ssim":
        if wrt == "candidate":
            return _ssim_gradient(ssim_intermediates(template, candidate, constants))
        # ssim is symmetric: differentiate with the patch roles swapped
        return _ssim_gradient(ssim_intermediates(candidate, template, constants))
    # spss
    q, f = _spss_terms(template, candidate, constants)
    if wrt == "candidate":
        return 2.0 * (template - candidate * f) / q
    return 2.0 * (candidate - template * f) / q


def _ssim_hessian(stats: SSIMIntermediates) -> StructuredHessian:
    """Exact d2 f_ssim / d I_t2 over the basis {ones, template-bar, candidate-bar}."""
    n, a, b, c, d, f = stats.n, stats.a, stats.b, stats.c, stats.d, stats.value
    mu_t, mu_0 = stats.mu_t, stats.mu_0
    ones = np.ones(n)
    u = stats.o_centered
    v = stats.t_centered
    k_ee = (2.0 * f / (n * (n - 1) * d) - 2.0 * f / (n * n * c)
            + 8.0 * mu_t ** 2 * f / (n * n * c * c)
            - 8.0 * mu_t * mu_0 * b / (n * n * c * c * d))
    k_eu = (4.0 * mu_0 / (n * (n - 1) * c * d)
            - 4.0 * mu_t * a / (n * (n - 1) * c * c * d))
    k_ev = (4.0 * mu_t * f / (n * (n - 1) * c * d)
            - 4.0 * mu_0 * b / (n * (n - 1) * c * d * d))
    k_uv = -4.0 * a / ((n - 1) ** 2 * c * d * d)
    k_vv = 8.0 * f / ((n - 1) ** 2 * d * d)
    lam = -2.0 * f / ((n - 1) * d)
    terms = [
        (k_ee, ones, ones),
        (k_eu, ones, u), (k_eu, u, ones),
        (k_ev, ones, v), (k_ev, v, ones),
        (k_uv, u, v), (k_uv, v, u),
        (k_vv, v, v),
    ]
    return StructuredHessian(n=n, diag=np.full(n, lam), terms=terms)


def hessian_full(kind: str, template, candidate,
                 constants: SSIMConstants = DEFAULT_CONSTANTS) -> StructuredHessian:
    """Exact second derivative w.r.t. the candidate patch (ssim and spss only)."""
    template, candidate = _check_pair(template, candidate)
    if kind == "ssim":
        return _ssim_hessian(ssim_intermediates(template, candidate, constants))
    if kind == "spss":
        q, f = _spss_terms(template, candidate, constants)
        fp = 2.0 * (template - candidate * f) / q
        diag = -2.0 * (f + 2.0 * candidate * fp) / q
        return StructuredHessian(n=template.size, diag=diag)
    raise ValueError(f"full hessians are only provided for ssim/spss, not {kind!r}")


def self_hessian(kind: str, patch,
                 constants: SSIMConstants = DEFAULT_CONSTANTS) -> StructuredHessian:
    """Second derivative at the perfect-match point f(I, I), structured.

    This is the Hessian piece the optimizers use; the gradient term vanishes
    there for every implemented model, so the projected form is the whole
    Hessian approximation.
    """
    patch = np.asarray(patch, dtype=np.float64).ravel()
    n = patch.size
    if n == 0:
        raise ValueError("empty patch")
    if kind in ("ssd", "scv", "rscv"):
        return StructuredHessian(n=n, diag=np.full(n, -2.0))
    if kind in ("ncc", "zncc"):
        centered = patch - patch.mean()
        s = centered @ centered
        if s < VARIANCE_EPS:
            return StructuredHessian(n=n, diag=np.zeros(n))
        hess = StructuredHessian(
            n=n,
            diag=np.full(n, -1.0 / s),
            terms=[(1.0 / s ** 2, centered, centered),
                   (1.0 / (n * s), np.ones(n), np.ones(n))],
        )
        if kind == "zncc":
            scale = 2.0 * (n - 1)
            hess.diag = hess.diag * scale
            hess.terms = [(coeff * scale, u, v) for coeff, u, v in hess.terms]
        return hess
    if kind == "ssim":
        if n < 2:
            raise ValueError("ssim needs at least 2 pixels")
        mu = patch.mean()
        centered = patch - mu
        var = centered @ centered / (n - 1)
        cbar = 2.0 * mu ** 2 + constants.c1
        dbar = 2.0 * var + constants.c2
        ones_coeff = (-2.0 / (cbar * dbar)) * (dbar / n ** 2 - cbar / (n * (n - 1)))
        return StructuredHessian(
            n=n,
            diag=np.full(n, -2.0 / ((n - 1) * dbar)),
            terms=[(ones_coeff, np.ones(n), np.ones(n))],
        )
    if kind == "spss":
        return StructuredHessian(
            n=n, diag=-2.0 / (2.0 * patch ** 2 + constants.c1))
    raise ValueError(f"unknown AM kind {kind!r}")


def evaluate_bundle(kind: str, template, candidate, intensity_map=None,
                    constants: SSIMConstants = DEFAULT_CONSTANTS
                    ) -> SimilarityBundle:
    """Similarity value, candidate-side gradient, and curvature in one call."""
    template, candidate = _check_pair(template, candidate)
    if kind in HISTOGRAM_KINDS and intensity_map is None:
        intensity_map = build_intensity_map(kind, template, candidate)
    value = similarity(kind, template, candidate, intensity_map, constants)
    grad = gradient(kind, template, candidate, "candidate", intensity_map,
                    constants)
    if kind in ("ssim", "spss"):
        hessian = hessian_full(kind, template, candidate, constants)
    else:
        hessian = self_hessian(kind, candidate, constants)
    return SimilarityBundle(value=value, grad=grad, hessian=hessian)


# Perfect-match value and a characteristic mismatch scale per kind, used to
# put similarity values of different models on one footing (particle weights).
def normalized_score(kind: str, value, n: int,
                     mismatch_gray: float = 20.0) -> np.ndarray:
    """Map raw similarity to a common scale: 0 at perfect match, negative below.

    The L2-family is scaled by N * mismatch_gray**2 so that an RMS pixel
    error of ``mismatch_gray`` gray levels lands near -1 for every kind.
    """
    value = np.asarray(value, dtype=np.float64)
    if kind in ("ssd", "scv", "rscv"):
        return value / (n * mismatch_gray ** 2)
    if kind == "ncc":
        return value - 1.0
    if kind == "zncc":
        return value / (2.0 * (n - 1))
    if kind == "ssim":
        return value - 1.0
    if kind == "spss":
        return value / n - 1.0
    raise ValueError(f"unknown AM kind {kind!r}")
