"""Modular registration-based tracking.

Trackers are assembled from three interchangeable parts: an appearance
model (how patch similarity and its derivatives are computed), a
state-space model (the warp family and its Jacobians), and a search method
(the optimizer that drives the warp). Any of the 7 appearance models and
7 warp families can be combined with any of the 11 search methods.
"""

from .am import (AM_KINDS, DEFAULT_CONSTANTS, IntensityMap, SimilarityBundle,
                 SSIMConstants, StructuredHessian, batch_similarity,
                 build_intensity_map, evaluate_bundle, gradient, hessian_full,
                 self_hessian, similarity, zscore_normalize)
from .evaluation import (RunResult, SRCurve, alignment_error,
                         project_ground_truth, run_multi_init, run_reinit,
                         run_single, sr_curve, success_rate)
from .image import (GeometryError, GrayImage, Patch, extract_patch,
                    gaussian_smooth, image_gradient, sample_bilinear,
                    sampling_grid)
from .sm import (COMPOSITE_STAGES, GD_VARIANTS, SM_KINDS, STOCHASTIC_KINDS,
                 GDConfig, NNConfig, PFConfig, RansacConfig, StepError,
                 Tracker, TrackerSpec, gaussian_param_sigmas, newton_step)
from .ssm import (MIN_FIT_POINTS, PARAM_COUNTS, SSM_KINDS, FitError,
                  WarpParams, compose, identity_params, invert,
                  matrix_from_params, params_from_matrix, params_from_points,
                  params_to_corners, warp_jacobian, warp_points)
from .synthetic import (SyntheticSpec, generate_synthetic, random_walk_motion,
                        texture_image, translation_jump_motion)

__version__ = "0.1.0"
