import numpy as np
import pytest

from regtrack import GeometryError, ssm
from regtrack.ssm import (SL3_BASIS, FitError, WarpParams, compose,
                          identity_params, invert, matrix_from_params,
                          params_from_matrix, params_from_points,
                          params_to_corners, warp_jacobian, warp_points)

BOX = np.array([[10.0, 20.0], [110.0, 15.0], [115.0, 118.0], [8.0, 112.0]])
RNG = np.random.default_rng(12345)


def random_params(kind, rng, spread=1.0):
    """Well-behaved random parameters of the given kind."""
    if kind == "translation":
        return WarpParams(kind, rng.normal(0, 3 * spread, 2))
    if kind == "isometry":
        return WarpParams(kind, np.concatenate(
            [rng.normal(0, 3 * spread, 2), rng.normal(0, 0.3 * spread, 1)]))
    if kind == "similitude":
        return WarpParams(kind, np.concatenate(
            [rng.normal(0, 3 * spread, 2), rng.normal(0, 0.1 * spread, 1),
             rng.normal(0, 0.3 * spread, 1)]))
    if kind == "affine":
        return WarpParams(kind, identity_params(kind).values
                          + rng.normal(0, 0.08 * spread, 6))
    if kind == "homography":
        jitter = np.concatenate([rng.normal(0, 0.08 * spread, 6),
                                 rng.normal(0, 2e-4 * spread, 2)])
        return WarpParams(kind, identity_params(kind).values + jitter)
    if kind == "sl3":
        # projective generators scaled so the infinity line stays far from
        # the (0..120)^2 test domain, mirroring the homography draws
        values = np.concatenate([rng.normal(0, 0.08 * spread, 6),
                                 rng.normal(0, 2e-4 * spread, 2)])
        return WarpParams(kind, values)
    if kind == "corners":
        return WarpParams(kind, (BOX + rng.normal(0, 4 * spread, (4, 2))).reshape(8),
                          ref=BOX)
    raise AssertionError(kind)


def expm_taylor(matrix, terms=40):
    """Independent matrix-exponential oracle: plain Taylor summation."""
    out = np.eye(3)
    term = np.eye(3)
    for k in range(1, terms):
        term = term @ matrix / k
        out = out + term
    return out


class TestWarpPoints:
    def test_identity_is_noop(self):
        pts = RNG.uniform(-10, 120, size=(20, 2))
        for kind in ssm.SSM_KINDS:
            ident = identity_params(kind, ref=BOX if kind == "corners" else None)
            np.testing.assert_allclose(warp_points(ident, pts), pts, atol=1e-9)

    def test_translation_example(self):
        p = WarpParams("translation", np.array([3.0, -2.0]))
        np.testing.assert_allclose(warp_points(p, [[1.0, 1.0]]), [[4.0, -1.0]])

    def test_sl3_generator_matches_taylor_exponential(self):
        # coefficient t on the x-translation generator only
        for t in (0.5, 2.0, -1.25):
            p = WarpParams("sl3", np.array([t, 0, 0, 0, 0, 0, 0, 0.0]))
            pts = RNG.uniform(0, 50, size=(10, 2))
            oracle = expm_taylor(t * SL3_BASIS[0])
            ph = np.column_stack([pts, np.ones(10)]) @ oracle.T
            np.testing.assert_allclose(warp_points(p, pts),
                                       ph[:, :2] / ph[:, 2:3], atol=1e-12)

    def test_plane_at_infinity_rejected(self):
        values = identity_params("homography").values.copy()
        values[6] = -0.01  # denominator vanishes at x = 100
        p = WarpParams("homography", values)
        with pytest.raises(GeometryError):
            warp_points(p, [[100.0, 0.0]])


class TestIdentityParams:
    def test_translation(self):
        np.testing.assert_array_equal(identity_params("translation").values,
                                      [0.0, 0.0])

    def test_homography_matrix_entries(self):
        np.testing.assert_array_equal(identity_params("homography").values,
                                      [1, 0, 0, 0, 1, 0, 0, 0])

    def test_corners_returns_reference_box(self):
        ident = identity_params("corners", ref=BOX)
        np.testing.assert_array_equal(ident.values, BOX.reshape(8))


class TestCompose:
    def test_identity_neutral(self):
        pts = RNG.uniform(0, 100, size=(50, 2))
        for kind in ssm.SSM_KINDS:
            ident = identity_params(kind, ref=BOX if kind == "corners" else None)
            p = random_params(kind, np.random.default_rng(3))
            np.testing.assert_allclose(
                warp_points(compose(p, ident), pts), warp_points(p, pts),
                atol=1e-9)

    def test_two_translations(self):
        a = WarpParams("translation", np.array([1.0, 2.0]))
        b = WarpParams("translation", np.array([3.0, 4.0]))
        np.testing.assert_allclose(compose(a, b).values, [4.0, 6.0])

    def test_random_homographies_nested_warp_oracle(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 100, size=(100, 2))
        for _ in range(20):
            a = random_params("homography", rng)
            b = random_params("homography", rng)
            nested = warp_points(a, warp_points(b, pts))
            np.testing.assert_allclose(warp_points(compose(a, b), pts),
                                       nested, atol=1e-9)

    def test_kind_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compose(identity_params("affine"), identity_params("translation"))


class TestInvert:
    def test_translation(self):
        p = WarpParams("translation", np.array([3.0, -2.0]))
        np.testing.assert_allclose(invert(p).values, [-3.0, 2.0])

    def test_sl3_negates_coefficients(self):
        p = WarpParams("sl3", RNG.normal(0, 0.1, 8))
        np.testing.assert_array_equal(invert(p).values, -p.values)

    def test_action_round_trip_random_affine(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(0, 100, size=(60, 2))
        for _ in range(20):
            p = random_params("affine", rng)
            round_trip = warp_points(invert(p), warp_points(p, pts))
            np.testing.assert_allclose(round_trip, pts, atol=1e-9)


class TestGroupLaws:
    @pytest.mark.parametrize("kind", ssm.SSM_KINDS)
    def test_associative_identity_inverse(self, kind):
        rng = np.random.default_rng(hash(kind) % 2 ** 32)
        pts = rng.uniform(0, 100, size=(40, 2))
        for _ in range(5):
            a = random_params(kind, rng)
            b = random_params(kind, rng)
            c = random_params(kind, rng)
            left = warp_points(compose(compose(a, b), c), pts)
            right = warp_points(compose(a, compose(b, c)), pts)
            np.testing.assert_allclose(left, right, atol=1e-9)
            ident = identity_params(kind, ref=BOX if kind == "corners" else None)
            np.testing.assert_allclose(
                warp_points(compose(ident, a), pts), warp_points(a, pts),
                atol=1e-9)
            np.testing.assert_allclose(
                warp_points(compose(a, invert(a)), pts), pts, atol=1e-9)
            np.testing.assert_allclose(
                warp_points(compose(invert(a), a), pts), pts, atol=1e-9)


def test_sl3_unit_determinant():
    rng = np.random.default_rng(23)
    for _ in range(50):
        values = rng.uniform(-0.1, 0.1, 8)
        matrix = matrix_from_params(WarpParams("sl3", values))
        assert abs(np.linalg.det(matrix) - 1.0) < 1e-9


def test_three_way_eight_dof_equivalence():
    rng = np.random.default_rng(31)
    pts = rng.uniform(0, 100, size=(100, 2))
    for _ in range(10):
        base = random_params("homography", rng, spread=1.5)
        matrix = matrix_from_params(base)
        warped = []
        for kind in ("homography", "sl3", "corners"):
            p = params_from_matrix(kind, matrix,
                                   ref=BOX if kind == "corners" else None)
            warped.append(warp_points(p, pts))
        np.testing.assert_allclose(warped[1], warped[0], atol=1e-6)
        np.testing.assert_allclose(warped[2], warped[0], atol=1e-6)


def test_lower_dof_embeds_in_higher():
    p = WarpParams("similitude", np.array([3.0, -2.0, 0.1, 0.25]))
    matrix = matrix_from_params(p)
    pts = RNG.uniform(0, 100, size=(50, 2))
    expected = warp_points(p, pts)
    for kind in ("affine", "homography"):
        np.testing.assert_allclose(
            warp_points(params_from_matrix(kind, matrix), pts), expected,
            atol=1e-9)


class TestWarpJacobian:
    def test_translation_identity_blocks(self):
        jac = warp_jacobian(identity_params("translation"),
                            np.array([[5.0, 7.0], [1.0, 2.0]]))
        for row in jac:
            np.testing.assert_array_equal(row, np.eye(2))

    def test_similitude_at_identity_columns(self):
        x, y = 3.0, 4.0
        jac = warp_jacobian(identity_params("similitude"),
                            np.array([[x, y]]))[0]
        np.testing.assert_allclose(jac[:, 0], [1, 0])
        np.testing.assert_allclose(jac[:, 1], [0, 1])
        np.testing.assert_allclose(jac[:, 2], [x, y])
        np.testing.assert_allclose(jac[:, 3], [-y, x])

    @pytest.mark.parametrize("kind", ssm.SSM_KINDS)
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(abs(hash("fd" + kind)) % 2 ** 32)
        pts = rng.uniform(0, 110, size=(8, 2))
        step = 1e-6
        for _ in range(3):
            p = random_params(kind, rng)
            jac = warp_jacobian(p, pts)
            fd = np.zeros_like(jac)
            for j in range(p.size):
                hi = p.values.copy()
                hi[j] += step
                lo = p.values.copy()
                lo[j] -= step
                fd[:, :, j] = (warp_points(p.with_values(hi), pts)
                               - warp_points(p.with_values(lo), pts)) / (2 * step)
            scale = max(np.abs(fd).max(), 1.0)
            assert np.abs(jac - fd).max() / scale < 1e-5


class TestParamsFromPoints:
    @pytest.mark.parametrize("kind", ssm.SSM_KINDS)
    def test_src_equals_dst_gives_identity(self, kind):
        src = BOX.copy()
        p = params_from_points(kind, src, src,
                               ref=BOX if kind == "corners" else None)
        np.testing.assert_allclose(warp_points(p, src), src, atol=1e-9)

    def test_translation_shift(self):
        square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        p = params_from_points("translation", square, square + [5.0, 0.0])
        np.testing.assert_allclose(p.values, [5.0, 0.0], atol=1e-12)

    def test_homography_dlt_residual(self):
        square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        quad = np.array([[2.0, 1.0], [11.0, 0.5], [12.5, 9.0], [1.0, 8.0]])
        p = params_from_points("homography", square, quad)
        np.testing.assert_allclose(warp_points(p, square), quad, atol=1e-9)

    def test_least_squares_beats_noise(self):
        rng = np.random.default_rng(5)
        src = rng.uniform(0, 100, size=(40, 2))
        truth = WarpParams("similitude", np.array([4.0, -1.0, 0.05, 0.1]))
        dst = warp_points(truth, src) + rng.normal(0, 0.01, size=(40, 2))
        p = params_from_points("similitude", src, dst)
        np.testing.assert_allclose(p.values, truth.values, atol=0.01)

    def test_collinear_points_rejected(self):
        line = np.column_stack([np.arange(5.0), np.arange(5.0)])
        with pytest.raises(FitError):
            params_from_points("affine", line, line + 1.0)
        # collinear source triple with non-collinear images: only a singular
        # projective map could fit, so the configuration must be refused
        src = np.vstack([line[:3], [[0.0, 1.0]]])
        dst = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 5.0], [0.0, 1.0]])
        with pytest.raises(FitError):
            params_from_points("homography", src, dst)

    def test_below_minimal_count_rejected(self):
        with pytest.raises(FitError):
            params_from_points("homography", BOX[:3], BOX[:3])


class TestParamsToCorners:
    def test_identity_keeps_box(self):
        ident = identity_params("homography")
        np.testing.assert_allclose(params_to_corners(ident, BOX), BOX)

    def test_translation_shifts_all_corners(self):
        p = WarpParams("translation", np.array([3.0, 4.0]))
        np.testing.assert_allclose(params_to_corners(p, BOX), BOX + [3.0, 4.0])

    def test_matches_warp_points(self):
        p = random_params("homography", np.random.default_rng(9))
        np.testing.assert_array_equal(params_to_corners(p, BOX),
                                      warp_points(p, BOX))


def test_warp_params_validation():
    with pytest.raises(ValueError):
        WarpParams("translation", np.zeros(3))
    with pytest.raises(ValueError):
        WarpParams("nope", np.zeros(2))
    with pytest.raises(ValueError):
        WarpParams("affine", identity_params("affine").values, ref=BOX)
    with pytest.raises(ValueError):
        WarpParams("translation", np.array([np.nan, 0.0]))
