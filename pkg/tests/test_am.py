import numpy as np
import pytest

from regtrack import am
from regtrack.am import (DEFAULT_CONSTANTS, batch_similarity,
                         build_intensity_map, gradient, hessian_full,
                         self_hessian, similarity, zscore_normalize)

C1 = DEFAULT_CONSTANTS.c1
C2 = DEFAULT_CONSTANTS.c2

RNG = np.random.default_rng(2024)


def random_pair(rng, n=16, integer=False):
    if integer:
        return (rng.integers(0, 256, n).astype(float),
                rng.integers(0, 256, n).astype(float))
    return rng.uniform(0.0, 255.0, n), rng.uniform(0.0, 255.0, n)


def fd_gradient(kind, template, candidate, wrt, h=1e-3):
    """Central differences of the similarity value itself."""
    base_t, base_c = template.copy(), candidate.copy()
    patch = base_c if wrt == "candidate" else base_t
    out = np.zeros_like(patch)
    for k in range(patch.size):
        saved = patch[k]
        patch[k] = saved + h
        hi = similarity(kind, base_t, base_c)
        patch[k] = saved - h
        lo = similarity(kind, base_t, base_c)
        patch[k] = saved
        out[k] = (hi - lo) / (2 * h)
    return out


def fd_hessian(kind, template, candidate, h=0.5):
    n = candidate.size
    out = np.zeros((n, n))
    work = candidate.copy()

    def value():
        return similarity(kind, template, work)

    for i in range(n):
        for j in range(i, n):
            si, sj = work[i], work[j]
            work[i] += h
            work[j] += h
            vpp = value()
            work[i], work[j] = si, sj
            work[i] += h
            work[j] -= h
            vpm = value()
            work[i], work[j] = si, sj
            work[i] -= h
            work[j] += h
            vmp = value()
            work[i], work[j] = si, sj
            work[i] -= h
            work[j] -= h
            vmm = value()
            work[i], work[j] = si, sj
            out[i, j] = out[j, i] = (vpp - vpm - vmp + vmm) / (4 * h * h)
    return out


class TestSimilarityValues:
    def test_perfect_match_fixed_points(self):
        patch = RNG.uniform(0, 255, 32)
        assert similarity("ssim", patch, patch) == pytest.approx(1.0)
        assert similarity("ncc", patch, patch) == pytest.approx(1.0)
        assert similarity("ssd", patch, patch) == 0.0
        assert similarity("spss", patch, patch) == pytest.approx(len(patch))

    def test_constant_patches_hand_value(self):
        # luminance term only: (2*50*100 + C1) / (50^2 + 100^2 + C1)
        for n in (2, 16, 100):
            value = similarity("ssim", np.full(n, 50.0), np.full(n, 100.0))
            assert value == pytest.approx(10006.5025 / 12506.5025, abs=1e-9)
            assert value == pytest.approx(0.800104, abs=5e-7)

    def test_spss_single_zero_pixel(self):
        assert similarity("spss", [0.0], [0.0]) == pytest.approx(1.0)

    def test_ssd_is_negated_squared_error(self):
        assert similarity("ssd", [10.0, 20.0], [13.0, 18.0]) == pytest.approx(-13.0)

    def test_mismatched_sizes_rejected(self):
        with pytest.raises(ValueError):
            similarity("ssd", np.zeros(3), np.zeros(4))

    def test_zero_variance_ncc_sentinel(self):
        assert similarity("ncc", np.full(8, 9.0), RNG.uniform(0, 255, 8)) == 0.0

    def test_maximized_at_perfect_match(self):
        rng = np.random.default_rng(5)
        for kind in am.AM_KINDS:
            for _ in range(1000):
                template, other = random_pair(rng, n=12, integer=True)
                best = similarity(kind, template, template)
                assert similarity(kind, template, other) <= best + 1e-9


class TestGradients:
    def test_ssd_example(self):
        grad = gradient("ssd", np.array([10.0, 20.0]), np.array([13.0, 18.0]))
        np.testing.assert_allclose(grad, [-6.0, 4.0])

    @pytest.mark.parametrize("kind", am.AM_KINDS)
    def test_zero_at_perfect_match(self, kind):
        rng = np.random.default_rng(6)
        # histogram models quantize to integer bins, where the conditional
        # means coincide with the values themselves
        integer = kind in am.HISTOGRAM_KINDS
        for _ in range(10):
            patch, _ = random_pair(rng, n=24, integer=integer)
            for wrt in ("candidate", "template"):
                grad = gradient(kind, patch, patch, wrt)
                np.testing.assert_allclose(grad, 0.0, atol=1e-9)

    @pytest.mark.parametrize("kind", ("ssd", "ncc", "zncc", "ssim", "spss"))
    def test_candidate_side_matches_finite_differences(self, kind):
        rng = np.random.default_rng(7)
        for _ in range(10):
            template, candidate = random_pair(rng, n=16)
            grad = gradient(kind, template, candidate, "candidate")
            fd = fd_gradient(kind, template, candidate, "candidate")
            assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-4

    @pytest.mark.parametrize("kind", ("ssd", "ncc", "zncc", "ssim", "spss"))
    def test_template_side_matches_finite_differences(self, kind):
        rng = np.random.default_rng(8)
        for _ in range(5):
            template, candidate = random_pair(rng, n=16)
            grad = gradient(kind, template, candidate, "template")
            fd = fd_gradient(kind, template, candidate, "template")
            assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-4

    def test_scv_candidate_side_is_exact_derivative(self):
        # bins ride on the template, so the fixed-map derivative w.r.t. the
        # candidate is exact even when the map is rebuilt per evaluation
        rng = np.random.default_rng(9)
        template, candidate = random_pair(rng, n=32)
        grad = gradient("scv", template, candidate, "candidate")
        fd = fd_gradient("scv", template, candidate, "candidate")
        np.testing.assert_allclose(grad, fd, atol=1e-6)

    def test_rscv_template_side_is_exact_derivative(self):
        rng = np.random.default_rng(10)
        template, candidate = random_pair(rng, n=32)
        grad = gradient("rscv", template, candidate, "template")
        fd = fd_gradient("rscv", template, candidate, "template")
        np.testing.assert_allclose(grad, fd, atol=1e-6)

    def test_substituted_side_convention(self):
        # the substituted sides follow the ssd form on the effective pair
        rng = np.random.default_rng(11)
        template, candidate = random_pair(rng, n=32)
        scv_map = build_intensity_map("scv", template, candidate)
        np.testing.assert_allclose(
            gradient("scv", template, candidate, "template", scv_map),
            2.0 * (candidate - scv_map.apply(template)))
        rscv_map = build_intensity_map("rscv", template, candidate)
        np.testing.assert_allclose(
            gradient("rscv", template, candidate, "candidate", rscv_map),
            -2.0 * (rscv_map.apply(candidate) - template))


class TestHessians:
    def test_ssim_full_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            template, candidate = random_pair(rng, n=10)
            dense = hessian_full("ssim", template, candidate).densify()
            fd = fd_hessian("ssim", template, candidate)
            rel = np.linalg.norm(dense - fd) / np.linalg.norm(fd)
            assert rel < 1e-3

    def test_spss_full_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        template, candidate = random_pair(rng, n=10)
        dense = hessian_full("spss", template, candidate).densify()
        fd = fd_hessian("spss", template, candidate, h=0.05)
        assert np.linalg.norm(dense - fd) / np.linalg.norm(fd) < 1e-3

    def test_ssim_full_is_symmetric(self):
        template, candidate = random_pair(RNG, n=20)
        dense = hessian_full("ssim", template, candidate).densify()
        assert np.abs(dense - dense.T).max() < 1e-9

    def test_spss_single_pixel_forms(self):
        v = 37.0
        dense = hessian_full("spss", [v], [v]).densify()
        np.testing.assert_allclose(dense, [[-2.0 / (2 * v * v + C1)]])

    def test_full_hessian_limited_to_ssim_spss(self):
        with pytest.raises(ValueError):
            hessian_full("ssd", np.zeros(4), np.zeros(4))


class TestSelfHessians:
    def test_ssd_is_minus_two_identity(self):
        patch = RNG.uniform(0, 255, 9)
        np.testing.assert_array_equal(self_hessian("ssd", patch).densify(),
                                      -2.0 * np.eye(9))

    @pytest.mark.parametrize("kind", ("ssim", "spss"))
    def test_matches_full_hessian_at_equality(self, kind):
        rng = np.random.default_rng(14)
        for _ in range(20):
            patch = rng.uniform(0, 255, 16)
            own = self_hessian(kind, patch).densify()
            full = hessian_full(kind, patch, patch).densify()
            assert np.abs(own - full).max() < 1e-9

    def test_spss_zero_patch(self):
        dense = self_hessian("spss", [0.0, 0.0]).densify()
        np.testing.assert_allclose(dense, np.diag([-2.0 / C1, -2.0 / C1]))

    @pytest.mark.parametrize("kind", ("ncc", "zncc", "ssim"))
    def test_matches_finite_difference_hessian_at_equality(self, kind):
        rng = np.random.default_rng(15)
        patch = rng.uniform(20, 230, 8)
        dense = self_hessian(kind, patch).densify()

        def pinned(values):
            return similarity(kind, patch, values)

        n = patch.size
        fd = np.zeros((n, n))
        h = 0.05
        for i in range(n):
            for j in range(i, n):
                w = patch.copy()
                w[i] += h
                w[j] += h
                vpp = pinned(w)
                w = patch.copy()
                w[i] += h
                w[j] -= h
                vpm = pinned(w)
                w = patch.copy()
                w[i] -= h
                w[j] += h
                vmp = pinned(w)
                w = patch.copy()
                w[i] -= h
                w[j] -= h
                vmm = pinned(w)
                fd[i, j] = fd[j, i] = (vpp - vpm - vmp + vmm) / (4 * h * h)
        assert np.linalg.norm(dense - fd) / np.linalg.norm(fd) < 1e-4

    def test_structured_projection_agrees_with_dense(self):
        rng = np.random.default_rng(16)
        patch = rng.uniform(0, 255, 30)
        basis = rng.normal(size=(30, 4))
        for kind in am.AM_KINDS:
            hess = self_hessian(kind, patch)
            np.testing.assert_allclose(hess.project(basis),
                                       basis.T @ hess.densify() @ basis,
                                       atol=1e-9)


class TestIntensityMaps:
    def test_identity_at_equality_gives_zero_similarity(self):
        patch = RNG.integers(0, 256, 64).astype(float)
        assert similarity("scv", patch, patch) == 0.0
        assert similarity("rscv", patch, patch) == 0.0

    def test_uniform_shift_is_absorbed(self):
        rng = np.random.default_rng(17)
        template = rng.integers(0, 200, 64).astype(float)
        candidate = template + 50.0
        imap = build_intensity_map("scv", template, candidate)
        occupied = np.unique(template.astype(int))
        np.testing.assert_allclose(imap.table[occupied], occupied + 50.0)
        assert similarity("scv", template, candidate) == pytest.approx(0.0)

    def test_conditional_means_match_bruteforce(self):
        rng = np.random.default_rng(18)
        template = rng.uniform(0, 255, 200)
        candidate = rng.uniform(0, 255, 200)
        imap = build_intensity_map("scv", template, candidate)
        bins = np.rint(template).astype(int)
        for b in range(256):
            members = candidate[bins == b]
            expected = members.mean() if members.size else float(b)
            assert imap.table[b] == pytest.approx(expected, abs=1e-12)

    def test_rscv_conditions_on_candidate(self):
        rng = np.random.default_rng(19)
        template = rng.uniform(0, 255, 100)
        candidate = rng.uniform(0, 255, 100)
        imap = build_intensity_map("rscv", template, candidate)
        bins = np.rint(candidate).astype(int)
        for b in np.unique(bins):
            np.testing.assert_allclose(imap.table[b],
                                       template[bins == b].mean())

    def test_map_only_for_histogram_kinds(self):
        with pytest.raises(ValueError):
            build_intensity_map("ssd", np.zeros(4), np.zeros(4))


class TestZScore:
    def test_two_pixel_example(self):
        np.testing.assert_allclose(zscore_normalize([0.0, 2.0]),
                                   [-1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_constant_patch_goes_to_zeros(self):
        np.testing.assert_array_equal(zscore_normalize(np.full(6, 3.3)),
                                      np.zeros(6))

    def test_random_patch_statistics(self):
        patch = RNG.uniform(0, 255, 500)
        z = zscore_normalize(patch)
        assert abs(z.mean()) < 1e-12
        assert z.var(ddof=1) == pytest.approx(1.0, abs=1e-9)


class TestAlgebraicRelations:
    def test_zncc_ncc_affine_relation(self):
        rng = np.random.default_rng(20)
        for _ in range(100):
            template, candidate = random_pair(rng, n=25)
            rho = similarity("ncc", template, candidate)
            expected = -2.0 * 24 * (1.0 - rho)
            assert similarity("zncc", template, candidate) == pytest.approx(
                expected, abs=1e-6)

    def test_ssim_symmetry_exact(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            a, b = random_pair(rng, n=12)
            assert similarity("ssim", a, b) == similarity("ssim", b, a)

    def test_ssim_bounded_by_one(self):
        rng = np.random.default_rng(22)
        for _ in range(500):
            a, b = random_pair(rng, n=8)
            assert abs(similarity("ssim", a, b)) <= 1.0 + 1e-12

    def test_spss_is_sum_of_pixelwise_scores(self):
        rng = np.random.default_rng(23)
        template, candidate = random_pair(rng, n=20)
        per_pixel = [similarity("spss", [t], [c])
                     for t, c in zip(template, candidate)]
        assert similarity("spss", template, candidate) == pytest.approx(
            sum(per_pixel), abs=1e-12)


class TestBatchSimilarity:
    @pytest.mark.parametrize("kind", am.AM_KINDS)
    def test_matches_scalar_path(self, kind):
        rng = np.random.default_rng(24)
        reference = rng.uniform(0, 255, 18)
        patches = rng.uniform(0, 255, size=(7, 18))
        as_template = batch_similarity(kind, reference, patches, True)
        expected = [similarity(kind, reference, row) for row in patches]
        np.testing.assert_allclose(as_template, expected, atol=1e-9)
        as_candidate = batch_similarity(kind, reference, patches, False)
        expected = [similarity(kind, row, reference) for row in patches]
        np.testing.assert_allclose(as_candidate, expected, atol=1e-9)

    def test_degenerate_rows_match_scalar_sentinels(self):
        reference = RNG.uniform(0, 255, 10)
        patches = np.vstack([np.full(10, 7.0), RNG.uniform(0, 255, 10)])
        for kind in ("ncc", "zncc"):
            batch = batch_similarity(kind, reference, patches, True)
            expected = [similarity(kind, reference, row) for row in patches]
            np.testing.assert_allclose(batch, expected, atol=1e-9)


def test_normalized_scores_zero_at_perfect_match():
    for kind in am.AM_KINDS:
        integer = kind in am.HISTOGRAM_KINDS
        patch, _ = random_pair(np.random.default_rng(25), n=40, integer=integer)
        value = similarity(kind, patch, patch)
        assert am.normalized_score(kind, value, patch.size) == pytest.approx(
            0.0, abs=1e-9)
