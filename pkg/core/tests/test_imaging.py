import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DimensionMismatchError, ParameterError
from core.imaging import (
    SOBEL_MAX,
    as_pixel_image,
    bilateral_blur,
    box_filter,
    gaussian_blur,
    gaussian_kernel,
    grayscale,
    guided_filter,
    min_filter,
    sobel_magnitude,
)


def brute_min_filter(img, window):
    r = window // 2
    padded = np.pad(img, r, mode="edge")
    out = np.empty_like(img)
    for y in range(img.shape[0]):
        for x in range(img.shape[1]):
            out[y, x] = padded[y:y + window, x:x + window].min()
    return out


def brute_guided_filter(p, guide, radius, reg):
    """Literal per-window statistics with replicated borders."""
    h, w = p.shape
    size = 2 * radius + 1
    pp = np.pad(p, radius, mode="edge")
    gp = np.pad(guide, radius, mode="edge")
    a = np.empty_like(p)
    b = np.empty_like(p)
    for y in range(h):
        for x in range(w):
            wp = pp[y:y + size, x:x + size]
            wg = gp[y:y + size, x:x + size]
            cov = np.mean(wg * wp) - wg.mean() * wp.mean()
            var = np.mean(wg * wg) - wg.mean() ** 2
            a[y, x] = cov / (var + reg)
            b[y, x] = wp.mean() - a[y, x] * wg.mean()
    ap = np.pad(a, radius, mode="edge")
    bp = np.pad(b, radius, mode="edge")
    q = np.empty_like(p)
    for y in range(h):
        for x in range(w):
            q[y, x] = ap[y:y + size, x:x + size].mean() * guide[y, x] + bp[y:y + size, x:x + size].mean()
    return q


class GrayscaleTests(SimpleTestCase):
    def test_white_and_red(self):
        np.testing.assert_allclose(grayscale(np.ones((3, 3, 3))), 1.0)
        red = np.zeros((2, 2, 3))
        red[:, :, 0] = 1.0
        np.testing.assert_allclose(grayscale(red), 0.299)

    def test_random_matches_per_pixel_sum(self):
        img = np.random.default_rng(3).uniform(size=(4, 4, 3))
        gray = grayscale(img)
        for y in range(4):
            for x in range(4):
                r, g, b = img[y, x]
                self.assertAlmostEqual(gray[y, x], 0.299 * r + 0.587 * g + 0.114 * b, places=12)

    def test_single_channel_unchanged(self):
        img = np.random.default_rng(0).uniform(size=(5, 5))
        np.testing.assert_array_equal(grayscale(img), img)

    def test_pca_variant_in_range(self):
        img = np.random.default_rng(1).uniform(size=(8, 8, 3))
        gray = grayscale(img, method="pca")
        self.assertEqual(gray.shape, (8, 8))
        self.assertTrue(np.all((gray >= 0.0) & (gray <= 1.0)))

    def test_pca_of_gray_image_is_the_gray_value(self):
        img = np.repeat(np.linspace(0, 1, 16).reshape(4, 4)[:, :, None], 3, axis=2)
        np.testing.assert_allclose(grayscale(img, method="pca"), img[:, :, 0], atol=1e-9)

    def test_unknown_method(self):
        with self.assertRaises(ParameterError):
            grayscale(np.ones((2, 2, 3)), method="luma")

    def test_out_of_range_pixels_rejected(self):
        with self.assertRaises(ParameterError):
            as_pixel_image(np.full((2, 2), 1.5))


class MinFilterTests(SimpleTestCase):
    def test_constant_and_identity(self):
        np.testing.assert_array_equal(min_filter(np.full((5, 5), 0.3), 3), 0.3)
        img = np.random.default_rng(2).uniform(size=(6, 6))
        np.testing.assert_array_equal(min_filter(img, 1), img)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            img = rng.uniform(size=(5, 5))
            np.testing.assert_array_equal(min_filter(img, 3), brute_min_filter(img, 3))

    def test_output_bounded_by_input(self):
        img = np.random.default_rng(4).uniform(size=(9, 9))
        self.assertTrue(np.all(min_filter(img, 5) <= img))

    def test_bad_window(self):
        for window in (0, 2, -3):
            with self.assertRaises(ParameterError):
                min_filter(np.zeros((4, 4)), window)


class SobelTests(SimpleTestCase):
    def test_constant_is_flat(self):
        np.testing.assert_array_equal(sobel_magnitude(np.full((6, 6), 0.7)), 0.0)

    def test_vertical_step(self):
        img = np.zeros((8, 8))
        img[:, 4:] = 1.0
        grad = sobel_magnitude(img)
        self.assertTrue(np.all(grad[:, 3:5] > 0))
        np.testing.assert_array_equal(grad[:, :2], 0.0)
        np.testing.assert_array_equal(grad[:, 6:], 0.0)

    def test_ramp_interior_is_constant(self):
        width = 10
        img = np.tile(np.arange(width) / width, (6, 1))
        grad = sobel_magnitude(img)
        # Row smoothing sums to 4, central difference spans two pixels of 1/W.
        np.testing.assert_allclose(grad[1:-1, 1:-1], 8.0 / width, rtol=1e-12)

    def test_bound_holds_on_a_checkerboard(self):
        img = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
        self.assertLessEqual(sobel_magnitude(img).max(), SOBEL_MAX + 1e-12)


class BlurTests(SimpleTestCase):
    def test_kernel_radius_and_mass(self):
        kernel = gaussian_kernel(1.5)
        self.assertEqual(kernel.size, 2 * 5 + 1)
        self.assertAlmostEqual(kernel.sum(), 1.0, places=12)

    def test_constant_preserved(self):
        np.testing.assert_allclose(gaussian_blur(np.full((12, 12), 0.4), 2.0), 0.4, atol=1e-12)

    def test_impulse_center_value(self):
        img = np.zeros((15, 15))
        img[7, 7] = 1.0
        k = gaussian_kernel(1.0)
        self.assertAlmostEqual(gaussian_blur(img, 1.0)[7, 7], k[3] * k[3], places=12)

    def test_large_sigma_flattens(self):
        img = np.random.default_rng(5).uniform(size=(16, 16))
        out = gaussian_blur(img, 200.0)
        self.assertLess(np.ptp(out), 0.1)
        self.assertTrue(img.min() <= out.min() and out.max() <= img.max())

    def test_nonpositive_sigma(self):
        with self.assertRaises(ParameterError):
            gaussian_blur(np.zeros((3, 3)), 0.0)

    def test_box_filter_matches_window_mean(self):
        img = np.random.default_rng(6).uniform(size=(6, 6))
        padded = np.pad(img, 1, mode="edge")
        self.assertAlmostEqual(box_filter(img, 1)[2, 3], padded[2:5, 3:6].mean(), places=12)

    def test_bilateral_keeps_a_hard_edge(self):
        img = np.zeros((10, 10))
        img[:, 5:] = 1.0
        out = bilateral_blur(img, 1.0, 0.05)
        np.testing.assert_allclose(out[:, :5], 0.0, atol=1e-6)
        np.testing.assert_allclose(out[:, 5:], 1.0, atol=1e-6)


class GuidedFilterTests(SimpleTestCase):
    def test_constant_input(self):
        guide = np.random.default_rng(8).uniform(size=(10, 10))
        np.testing.assert_allclose(guided_filter(np.full((10, 10), 0.6), guide, 2, 1e-3), 0.6, atol=1e-6)

    def test_matches_literal_definition(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            p = rng.uniform(size=(8, 8))
            guide = rng.uniform(size=(8, 8))
            np.testing.assert_allclose(
                guided_filter(p, guide, 1, 1e-2), brute_guided_filter(p, guide, 1, 1e-2), atol=1e-5)

    def test_large_regularizer_limit(self):
        p = np.random.default_rng(10).uniform(size=(12, 12))
        out = guided_filter(p, p, 2, 1e6)
        np.testing.assert_allclose(out, box_filter(box_filter(p, 2), 2), atol=1e-5)

    def test_output_envelope(self):
        rng = np.random.default_rng(11)
        p = rng.uniform(size=(16, 16))
        out = guided_filter(p, rng.uniform(size=(16, 16)), 3, 1e-3)
        self.assertGreaterEqual(out.min(), p.min() - 0.05)
        self.assertLessEqual(out.max(), p.max() + 0.05)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            guided_filter(np.zeros((4, 4)), np.zeros((4, 5)), 1, 1e-3)
