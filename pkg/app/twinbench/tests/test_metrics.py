import numpy as np
from django.test import SimpleTestCase
from numpy.lib.stride_tricks import sliding_window_view

from twinbench.exceptions import MetricError, NoForegroundError
from twinbench.geometry import look_at
from twinbench.mesh_io import RasterImage
from twinbench.metrics import (
    C1, C2, background_mask, mean_ssim, score_frame, score_model, ssim_map, weighted_ssim,
    weighted_ssim_map,
)
from twinbench.poses import CameraPose
from twinbench.render import CameraIntrinsics, RenderSettings, rasterize
from twinbench.samples import checkerboard, unit_cube

WHITE = (255, 255, 255)


def naive_ssim(a, b, window=11):
    """Per-window statistics computed directly from each window's pixels."""
    x = sliding_window_view(a.pixels.astype(np.float64), (window, window), axis=(0, 1))
    y = sliding_window_view(b.pixels.astype(np.float64), (window, window), axis=(0, 1))
    mu_x = x.mean(axis=(3, 4))
    mu_y = y.mean(axis=(3, 4))
    dx = x - mu_x[..., None, None]
    dy = y - mu_y[..., None, None]
    var_x = (dx * dx).mean(axis=(3, 4))
    var_y = (dy * dy).mean(axis=(3, 4))
    cov = (dx * dy).mean(axis=(3, 4))
    values = ((2 * mu_x * mu_y + C1) * (2 * cov + C2)) / ((mu_x ** 2 + mu_y ** 2 + C1) * (var_x + var_y + C2))
    return values.mean(axis=2)


def random_image(rng, width=64, height=64):
    return RasterImage.from_array(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def framed(width=64, height=64, patch=None, top=22, left=22):
    pixels = np.full((height, width, 3), 255, dtype=np.uint8)
    if patch is not None:
        pixels[top:top + patch.shape[0], left:left + patch.shape[1]] = patch
    return RasterImage.from_array(pixels)


class SsimMapTest(SimpleTestCase):

    def test_1_identical_images(self):
        image = random_image(np.random.default_rng(0))
        values = ssim_map(image, image).values
        assert values.shape == (54, 54)
        assert np.abs(values - 1.0).max() <= 1e-12

    def test_2_opposite_constants(self):
        black = RasterImage.filled(32, 32, (0, 0, 0))
        white = RasterImage.filled(32, 32, WHITE)
        expected = C1 / (255.0 ** 2 + C1)
        assert np.abs(ssim_map(black, white).values - expected).max() <= 1e-12

    def test_3_matches_direct_window_statistics(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = random_image(rng)
            # correlated pairs exercise the covariance term
            noise = rng.integers(-40, 41, size=a.pixels.shape)
            b = RasterImage.from_array(np.clip(a.pixels.astype(int) + noise, 0, 255).astype(np.uint8))
            assert np.abs(ssim_map(a, b).values - naive_ssim(a, b)).max() <= 1e-9

    def test_4_symmetric(self):
        rng = np.random.default_rng(2)
        a, b = random_image(rng), random_image(rng)
        assert np.array_equal(ssim_map(a, b).values, ssim_map(b, a).values)

    def test_5_argument_checks(self):
        a = RasterImage.filled(32, 32, WHITE)
        with self.assertRaises(MetricError):
            ssim_map(a, RasterImage.filled(32, 31, WHITE))
        with self.assertRaises(MetricError):
            ssim_map(RasterImage.filled(10, 10, WHITE), RasterImage.filled(10, 10, WHITE))
        with self.assertRaises(MetricError):
            ssim_map(a, a, window=8)


class BackgroundMaskTest(SimpleTestCase):

    def test_1_all_background(self):
        a = RasterImage.filled(32, 32, WHITE)
        assert not background_mask(a, a, WHITE).any()

    def test_2_single_foreground_pixel(self):
        a = RasterImage.filled(32, 32, WHITE)
        pixels = a.pixels.copy()
        pixels[16, 16] = (0, 0, 0)
        b = RasterImage.from_array(pixels)
        mask = background_mask(a, b, WHITE)
        assert mask.shape == (22, 22)
        assert mask.sum() == 1 and mask[11, 11] == 1

    def test_3_rendered_pair_matches_pixel_scan(self):
        intr = CameraIntrinsics(96, 54, 23.0)
        mesh = unit_cube()
        center = (0.5, 0.5, 0.5)
        first = CameraPose(position=[3.0, -4.0, 2.5], rotation=look_at([3.0, -4.0, 2.5], center))
        second = CameraPose(position=[3.2, -3.8, 2.6], rotation=look_at([3.2, -3.8, 2.6], center, 15.0))
        a = rasterize(mesh, first, intr)
        b = rasterize(mesh, second, intr)
        mask = background_mask(a, b, WHITE)
        expected = 0
        for i in range(5, 54 - 5):
            for j in range(5, 96 - 5):
                if tuple(a.pixels[i, j]) != WHITE or tuple(b.pixels[i, j]) != WHITE:
                    expected += 1
        assert int(mask.sum()) == expected

    def test_4_far_background_edits_leave_foreground_windows_alone(self):
        rng = np.random.default_rng(3)
        patch_a = rng.integers(0, 200, size=(10, 10, 3), dtype=np.uint8)
        patch_b = rng.integers(0, 200, size=(10, 10, 3), dtype=np.uint8)
        a, b = framed(patch=patch_a, top=5, left=5), framed(patch=patch_b, top=5, left=5)
        weights = background_mask(a, b, WHITE)
        before = ssim_map(a, b).values[weights == 1]

        edited_a, edited_b = a.pixels.copy(), b.pixels.copy()
        edited_a[50, 50] = edited_b[50, 50] = (12, 34, 56)
        edited_a, edited_b = RasterImage.from_array(edited_a), RasterImage.from_array(edited_b)
        after = ssim_map(edited_a, edited_b).values[weights == 1]
        assert np.array_equal(before, after)


class WeightedSsimTest(SimpleTestCase):

    def test_1_identical_frames_score_one(self):
        image = framed(patch=checkerboard(20).pixels)
        assert weighted_ssim(image, image, WHITE) == 1.0

    def test_2_symmetric(self):
        rng = np.random.default_rng(4)
        a = framed(patch=rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8))
        b = framed(patch=rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8))
        assert weighted_ssim(a, b, WHITE) == weighted_ssim(b, a, WHITE)

    def test_3_background_only_pair_fails(self):
        a = RasterImage.filled(32, 32, WHITE)
        with self.assertRaises(NoForegroundError):
            score_frame(a, a, WHITE)

    def test_4_missing_reconstruction_scores_low(self):
        gt = framed(patch=checkerboard(20).pixels)
        empty = RasterImage.filled(64, 64, WHITE)
        score = weighted_ssim(gt, empty, WHITE)
        assert score < 0.5

    def test_5_weighting_ignores_shared_background(self):
        rng = np.random.default_rng(5)
        gt = framed(patch=checkerboard(20).pixels)
        recon = framed(patch=rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8))
        assert weighted_ssim(gt, recon, WHITE) < mean_ssim(gt, recon)

    def test_6_other_background_colour(self):
        grey = (40, 40, 40)
        image = RasterImage.filled(32, 32, grey)
        pixels = image.pixels.copy()
        pixels[10:20, 10:20] = 200
        frame = RasterImage.from_array(pixels)
        score = score_frame(frame, frame, grey)
        assert score.weighted_ssim == 1.0
        assert score.foreground_px > 0

    def test_7_weighted_map_carries_the_mask(self):
        rng = np.random.default_rng(7)
        gt = framed(patch=checkerboard(20).pixels)
        recon = framed(patch=rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8), top=26)
        weighted = weighted_ssim_map(gt, recon, WHITE)
        assert np.array_equal(weighted.weights, background_mask(gt, recon, WHITE))
        assert np.array_equal(weighted.values, ssim_map(gt, recon).values)
        assert weighted.foreground_px == int(background_mask(gt, recon, WHITE).sum())
        assert weighted.weighted_mean() == weighted_ssim(gt, recon, WHITE)
        assert ssim_map(gt, recon).weighted_mean() == mean_ssim(gt, recon)
        blank = RasterImage.filled(64, 64, WHITE)
        with self.assertRaises(NoForegroundError):
            weighted_ssim_map(blank, blank, WHITE).weighted_mean()


class ScoreModelTest(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(6)
        self.frames = [framed(patch=rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)) for _ in range(5)]

    def test_1_identical_frames(self):
        report = score_model(self.frames, self.frames, WHITE)
        assert report.global_score == 1.0
        assert report.frames_used == 5
        assert report.failed_frames == ()

    def test_2_background_pair_is_excluded(self):
        frames = list(self.frames)
        frames[2] = RasterImage.filled(64, 64, WHITE)
        report = score_model(frames, frames, WHITE, indices=[10, 11, 12, 13, 14], workers=3)
        assert report.frames_used == 4
        assert report.failed_frames == (12,)
        assert [s.index for s in report.per_frame] == [10, 11, 13, 14]

    def test_3_failures(self):
        blank = [RasterImage.filled(64, 64, WHITE)] * 3
        with self.assertRaises(MetricError):
            score_model(blank, blank, WHITE)
        with self.assertRaises(MetricError):
            score_model(self.frames, self.frames[:4], WHITE)

    def test_4_background_setting_is_respected(self):
        frames = [rasterize(unit_cube(), CameraPose(position=[3.0, -4.0, 2.5],
                                                    rotation=look_at([3.0, -4.0, 2.5], (0.5, 0.5, 0.5))),
                            CameraIntrinsics(64, 36), RenderSettings(background=(0, 0, 0)))]
        report = score_model(frames, frames, (0, 0, 0))
        assert report.global_score == 1.0
