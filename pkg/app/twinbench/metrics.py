"""
Background-masked SSIM between paired renders.

Window statistics are uniform means over the full window (population
variance), evaluated only where the window fits inside the image, and the
three colour channels are averaged into one value per pixel.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import uniform_filter

from .exceptions import MetricError, NoForegroundError
from .mesh_io import RGB, RasterImage

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 11
DYNAMIC_RANGE = 255.0
C1 = (0.01 * DYNAMIC_RANGE) ** 2
C2 = (0.03 * DYNAMIC_RANGE) ** 2


@dataclass(frozen=True, eq=False)
class SsimMap:
    values: np.ndarray
    weights: Optional[np.ndarray] = None

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def foreground_px(self) -> int:
        if self.weights is None:
            return self.values.size
        return int(self.weights.sum())

    def weighted_mean(self) -> float:
        """Mean over pixels with weight 1; the plain mean when unweighted."""
        if self.weights is None:
            return float(self.values.mean())
        foreground = self.foreground_px
        if foreground == 0:
            raise NoForegroundError()
        return float(self.values[self.weights == 1].sum() / foreground)


def _check_pair(a: RasterImage, b: RasterImage, window: int) -> None:
    if window < 1 or window % 2 == 0:
        raise MetricError(f"SSIM window must be a positive odd integer, got {window}")
    if (a.width, a.height) != (b.width, b.height):
        raise MetricError(f"image size mismatch: {a.width}x{a.height} vs {b.width}x{b.height}")
    if a.width < window or a.height < window:
        raise MetricError(f"image {a.width}x{a.height} is smaller than the {window}x{window} window")


def _valid(array: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    return array[half:array.shape[0] - half, half:array.shape[1] - half]


def ssim_map(a: RasterImage, b: RasterImage, window: int = DEFAULT_WINDOW) -> SsimMap:
    _check_pair(a, b, window)
    x = a.pixels.astype(np.float64)
    y = b.pixels.astype(np.float64)
    size = (window, window, 1)

    def local_mean(array: np.ndarray) -> np.ndarray:
        return _valid(uniform_filter(array, size=size, mode="constant"), window)

    mu_x = local_mean(x)
    mu_y = local_mean(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = local_mean(x * x) - mu_xx
    var_y = local_mean(y * y) - mu_yy
    cov_xy = local_mean(x * y) - mu_xy

    numerator = (2.0 * mu_xy + C1) * (2.0 * cov_xy + C2)
    denominator = (mu_xx + mu_yy + C1) * (var_x + var_y + C2)
    return SsimMap(values=(numerator / denominator).mean(axis=2))


def background_mask(a: RasterImage, b: RasterImage, background: RGB,
                    window: int = DEFAULT_WINDOW) -> np.ndarray:
    """0 where both images hold exactly ``background``, 1 elsewhere; cropped to the SSIM region."""
    key = np.asarray(background, dtype=np.uint8)
    both = np.all(a.pixels == key, axis=2) & np.all(b.pixels == key, axis=2)
    return _valid((~both).astype(np.uint8), window)


def weighted_ssim_map(a: RasterImage, b: RasterImage, background: RGB,
                      window: int = DEFAULT_WINDOW) -> SsimMap:
    values = ssim_map(a, b, window).values
    return SsimMap(values=values, weights=background_mask(a, b, background, window))


@dataclass(frozen=True)
class FrameScore:
    index: int
    weighted_ssim: float
    foreground_px: int
    unweighted_ssim: float


def score_frame(a: RasterImage, b: RasterImage, background: RGB,
                window: int = DEFAULT_WINDOW, index: int = 0) -> FrameScore:
    weighted = weighted_ssim_map(a, b, background, window)
    return FrameScore(index, weighted.weighted_mean(), weighted.foreground_px,
                      float(weighted.values.mean()))


def weighted_ssim(a: RasterImage, b: RasterImage, background: RGB,
                  window: int = DEFAULT_WINDOW) -> float:
    return score_frame(a, b, background, window).weighted_ssim


def mean_ssim(a: RasterImage, b: RasterImage, window: int = DEFAULT_WINDOW) -> float:
    """Plain map mean with no background weighting."""
    return float(ssim_map(a, b, window).values.mean())


@dataclass(frozen=True, eq=False)
class SsimReport:
    per_frame: Tuple[FrameScore, ...]
    failed_frames: Tuple[int, ...]
    global_score: float
    unweighted_score: float

    @property
    def frames_used(self) -> int:
        return len(self.per_frame)


def score_model(gt_frames: Sequence[RasterImage], recon_frames: Sequence[RasterImage],
                background: RGB, window: int = DEFAULT_WINDOW,
                indices: Optional[Sequence[int]] = None, workers: int = 1) -> SsimReport:
    """
    Weighted SSIM per frame pair, averaged into the model's global score.
    Pairs that are background in both images are skipped and flagged.
    """
    if len(gt_frames) != len(recon_frames):
        raise MetricError(f"frame count mismatch: {len(gt_frames)} vs {len(recon_frames)}")
    if not gt_frames:
        raise MetricError("no frames to score")
    if indices is None:
        indices = range(len(gt_frames))

    def attempt(job):
        index, a, b = job
        try:
            return score_frame(a, b, background, window, index)
        except NoForegroundError:
            return index

    jobs = list(zip(indices, gt_frames, recon_frames))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(attempt, jobs))
    else:
        outcomes = [attempt(job) for job in jobs]

    scored: List[FrameScore] = [o for o in outcomes if isinstance(o, FrameScore)]
    failed = tuple(o for o in outcomes if not isinstance(o, FrameScore))
    if failed:
        logger.warning("%d frames have no foreground overlap and were excluded: %s",
                       len(failed), list(failed))
    if not scored:
        raise MetricError("every frame failed: no foreground overlap")

    return SsimReport(
        per_frame=tuple(scored),
        failed_frames=failed,
        global_score=float(np.mean([s.weighted_ssim for s in scored])),
        unweighted_score=float(np.mean([s.unweighted_ssim for s in scored])),
    )
