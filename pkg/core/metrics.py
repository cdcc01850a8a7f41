"""PSNR and SSIM on [0, 1] images, plus batch reports."""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.metrics import mean_absolute_error

from .exceptions import ParameterError, require_same_shape
from .imageio import IMAGE_SUFFIXES, read_image
from .imaging import as_pixel_image, grayscale

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 1.0


def psnr(a, b):
    a = as_pixel_image(a, "a")
    b = as_pixel_image(b, "b")
    require_same_shape(a, b, what="images")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def ssim_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    rows = sliding_window_view(img, g.size, axis=0) @ g
    return sliding_window_view(rows, g.size, axis=1) @ g


def ssim(a, b):
    """Mean local SSIM on grayscale, Gaussian 11x11 window, valid windows only."""
    a = grayscale(as_pixel_image(a, "a"))
    b = grayscale(as_pixel_image(b, "b"))
    require_same_shape(a, b, what="images")
    if min(a.shape) < SSIM_WINDOW:
        raise ParameterError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")

    g = ssim_window()
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def transmission_mae(estimate, truth):
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    require_same_shape(estimate, truth, what="transmission maps")
    return float(mean_absolute_error(truth.ravel(), estimate.ravel()))


@dataclass
class QualityReport:
    rows: list = field(default_factory=list)

    def add(self, name, psnr_db, ssim_value):
        self.rows.append({"name": name, "psnr": psnr_db, "ssim": ssim_value})

    @property
    def mean_psnr(self):
        if not self.rows:
            return math.nan
        values = [r["psnr"] for r in self.rows]
        return math.inf if any(math.isinf(v) for v in values) else float(np.mean(values))

    @property
    def mean_ssim(self):
        return float(np.mean([r["ssim"] for r in self.rows])) if self.rows else math.nan

    def to_dict(self):
        return {
            "images": list(self.rows),
            "count": len(self.rows),
            "mean": {"psnr": self.mean_psnr, "ssim": self.mean_ssim},
        }


def evaluate_pairs(pairs):
    """``pairs`` yields ``(name, reference, test)``."""
    report = QualityReport()
    for name, ref, test in pairs:
        report.add(name, psnr(ref, test), ssim(ref, test))
    return report


def pair_directories(ref_dir, test_dir):
    """Pair images with the same file name in both directories, sorted by name."""
    ref_dir, test_dir = Path(ref_dir), Path(test_dir)
    pairs = []
    for ref in sorted(ref_dir.iterdir()):
        if ref.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        test = test_dir / ref.name
        if not test.exists():
            logger.warning(f"No test image for {ref.name} in {test_dir}; skipped")
            continue
        pairs.append((ref.name, ref, test))
    if not pairs:
        raise ParameterError(f"no image pairs found between {ref_dir} and {test_dir}")
    return pairs


def evaluate_files(pairs):
    return evaluate_pairs((name, read_image(ref), read_image(test)) for name, ref, test in pairs)
