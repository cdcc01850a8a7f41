"""Raster types and the window filters the transmission estimator is built from.

Images are numpy arrays in float64: ``(H, W)`` for one channel and
``(H, W, 3)`` for color. A *pixel image* holds display intensities in [0, 1];
a *field image* holds unbounded finite reals (diffusion states, noise).
Every window operation replicates the border pixels.
"""
import logging
import math

import numpy as np
from scipy import ndimage
from sklearn.decomposition import PCA

from .exceptions import DimensionMismatchError, ParameterError

logger = logging.getLogger(__name__)

REC601 = np.array([0.299, 0.587, 0.114])

# Upper bound of the 3x3 Sobel magnitude for inputs in [0, 1]: |Gx|, |Gy| <= 4.
SOBEL_MAX = 4.0 * math.sqrt(2.0)

BORDER_MODE = "nearest"


def as_field_image(img, name="image"):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] not in (1, 3)):
        raise DimensionMismatchError(f"{name} must be HxW or HxWx3, got shape {arr.shape}")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains NaN or Inf values")
    return arr


def as_pixel_image(img, name="image"):
    arr = as_field_image(img, name)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ParameterError(f"{name} values must lie in [0, 1], got [{arr.min()}, {arr.max()}]")
    return arr


def as_map_image(img, name="map"):
    """A pixel image that must also be single-channel, such as a transmission map."""
    arr = as_pixel_image(img, name)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"dimension mismatch: {name} must be single-channel, got shape {arr.shape}")
    return arr


def channels(img):
    return 1 if img.ndim == 2 else img.shape[2]


def _require_single_channel(img, op):
    if img.ndim != 2:
        raise DimensionMismatchError(f"{op} expects a single-channel image, got shape {img.shape}")


def grayscale(img, method="rec601"):
    img = as_pixel_image(img)
    if img.ndim == 2:
        return img
    if method == "rec601":
        return img @ REC601
    if method == "pca":
        return _pca_grayscale(img)
    raise ParameterError(f"unknown grayscale method {method!r} (expected 'rec601' or 'pca')")


def _pca_grayscale(img):
    pixels = img.reshape(-1, 3)
    if np.ptp(pixels, axis=0).max() == 0.0:
        return img @ REC601

    pca = PCA(n_components=1, svd_solver="full").fit(pixels)
    weights = pca.components_[0]
    if weights.sum() < 0:
        weights = -weights
    if weights.sum() < 1e-6:
        logger.warning("PCA grayscale degenerate (component weights cancel); using Rec.601")
        return img @ REC601

    # Black maps to 0 and white to 1 along the principal axis.
    gray = (img @ weights) / weights.sum()
    return np.clip(gray, 0.0, 1.0)


def min_filter(img, window):
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"min_filter window must be odd and >= 1, got {window}")
    img = as_field_image(img)
    _require_single_channel(img, "min_filter")
    return ndimage.minimum_filter(img, size=window, mode=BORDER_MODE)


def sobel_magnitude(img):
    img = as_field_image(img)
    _require_single_channel(img, "sobel_magnitude")
    gy = ndimage.sobel(img, axis=0, mode=BORDER_MODE)
    gx = ndimage.sobel(img, axis=1, mode=BORDER_MODE)
    return np.hypot(gx, gy)


def gaussian_kernel(sigma):
    if not sigma > 0:
        raise ParameterError(f"gaussian sigma must be > 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(img, sigma):
    kernel = gaussian_kernel(sigma)
    img = as_field_image(img)
    _require_single_channel(img, "gaussian_blur")
    out = ndimage.correlate1d(img, kernel, axis=0, mode=BORDER_MODE)
    return ndimage.correlate1d(out, kernel, axis=1, mode=BORDER_MODE)


def box_filter(img, radius):
    if radius < 0:
        raise ParameterError(f"box radius must be >= 0, got {radius}")
    img = as_field_image(img)
    return ndimage.uniform_filter(img, size=2 * radius + 1, mode=BORDER_MODE)


def bilateral_blur(img, sigma_space, sigma_range):
    """Edge-preserving smoothing over a (2R+1)^2 window, R = ceil(3 * sigma_space)."""
    if not sigma_space > 0 or not sigma_range > 0:
        raise ParameterError(
            f"bilateral sigmas must be > 0, got space={sigma_space}, range={sigma_range}")
    img = as_field_image(img)
    _require_single_channel(img, "bilateral_blur")
    radius = math.ceil(3.0 * sigma_space)
    padded = np.pad(img, radius, mode="edge")
    h, w = img.shape

    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            shifted = padded[radius + dy:radius + dy + h, radius + dx:radius + dx + w]
            spatial = math.exp(-(dy * dy + dx * dx) / (2.0 * sigma_space ** 2))
            weight = spatial * np.exp(-((shifted - img) ** 2) / (2.0 * sigma_range ** 2))
            num += weight * shifted
            den += weight
    return num / den


def guided_filter(p, guide, radius, reg):
    """Edge-preserving refinement of ``p`` by local linear regression on ``guide``."""
    if radius < 1:
        raise ParameterError(f"guided filter radius must be >= 1, got {radius}")
    if not reg > 0:
        raise ParameterError(f"guided filter regularizer must be > 0, got {reg}")
    p = as_field_image(p, "p")
    guide = as_field_image(guide, "guide")
    if p.shape != guide.shape:
        raise DimensionMismatchError(f"guided filter input {p.shape} and guide {guide.shape} differ")
    _require_single_channel(p, "guided_filter")

    mean_i = box_filter(guide, radius)
    mean_p = box_filter(p, radius)
    cov_ip = box_filter(guide * p, radius) - mean_i * mean_p
    var_i = box_filter(guide * guide, radius) - mean_i * mean_i

    a = cov_ip / (var_i + reg)
    b = mean_p - a * mean_i
    return box_filter(a, radius) * guide + box_filter(b, radius)
