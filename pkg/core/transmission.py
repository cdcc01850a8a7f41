"""Transmission-map estimation with sky preservation.

Dark channel -> initial transmission -> guided-filter refinement, except in
smooth bright (sky) regions where the unrefined estimate is kept, blended
through a feathered mask. The map is floored at ``t0`` last.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .config import DcpParams
from .exceptions import DimensionMismatchError, require_same_shape, require_same_size
from .imaging import (
    SOBEL_MAX,
    as_field_image,
    as_pixel_image,
    bilateral_blur,
    gaussian_blur,
    grayscale,
    guided_filter,
    min_filter,
    sobel_magnitude,
)

logger = logging.getLogger(__name__)

SKY = 255.0
AIRLIGHT_MIN = 0.05
# Range sigma used when the gradient map is smoothed bilaterally.
BILATERAL_RANGE_SIGMA = 0.1


@dataclass(frozen=True, eq=False)
class TransmissionEstimate:
    tmap: np.ndarray
    sky_mask: np.ndarray
    airlight: float
    dark: np.ndarray
    initial: np.ndarray
    gradient: np.ndarray
    sky_binary: np.ndarray

    def __iter__(self):
        # Unpacks as (tmap, sky_mask, airlight).
        return iter((self.tmap, self.sky_mask, self.airlight))


def _require_color(img, op):
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionMismatchError(f"{op} expects a 3-channel image, got shape {img.shape}")


def dark_channel(img, window=15):
    img = as_pixel_image(img)
    _require_color(img, "dark_channel")
    return min_filter(img.min(axis=2), window)


def estimate_airlight(img, dark, fraction=0.001):
    """Mean grayscale intensity of the brightest ``fraction`` of dark-channel pixels."""
    img = as_pixel_image(img)
    dark = as_field_image(dark, "dark")
    require_same_size(img, dark, what="image and dark channel")

    flat = dark.ravel()
    count = max(1, int(fraction * flat.size))
    brightest = np.argsort(flat, kind="stable")[-count:]
    airlight = float(grayscale(img).ravel()[brightest].mean())
    return float(np.clip(airlight, AIRLIGHT_MIN, 1.0))


def make_sky_mask(gray, grad, tau_g, tau_b):
    gray = as_field_image(gray, "gray")
    grad = as_field_image(grad, "grad")
    require_same_shape(gray, grad, what="grayscale and gradient maps")
    return np.where((grad < tau_g) & (gray > tau_b), SKY, 0.0)


def blend_sky_region(initial, refined, sky_smooth, t0):
    """Keep the unrefined estimate where the feathered mask is 255, floor at ``t0``."""
    weight = np.clip(sky_smooth, 0.0, SKY) / SKY
    blended = weight * initial + (1.0 - weight) * refined
    return np.clip(blended, t0, 1.0)


def normalized_gradient(gray, params):
    grad = sobel_magnitude(gray) / SOBEL_MAX
    if params.grad_filter == "bilateral":
        return bilateral_blur(grad, params.grad_sigma, BILATERAL_RANGE_SIGMA)
    return gaussian_blur(grad, params.grad_sigma)


def estimate_transmission(img, params=None, airlight=None):
    params = params or DcpParams()
    img = as_pixel_image(img)
    _require_color(img, "estimate_transmission")

    dark = dark_channel(img, params.window)
    if airlight is None:
        airlight = estimate_airlight(img, dark, params.airlight_fraction)
    initial = 1.0 - params.omega * dark / airlight

    gray = grayscale(img, params.gray_method)
    grad = normalized_gradient(gray, params)
    sky = make_sky_mask(gray, grad, params.tau_g, params.tau_b)
    sky_smooth = gaussian_blur(sky, params.feather_sigma)

    refined = guided_filter(initial, gray, params.guided_radius, params.guided_reg)
    tmap = blend_sky_region(initial, refined, sky_smooth, params.t0)

    logger.info(
        f"Transmission estimated: A={airlight:.4f}, sky={np.mean(sky > 0):.1%}, "
        f"mean t={tmap.mean():.4f}"
    )
    return TransmissionEstimate(
        tmap=tmap,
        sky_mask=sky_smooth,
        airlight=airlight,
        dark=dark,
        initial=initial,
        gradient=grad,
        sky_binary=sky,
    )


def recover_radiance(hazy, tmap, airlight, t0=0.1):
    """Classical prior-based dehazing: invert the scattering model with the floored map."""
    hazy = as_pixel_image(hazy, "hazy")
    tmap = as_field_image(tmap, "tmap")
    require_same_size(hazy, tmap, what="hazy image and transmission map")
    t = np.maximum(tmap, t0)
    if hazy.ndim == 3:
        t = t[:, :, None]
    return np.clip((hazy - airlight) / t + airlight, 0.0, 1.0)
