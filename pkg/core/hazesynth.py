"""Haze synthesis with the atmospheric scattering model and a seeded toy dataset.

``I = J * t + A * (1 - t)``. Toy scenes are built so the dark-channel prior
holds for the clear image, which makes them usable as closed-loop oracles for
the transmission estimator and the sampler.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError, require_same_size
from .imaging import as_pixel_image, gaussian_blur

logger = logging.getLogger(__name__)

TMAP_LAYOUTS = ("ramp", "half", "blob")
TMAP_RANGE = (0.15, 0.95)
AIRLIGHT_RANGE = (0.7, 0.95)
# Per-pixel minimum channel of a clear toy image stays at or below this.
DARK_CEILING = 0.03


@dataclass(frozen=True, eq=False)
class HazeScene:
    clear: np.ndarray
    tmap: np.ndarray
    airlight: float
    layout: str = "custom"
    seed: int = 0

    def __post_init__(self):
        as_pixel_image(self.clear, "clear")
        as_pixel_image(self.tmap, "tmap")
        require_same_size(self.clear, self.tmap, what="clear image and transmission map")
        if not 0 < self.airlight <= 1:
            raise ParameterError(f"airlight must be in (0, 1], got {self.airlight}")

    @property
    def hazy(self):
        return apply_asm(self)

    def to_dict(self):
        return {
            "airlight": self.airlight,
            "layout": self.layout,
            "seed": self.seed,
            "height": int(self.clear.shape[0]),
            "width": int(self.clear.shape[1]),
            "tmap_mean": float(self.tmap.mean()),
        }


def apply_asm(scene):
    t = scene.tmap[:, :, None] if scene.clear.ndim == 3 else scene.tmap
    hazy = scene.clear * t + scene.airlight * (1.0 - t)
    return np.clip(hazy, 0.0, 1.0)


def crop_scene(scene, row, col, size):
    h, w = scene.tmap.shape
    if not (0 <= row <= h - size and 0 <= col <= w - size):
        raise ParameterError(f"crop {size}px at ({row}, {col}) leaves the {h}x{w} scene")
    return HazeScene(
        clear=scene.clear[row:row + size, col:col + size],
        tmap=scene.tmap[row:row + size, col:col + size],
        airlight=scene.airlight,
        layout=scene.layout,
        seed=scene.seed,
    )


def _grid(size):
    coords = np.linspace(0.0, 1.0, size)
    return np.meshgrid(coords, coords, indexing="ij")


def _rescale(field, lo, hi):
    span = np.ptp(field)
    unit = (field - field.min()) / span if span > 0 else np.zeros_like(field)
    return lo + (hi - lo) * unit


def _clear_image(rng, size, shapes):
    yy, xx = _grid(size)
    img = np.empty((size, size, 3))
    for c in range(3):
        a0, ay, ax = rng.uniform(0.1, 0.6), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)
        img[:, :, c] = a0 + ay * yy + ax * xx

    if shapes:
        for _ in range(rng.integers(2, 5)):
            color = rng.uniform(0.1, 0.9, 3)
            color[rng.integers(0, 3)] = 0.0
            cy, cx = rng.uniform(0.2, 0.8, 2)
            radius = rng.uniform(0.08, 0.25)
            if rng.random() < 0.5:
                inside = (yy - cy) ** 2 + (xx - cx) ** 2 < radius ** 2
            else:
                inside = (np.abs(yy - cy) < radius) & (np.abs(xx - cx) < radius)
            img[inside] = color
        for c in range(3):
            img[:, :, c] = gaussian_blur(img[:, :, c], 1.0)

    img = np.clip(img, 0.0, 1.0)
    # Push the weakest channel toward zero so the clear image obeys the dark-channel prior.
    low = img.min(axis=2, keepdims=True)
    img = img - low + np.minimum(low, DARK_CEILING) * 0.5
    return np.clip(img, 0.0, 1.0)


def _transmission(rng, size, layout):
    yy, xx = _grid(size)
    lo, hi = TMAP_RANGE
    if layout == "ramp":
        angle = rng.uniform(0.0, 2.0 * np.pi)
        field = np.cos(angle) * yy + np.sin(angle) * xx
    elif layout == "half":
        # Non-uniform haze: one dense half, one light half, smooth seam.
        seam = rng.uniform(0.35, 0.65)
        axis = yy if rng.random() < 0.5 else xx
        field = 1.0 / (1.0 + np.exp(-(axis - seam) * 12.0))
        if rng.random() < 0.5:
            field = 1.0 - field
    elif layout == "blob":
        field = gaussian_blur(rng.standard_normal((size, size)), size / 6.0)
    else:
        raise ParameterError(f"unknown transmission layout {layout!r}")
    return _rescale(field, lo, hi)


def make_toy_dataset(count, size=64, seed=0, shapes=True):
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    if size < 16:
        raise ParameterError(f"size must be >= 16, got {size}")

    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(count):
        layout = TMAP_LAYOUTS[i % len(TMAP_LAYOUTS)]
        scenes.append(HazeScene(
            clear=_clear_image(rng, size, shapes),
            tmap=_transmission(rng, size, layout),
            airlight=float(rng.uniform(*AIRLIGHT_RANGE)),
            layout=layout,
            seed=seed,
        ))
    logger.debug(f"Generated {count} toy scenes of {size}px (seed={seed})")
    return scenes
