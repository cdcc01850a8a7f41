"""Overlapping patch layout and the weighted superposition of per-patch estimates."""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchGrid:
    height: int
    width: int
    size: int
    stride: int
    origins: tuple

    def __len__(self):
        return len(self.origins)

    def window(self, index):
        row, col = self.origins[index]
        return slice(row, row + self.size), slice(col, col + self.size)

    def extract(self, img, index):
        rows, cols = self.window(index)
        return img[rows, cols]

    def to_dict(self):
        return {
            "height": self.height,
            "width": self.width,
            "patch": self.size,
            "stride": self.stride,
            "count": len(self.origins),
            "origins": [list(o) for o in self.origins],
        }


@dataclass(frozen=True, eq=False)
class PatchWeights:
    """``table[i, y, x]`` is the weight of patch ``i`` at its local pixel ``(y, x)``."""

    table: np.ndarray

    def full(self, grid):
        """Per-pixel sum of weights over covering patches (all ones for a valid table)."""
        total = np.zeros((grid.height, grid.width))
        for i in range(len(grid)):
            rows, cols = grid.window(i)
            total[rows, cols] += self.table[i]
        return total


def _axis_origins(extent, size, stride):
    origins = list(range(0, extent - size + 1, stride))
    if origins[-1] + size < extent:
        origins.append(extent - size)
    return origins


def plan_patches(h, w, p=64, r=16):
    if not 1 <= r < p:
        raise ParameterError(f"stride must satisfy 1 <= r < p, got r={r}, p={p}")
    if p > min(h, w):
        raise ParameterError(f"patch size {p} exceeds image dimensions {h}x{w}")
    rows = _axis_origins(h, p, r)
    cols = _axis_origins(w, p, r)
    origins = tuple(itertools.product(rows, cols))
    return PatchGrid(height=h, width=w, size=p, stride=r, origins=origins)


def cover_count(grid):
    count = np.zeros((grid.height, grid.width), dtype=np.int64)
    for i in range(len(grid)):
        rows, cols = grid.window(i)
        count[rows, cols] += 1
    return count


def make_uniform_weights(grid):
    inverse = 1.0 / cover_count(grid)
    table = np.stack([grid.extract(inverse, i) for i in range(len(grid))])
    return PatchWeights(table=table)


def normalize_weights(raw, grid):
    raw = np.asarray(raw, dtype=np.float64)
    expected = (len(grid), grid.size, grid.size)
    if raw.shape != expected:
        raise DimensionMismatchError(f"weight table has shape {raw.shape}, expected {expected}")
    if not np.all(np.isfinite(raw)) or raw.min() < 0:
        raise ParameterError("weight table must be finite and non-negative")

    total = PatchWeights(table=raw).full(grid)
    if np.any(total <= 0):
        raise ParameterError("weight table leaves some pixels with zero total weight")
    table = np.stack([raw[i] / grid.extract(total, i) for i in range(len(grid))])
    return PatchWeights(table=table)


def load_weights(path, grid):
    """Per-pixel weight table from ``.npy``, renormalized to a partition of unity."""
    weights = normalize_weights(np.load(path, allow_pickle=False), grid)
    logger.info(f"Loaded patch weight table {path} for {len(grid)} patches")
    return weights


def aggregate_noise(estimates, grid, weights):
    """Weighted per-pixel sum of the patch estimates, accumulated in patch order.

    ``estimates`` is a list of ``(origin, patch)`` pairs in grid order.
    """
    if len(estimates) != len(grid):
        raise DimensionMismatchError(f"got {len(estimates)} patch estimates for a grid of {len(grid)}")

    first = np.asarray(estimates[0][1])
    out = np.zeros((grid.height, grid.width) + first.shape[2:])
    for i, (origin, patch) in enumerate(estimates):
        if tuple(origin) != grid.origins[i]:
            raise DimensionMismatchError(f"estimate {i} has origin {tuple(origin)}, grid expects {grid.origins[i]}")
        patch = np.asarray(patch, dtype=np.float64)
        if patch.shape[:2] != (grid.size, grid.size) or patch.shape != first.shape:
            raise DimensionMismatchError(f"estimate {i} has shape {patch.shape}, expected {first.shape}")
        weight = weights.table[i]
        if patch.ndim == 3:
            weight = weight[:, :, None]
        rows, cols = grid.window(i)
        out[rows, cols] += weight * patch
    return out


# Per-patch diffusion states merge with the same partition-of-unity reduction.
aggregate_states = aggregate_noise
