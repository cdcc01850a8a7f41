"""Haze-aware per-patch timestep retargeting and the transmission-guided condition.

Deterministic reference: patches denser than the image average get a positive
timestep offset (more denoising effort), and the conditional input blends the
current state with the hazy patch by transmission.
"""
import logging
from typing import Protocol

import numpy as np

from .config import HadtpParams
from .exceptions import ParameterError, require_same_shape, require_same_size
from .imageio import write_csv

logger = logging.getLogger(__name__)

OFFSET_TRACE_HEADER = ["patch", "t", "dt", "mean_tmap"]


def enhance_condition(j_t, hazy, tmap):
    j_t = np.asarray(j_t, dtype=np.float64)
    hazy = np.asarray(hazy, dtype=np.float64)
    tmap = np.asarray(tmap, dtype=np.float64)
    require_same_shape(j_t, hazy, what="state patch and hazy patch")
    require_same_size(j_t, tmap, what="state patch and transmission patch")
    if j_t.ndim == 3:
        tmap = tmap[:, :, None]
    return tmap * j_t + (1.0 - tmap) * hazy


def predict_offset(tmap_patch, tmap_global_mean, t, T, params=None):
    params = params or HadtpParams()
    if not 0 <= t <= T:
        raise ParameterError(f"timestep must be in [0, {T}], got {t}")
    if not params.enabled or t == 0:
        return 0

    deficit = tmap_global_mean - float(np.mean(tmap_patch))
    dt = int(np.rint(params.kappa * t * deficit))
    clamped = min(max(t + dt, 1), T) - t
    if clamped != dt:
        logger.debug(f"HADTP offset {dt} clamped to {clamped} at t={t}")
    return clamped


def effective_gamma(t, dt, sched):
    t_hat = t + dt
    assert 1 <= t_hat <= sched.T, f"retargeted timestep {t_hat} outside [1, {sched.T}]"
    return float(sched.gamma[t_hat])


class HadtpPredictor(Protocol):
    def offset(self, tmap_patch, tmap_global_mean, t, T): ...

    def condition(self, j_t, hazy, tmap): ...


class MeanDeficitPredictor:
    """Offset from the patch's transmission deficit against the global mean."""

    def __init__(self, params=None):
        self.params = params or HadtpParams()

    def offset(self, tmap_patch, tmap_global_mean, t, T):
        return predict_offset(tmap_patch, tmap_global_mean, t, T, self.params)

    def condition(self, j_t, hazy, tmap):
        return enhance_condition(j_t, hazy, tmap)


def write_offset_trace(path, rows):
    return write_csv(path, OFFSET_TRACE_HEADER, rows)
