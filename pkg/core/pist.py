"""Physics-guided intermediate-state diffusion: schedule, target blend, forward and reverse steps.

The diffusion target at step ``t`` is not the clear image but a per-pixel blend
``U_t = W * J_0 + (1 - W) * I`` whose weight ``W`` decays with ``t`` and with the
local transmission, so dense-haze regions stay anchored to the hazy input for
longer. Arrays are float64; timesteps are integers in ``0..T``.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import PistParams
from .exceptions import ParameterError, require_same_shape, require_same_size
from .imaging import as_field_image

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step retention ``alpha`` and cumulative ``gamma``, indexed directly by ``t``.

    Index 0 holds ``alpha = 1`` and ``gamma = 1`` so that ``t = 0`` is noise-free.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray

    def sqrt_gamma(self, t):
        return math.sqrt(self.gamma[t])

    def sqrt_one_minus_gamma(self, t):
        return math.sqrt(1.0 - self.gamma[t])

    def step_alpha(self, t, prev=None):
        """Retention for a reverse jump from ``t`` to ``prev`` (default ``t - 1``)."""
        self._require_step(t)
        if prev is None or prev == t - 1:
            return float(self.alpha[t])
        if not 0 <= prev < t:
            raise ParameterError(f"reverse jump needs 0 <= prev < t, got t={t}, prev={prev}")
        return float(self.gamma[t] / self.gamma[prev])

    def timesteps(self, steps=0):
        """Descending timesteps visited by the sampler; ``steps=0`` visits all of them.

        The first visited step is always ``T``, where the sampler starts.
        """
        if steps <= 0 or steps >= self.T:
            return list(range(self.T, 0, -1))
        picked = np.unique(np.rint(np.linspace(self.T, 1, steps)).astype(int))
        return [int(t) for t in picked[::-1]]

    def index_of_gamma(self, gamma):
        exact = np.flatnonzero(self.gamma[1:] == gamma)
        if exact.size:
            return int(exact[0]) + 1
        return int(np.argmin(np.abs(self.gamma[1:] - gamma))) + 1

    def _require_step(self, t):
        if not 1 <= t <= self.T:
            raise ParameterError(f"timestep must be in [1, {self.T}], got {t}")


def make_schedule(T=1000, beta_start=1e-4, beta_end=0.02):
    if T < 1:
        raise ParameterError(f"schedule needs T >= 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ParameterError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")

    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    beta = np.concatenate([[0.0], betas])
    alpha = 1.0 - beta
    gamma = np.cumprod(alpha)
    for arr in (beta, alpha, gamma):
        arr.setflags(write=False)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, gamma=gamma)


def schedule_from_params(params):
    return make_schedule(params.T, params.beta_start, params.beta_end)


def pist_weight(t, tau, params=None):
    """Blend weight of the clear image: cos(t/T * pi/2) * exp(-a * t * tau)."""
    params = params or PistParams()
    if not 0 <= t <= params.T:
        raise ParameterError(f"timestep must be in [0, {params.T}], got {t}")
    tau = np.asarray(tau, dtype=np.float64)
    if not params.enabled:
        return np.ones_like(tau)[()]
    if t == params.T:
        return np.zeros_like(tau)[()]
    decay = math.cos(t / params.T * math.pi / 2.0)
    return decay * np.exp(-params.a * t * tau)


def intermediate_state(clear, hazy, tmap, t, params=None):
    clear = as_field_image(clear, "clear")
    hazy = as_field_image(hazy, "hazy")
    tmap = as_field_image(tmap, "tmap")
    require_same_shape(clear, hazy, what="clear and hazy images")
    require_same_size(clear, tmap, what="images and transmission map")

    weight = pist_weight(t, tmap, params)
    if clear.ndim == 3:
        weight = weight[:, :, None]
    return weight * clear + (1.0 - weight) * hazy


def forward_sample(u_t, t, sched, noise):
    sched._require_step(t)
    u_t = as_field_image(u_t, "u_t")
    noise = as_field_image(noise, "noise")
    require_same_shape(u_t, noise, what="state and noise")
    return sched.sqrt_gamma(t) * u_t + sched.sqrt_one_minus_gamma(t) * noise


def reverse_step(j_t, eps_hat, t, sched, injected=None, prev=None):
    """One reverse update from ``t`` to ``prev`` (default ``t - 1``).

    ``injected`` is a standard-normal field in stochastic mode and ``None`` in
    deterministic mode.
    """
    if t < 1:
        raise ParameterError(f"no reverse step below t=0 (got t={t})")
    alpha = sched.step_alpha(t, prev)
    require_same_shape(j_t, eps_hat, what="state and noise estimate")

    coef = (1.0 - alpha) / sched.sqrt_one_minus_gamma(t)
    out = (j_t - coef * eps_hat) / math.sqrt(alpha)
    if injected is not None:
        require_same_shape(j_t, injected, what="state and injected noise")
        out = out + math.sqrt(1.0 - alpha) * injected
    return out


def pist_loss(eps_hat, eps_true):
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    eps_true = np.asarray(eps_true, dtype=np.float64)
    require_same_shape(eps_hat, eps_true, what="noise estimate and true noise")
    return float(np.mean(np.abs(eps_hat - eps_true)))


def schedule_rows(sched, taus, params):
    """Rows of (t, beta, alpha, gamma, W(t, tau)...) for t = 1..T."""
    for t in range(1, sched.T + 1):
        weights = [float(pist_weight(t, tau, params)) for tau in taus]
        yield [t, float(sched.beta[t]), float(sched.alpha[t]), float(sched.gamma[t]), *weights]
