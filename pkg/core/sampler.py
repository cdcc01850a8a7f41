"""Patch-wise reverse diffusion that turns a hazy image into a clear one.

Per visited timestep: every patch gets a haze-aware timestep offset and an
enhanced condition, the denoiser estimates its noise, and the estimates are
merged with partition-of-unity weights. When all offsets are zero the noise
estimates are merged first and one reverse step runs on the full image;
otherwise each patch steps at its own timestep and the updated states are
merged with the same weights.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import SamplerConfig
from .exceptions import DenoiserError, ParameterError, require_same_size
from .hadtp import MeanDeficitPredictor, effective_gamma
from .imaging import as_map_image, as_pixel_image
from .metrics import evaluate_pairs
from .patches import aggregate_noise, aggregate_states, make_uniform_weights, plan_patches
from .pist import forward_sample, make_schedule, reverse_step

logger = logging.getLogger(__name__)

ABLATION_ARMS = (
    ("baseline", False, False),
    ("pist", True, False),
    ("hadtp", False, True),
    ("pist+hadtp", True, True),
)


def condition_stack(enhanced, hazy):
    if hazy.ndim == 2:
        return np.stack([enhanced, hazy], axis=-1)
    return np.concatenate([enhanced, hazy], axis=-1)


def _check_estimate(eps, expected_shape, index):
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != expected_shape:
        raise DenoiserError(f"denoiser returned shape {eps.shape} for patch {index}, expected {expected_shape}")
    if not np.all(np.isfinite(eps)):
        raise DenoiserError(f"denoiser returned non-finite values for patch {index}")
    return eps


def dehaze(hazy, tmap, denoiser, cfg=None, *, schedule=None, weights=None, predictor=None, trace=None):
    """Restore ``hazy`` with ``denoiser``; returns the clear estimate clamped to [0, 1].

    ``trace``, when a list, collects ``(patch, t, dt, mean_tmap)`` rows.
    """
    cfg = cfg or SamplerConfig()
    hazy = as_pixel_image(hazy, "hazy")
    tmap = as_map_image(tmap, "tmap")
    require_same_size(hazy, tmap, what="hazy image and transmission map")
    schedule = schedule or make_schedule(cfg.T)
    if schedule.T != cfg.T:
        raise ParameterError(f"schedule has T={schedule.T} but sampler expects T={cfg.T}")

    h, w = tmap.shape
    grid = plan_patches(h, w, cfg.patch, cfg.stride)
    weights = weights or make_uniform_weights(grid)
    predictor = predictor or MeanDeficitPredictor(cfg.hadtp)
    hazy_patches = [grid.extract(hazy, i) for i in range(len(grid))]
    tmap_patches = [grid.extract(tmap, i) for i in range(len(grid))]
    patch_means = [float(p.mean()) for p in tmap_patches]
    global_mean = float(tmap.mean())

    rng = np.random.default_rng(cfg.seed)
    # Start from the forward process at t=T, where the target equals the hazy image.
    state = forward_sample(hazy, cfg.T, schedule, rng.standard_normal(hazy.shape))
    timesteps = schedule.timesteps(cfg.steps)
    logger.info(
        f"Dehazing {h}x{w}: {len(grid)} patches, {len(timesteps)} steps, "
        f"{'deterministic' if cfg.deterministic else 'stochastic'}, workers={cfg.workers}"
    )

    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for k, t in enumerate(timesteps):
            prev = timesteps[k + 1] if k + 1 < len(timesteps) else 0
            offsets = [predictor.offset(tmap_patches[i], global_mean, t, cfg.T) for i in range(len(grid))]
            # No fresh noise on the jump to t=0.
            injected = None if cfg.deterministic or prev == 0 else rng.standard_normal(hazy.shape)

            def denoise_patch(i, state=state, t=t, offsets=offsets):
                gamma = effective_gamma(t, offsets[i], schedule)
                noisy = grid.extract(state, i)
                enhanced = predictor.condition(noisy, hazy_patches[i], tmap_patches[i])
                eps = denoiser.evaluate(noisy, condition_stack(enhanced, hazy_patches[i]), gamma,
                                        origin=grid.origins[i])
                return _check_estimate(eps, noisy.shape, i)

            indices = range(len(grid))
            estimates = list(pool.map(denoise_patch, indices) if pool else map(denoise_patch, indices))

            if not any(offsets):
                eps_bar = aggregate_noise(list(zip(grid.origins, estimates)), grid, weights)
                state = reverse_step(state, eps_bar, t, schedule, injected, prev)
            else:
                updated = []
                for i, dt in enumerate(offsets):
                    t_hat = t + dt
                    prev_hat = 0 if prev == 0 else min(max(prev + dt, 0), t_hat - 1)
                    noise = None if injected is None else grid.extract(injected, i)
                    updated.append((grid.origins[i], reverse_step(
                        grid.extract(state, i), estimates[i], t_hat, schedule, noise, prev_hat)))
                state = aggregate_states(updated, grid, weights)

            if trace is not None:
                trace.extend([i, t, dt, patch_means[i]] for i, dt in enumerate(offsets))
            if logger.isEnabledFor(logging.DEBUG) and (k % 100 == 0 or prev == 0):
                logger.debug(f"t={t} -> {prev}: offsets in [{min(offsets)}, {max(offsets)}]")
    finally:
        if pool:
            pool.shutdown()

    return np.clip(state, 0.0, 1.0)


def run_ablation(scenes, make_denoiser, cfg=None, *, schedule=None):
    """Dehaze every scene under the four PIST x HADTP arms.

    ``make_denoiser(scene, cfg)`` builds the denoiser for one scene and arm.
    Returns ``{arm: QualityReport}`` against the clear images.
    """
    cfg = cfg or SamplerConfig()
    schedule = schedule or make_schedule(cfg.T)
    reports = {}
    for arm, pist_on, hadtp_on in ABLATION_ARMS:
        arm_cfg = replace(cfg, pist=replace(cfg.pist, enabled=pist_on), hadtp=replace(cfg.hadtp, enabled=hadtp_on))
        pairs = []
        for index, scene in enumerate(scenes):
            restored = dehaze(scene.hazy, scene.tmap, make_denoiser(scene, arm_cfg), arm_cfg, schedule=schedule)
            pairs.append((f"scene-{index:03d}", scene.clear, restored))
        reports[arm] = evaluate_pairs(pairs)
        logger.info(f"Ablation arm {arm}: PSNR={reports[arm].mean_psnr:.2f} SSIM={reports[arm].mean_ssim:.4f}")
    return reports
