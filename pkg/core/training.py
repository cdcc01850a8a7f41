"""Toy-scale training of the tiny denoiser on the L1 noise objective, and a gradient check."""
import copy
import logging

import numpy as np
import torch
import torch.nn.functional as F

from .config import PistParams, TrainParams
from .exceptions import ParameterError
from .hadtp import enhance_condition
from .hazesynth import apply_asm, crop_scene
from .imageio import write_csv
from .pist import forward_sample, intermediate_state
from .sampler import condition_stack

logger = logging.getLogger(__name__)

LOSS_TRACE_HEADER = ["step", "loss"]


def _planes(batch):
    """Stack HxWxC numpy patches into an NxCxHxW array."""
    return np.stack([p.transpose(2, 0, 1) if p.ndim == 3 else p[None] for p in batch])


def sample_batch(rng, dataset, sched, pist, patch, batch_size):
    """Draw training examples: scene, crop, timestep and noise from ``rng``.

    Returns ``(noisy, condition, gamma, eps)`` as float64 arrays in NCHW layout.
    """
    noisy, condition, gamma, eps = [], [], [], []
    for _ in range(batch_size):
        scene = dataset[int(rng.integers(len(dataset)))]
        h, w = scene.tmap.shape
        row, col = int(rng.integers(0, h - patch + 1)), int(rng.integers(0, w - patch + 1))
        crop = crop_scene(scene, row, col, patch)
        t = int(rng.integers(1, sched.T + 1))
        noise = rng.standard_normal(crop.clear.shape)

        hazy = apply_asm(crop)
        target = intermediate_state(crop.clear, hazy, crop.tmap, t, pist)
        state = forward_sample(target, t, sched, noise)
        enhanced = enhance_condition(state, hazy, crop.tmap)

        noisy.append(state)
        condition.append(condition_stack(enhanced, hazy))
        gamma.append(sched.gamma[t])
        eps.append(noise)
    return _planes(noisy), _planes(condition), np.asarray(gamma), _planes(eps)


def _tensors(*arrays, dtype=torch.float32):
    return [torch.as_tensor(a, dtype=dtype) for a in arrays]


def train_toy(dataset, denoiser, sched, pist=None, steps=2000, seed=0, params=None, trace_path=None):
    """Adam on the L1 noise loss; returns the trained model and the per-step loss trace."""
    if not dataset:
        raise ParameterError("train_toy needs a non-empty dataset")
    pist = pist or PistParams(T=sched.T)
    params = params or TrainParams()
    patch = min(params.patch, *(min(s.tmap.shape) for s in dataset))

    rng = np.random.default_rng(seed)
    optimizer = torch.optim.Adam(denoiser.parameters(), lr=params.lr, betas=(params.beta1, params.beta2))
    losses = []
    denoiser.train()
    for step in range(steps):
        noisy, condition, gamma, eps = _tensors(
            *sample_batch(rng, dataset, sched, pist, patch, params.batch_size))
        optimizer.zero_grad()
        loss = F.l1_loss(denoiser(noisy, condition, gamma), eps)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.item()))
        if (step + 1) % params.log_every == 0:
            recent = np.mean(losses[-params.log_every:])
            logger.info(f"Step {step + 1}/{steps}: mean L1 over last {params.log_every} = {recent:.4f}")
    denoiser.eval()

    if trace_path is not None:
        write_csv(trace_path, LOSS_TRACE_HEADER, enumerate(losses, start=1))
    return denoiser, losses


def make_probe(channels=3, size=16, batch=2, seed=0):
    rng = np.random.default_rng(seed)
    return {
        "noisy": rng.standard_normal((batch, channels, size, size)),
        "condition": rng.uniform(0.0, 1.0, (batch, 2 * channels, size, size)),
        "gamma": rng.uniform(0.05, 0.95, batch),
        "target": rng.standard_normal((batch, channels, size, size)),
    }


def _residual(model, probe):
    return model(probe["noisy"], probe["condition"], probe["gamma"]) - probe["target"]


def gradient_check(denoiser, probe, n_params=20, step=1e-4, seed=0, abs_floor=1e-4):
    """Largest relative error between autograd and central-difference gradients of the L1 loss.

    Runs in float64 on a copy of ``denoiser``. Perturbations that flip the sign
    of any residual straddle a kink of |.| and are redrawn. The relative error
    uses ``max(|analytic|, |numeric|, abs_floor)`` as denominator.
    """
    model = copy.deepcopy(denoiser).double()
    probe = {k: torch.as_tensor(v, dtype=torch.float64) for k, v in probe.items()}

    model.zero_grad()
    _residual(model, probe).abs().mean().backward()
    flat = [(p, p.grad.detach().reshape(-1).clone()) for p in model.parameters()]
    sizes = np.array([p.numel() for p, _ in flat])
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    with torch.no_grad():
        for index in rng.permutation(offsets[-1]):
            if checked >= n_params:
                break
            which = int(np.searchsorted(offsets, index, side="right") - 1)
            param, grad = flat[which]
            k = int(index - offsets[which])
            view = param.data.view(-1)
            original = view[k].item()

            view[k] = original + step
            plus = _residual(model, probe)
            view[k] = original - step
            minus = _residual(model, probe)
            view[k] = original
            if torch.any(torch.sign(plus) != torch.sign(minus)):
                continue

            numeric = (plus.abs().mean() - minus.abs().mean()).item() / (2.0 * step)
            analytic = grad[k].item()
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), abs_floor))
            checked += 1

    if checked < n_params:
        logger.warning(f"Gradient check covered only {checked} of {n_params} parameters")
    return worst
