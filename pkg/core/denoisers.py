"""Denoiser backends for the reverse-diffusion sampler.

Every backend exposes ``evaluate(noisy, condition, gamma, *, origin=None)``:
``noisy`` is an HxW(xC) patch, ``condition`` stacks the enhanced condition and
the hazy patch along the last axis, ``gamma`` is the continuous noise level and
``origin`` the patch position in the full image. It returns a noise estimate
shaped like ``noisy`` and must be free of side effects.
"""
import json
import logging
import math
import struct
from pathlib import Path
from typing import Protocol

import numpy as np
import torch
import torch.nn.functional as F
from django.utils.module_loading import import_string
from torch import nn

from .config import PistParams
from .exceptions import DehazeError, DimensionMismatchError, ParameterError, require_same_size
from .imaging import as_field_image, as_map_image
from .pist import intermediate_state

logger = logging.getLogger(__name__)

MODEL_FORMAT = "rpd-tiny-denoiser"
EMBED_FREQUENCIES = 8


class Denoiser(Protocol):
    def evaluate(self, noisy, condition, gamma, *, origin=None): ...


class OracleDenoiser:
    """Returns the exact noise implied by a state, given the ground-truth scene.

    Inverts ``J = sqrt(g) * U + sqrt(1 - g) * eps`` with ``U`` the intermediate
    target at the timestep whose cumulative retention equals ``g``.
    """

    def __init__(self, clear, hazy, tmap, schedule, pist=None):
        self.clear = as_field_image(clear, "clear")
        self.hazy = as_field_image(hazy, "hazy")
        self.tmap = as_map_image(tmap, "tmap")
        require_same_size(self.clear, self.hazy, self.tmap, what="oracle scene arrays")
        self.schedule = schedule
        self.pist = pist or PistParams(T=schedule.T)

    @classmethod
    def for_scene(cls, scene, schedule, pist=None):
        return cls(scene.clear, scene.hazy, scene.tmap, schedule, pist)

    def evaluate(self, noisy, condition, gamma, *, origin=None):
        noisy = np.asarray(noisy, dtype=np.float64)
        row, col = origin or (0, 0)
        h, w = noisy.shape[:2]
        window = (slice(row, row + h), slice(col, col + w))
        t = self.schedule.index_of_gamma(gamma)
        target = intermediate_state(self.clear[window], self.hazy[window], self.tmap[window], t, self.pist)
        return (noisy - math.sqrt(gamma) * target) / math.sqrt(1.0 - gamma)


def noise_level_features(gamma):
    """Sinusoidal features of the noise amplitude sqrt(1 - gamma)."""
    amplitude = torch.sqrt(1.0 - gamma).unsqueeze(-1)
    freqs = math.pi * 2.0 ** torch.arange(EMBED_FREQUENCIES, dtype=gamma.dtype, device=gamma.device)
    angles = amplitude * freqs
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


def _conv(cin, cout, stride=1):
    return nn.Conv2d(cin, cout, kernel_size=3, stride=stride, padding=1)


class TinyDenoiser(nn.Module):
    """Three-level convolutional noise predictor with a per-level noise-level embedding.

    Input: the noisy patch concatenated with the condition stack (enhanced
    condition, hazy patch), i.e. ``3 * channels`` planes. Under 100k parameters
    with the default widths.
    """

    def __init__(self, channels=3, widths=(16, 32, 48), zero_init_output=False):
        super().__init__()
        w0, w1, w2 = widths
        self.channels = channels
        self.widths = tuple(widths)
        self.embed = nn.Linear(2 * EMBED_FREQUENCIES, w0 + w1 + w2)
        self.inc = _conv(3 * channels, w0)
        self.enc1 = _conv(w0, w0)
        self.down1 = _conv(w0, w1, stride=2)
        self.enc2 = _conv(w1, w1)
        self.down2 = _conv(w1, w2, stride=2)
        self.mid = _conv(w2, w2)
        self.up2 = _conv(w2, w1)
        self.dec2 = _conv(2 * w1, w1)
        self.up1 = _conv(w1, w0)
        self.dec1 = _conv(2 * w0, w0)
        self.out = _conv(w0, channels)
        if zero_init_output:
            nn.init.zeros_(self.out.weight)
            nn.init.zeros_(self.out.bias)

    def forward(self, noisy, condition, gamma):
        x = torch.cat([noisy, condition], dim=1)
        e0, e1, e2 = torch.split(F.silu(self.embed(noise_level_features(gamma))), self.widths, dim=-1)

        h1 = F.silu(self.inc(x) + e0[:, :, None, None])
        h1 = F.silu(self.enc1(h1))
        h2 = F.silu(self.down1(h1) + e1[:, :, None, None])
        h2 = F.silu(self.enc2(h2))
        h3 = F.silu(self.down2(h2) + e2[:, :, None, None])
        h3 = F.silu(self.mid(h3))

        u2 = F.silu(self.up2(F.interpolate(h3, size=h2.shape[-2:], mode="nearest")))
        u2 = F.silu(self.dec2(torch.cat([u2, h2], dim=1)))
        u1 = F.silu(self.up1(F.interpolate(u2, size=h1.shape[-2:], mode="nearest")))
        u1 = F.silu(self.dec1(torch.cat([u1, h1], dim=1)))
        return self.out(u1)

    def parameter_count(self):
        return sum(p.numel() for p in self.parameters())

    @torch.no_grad()
    def evaluate(self, noisy, condition, gamma, *, origin=None):
        noisy = np.asarray(noisy, dtype=np.float64)
        single = noisy.ndim == 2
        planes = noisy[:, :, None] if single else noisy
        if planes.shape[2] != self.channels:
            raise DimensionMismatchError(f"model expects {self.channels} channels, got patch {noisy.shape}")
        dtype = next(self.parameters()).dtype
        x = torch.as_tensor(planes.transpose(2, 0, 1)[None].copy(), dtype=dtype)
        c = torch.as_tensor(np.asarray(condition).transpose(2, 0, 1)[None].copy(), dtype=dtype)
        g = torch.tensor([gamma], dtype=dtype)
        eps = self(x, c, g)[0].numpy().astype(np.float64).transpose(1, 2, 0)
        return eps[:, :, 0] if single else eps


def make_tiny_denoiser(channels=3, seed=0, **kwargs):
    """Seeded construction that leaves the global torch RNG untouched."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = TinyDenoiser(channels=channels, **kwargs)
    model.eval()
    return model


def save_model(path, model):
    """Flat named-tensor file: u64 LE header length, JSON header, LE float32 data."""
    path = Path(path)
    state = model.state_dict()
    header = {
        "__metadata__": {
            "format": MODEL_FORMAT,
            "channels": str(model.channels),
            "widths": ",".join(str(w) for w in model.widths),
        },
    }
    blobs = []
    offset = 0
    for name in sorted(state):
        data = state[name].detach().cpu().numpy().astype("<f4").tobytes()
        header[name] = {
            "dtype": "F32",
            "shape": list(state[name].shape),
            "data_offsets": [offset, offset + len(data)],
        }
        blobs.append(data)
        offset += len(data)

    raw_header = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(struct.pack("<Q", len(raw_header)))
        fh.write(raw_header)
        for blob in blobs:
            fh.write(blob)
    logger.info(f"Saved model ({model.parameter_count()} parameters) to {path}")
    return path


def load_model(path):
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8:
        raise DehazeError(f"model file {path} is truncated")
    (length,) = struct.unpack("<Q", raw[:8])
    try:
        header = json.loads(raw[8:8 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DehazeError(f"model file {path} has a corrupt header: {exc}") from exc

    meta = header.pop("__metadata__", {})
    if meta.get("format") != MODEL_FORMAT:
        raise DehazeError(f"model file {path} is not a {MODEL_FORMAT} file")
    widths = tuple(int(w) for w in meta["widths"].split(","))
    model = TinyDenoiser(channels=int(meta["channels"]), widths=widths)

    body = raw[8 + length:]
    state = {}
    for name, entry in header.items():
        start, end = entry["data_offsets"]
        values = np.frombuffer(body[start:end], dtype="<f4").reshape(entry["shape"])
        state[name] = torch.from_numpy(values.astype(np.float32))
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise DehazeError(f"model file {path} does not match the network layout: {exc}") from exc
    model.eval()
    return model


def load_external(dotted_path, **kwargs):
    """Build a denoiser from a dotted path to a factory callable or class."""
    try:
        factory = import_string(dotted_path)
    except ImportError as exc:
        raise ParameterError(f"cannot import denoiser factory {dotted_path!r}: {exc}") from exc
    denoiser = factory(**kwargs)
    if not callable(getattr(denoiser, "evaluate", None)):
        raise ParameterError(f"{dotted_path!r} did not produce an object with evaluate()")
    return denoiser
