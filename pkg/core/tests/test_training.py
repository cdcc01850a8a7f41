import tempfile
from pathlib import Path
from unittest import skipUnless

import numpy as np
import torch
from django.conf import settings
from django.test import SimpleTestCase

from core.config import PistParams, SamplerConfig, TrainParams
from core.denoisers import TinyDenoiser, make_tiny_denoiser
from core.exceptions import ParameterError
from core.hazesynth import make_toy_dataset
from core.metrics import psnr
from core.pist import make_schedule
from core.sampler import dehaze
from core.training import gradient_check, make_probe, sample_batch, train_toy

QUICK = TrainParams(size=16, batch_size=2, patch=16)


class ScaleModel(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.scale = torch.nn.Parameter(torch.tensor([0.7]))

    def forward(self, noisy, condition, gamma):
        return self.scale * noisy


class SampleBatchTests(SimpleTestCase):
    def test_layout(self):
        dataset = make_toy_dataset(2, size=32, seed=0)
        rng = np.random.default_rng(0)
        noisy, condition, gamma, eps = sample_batch(rng, dataset, make_schedule(50), PistParams(T=50), 16, 3)
        self.assertEqual(noisy.shape, (3, 3, 16, 16))
        self.assertEqual(condition.shape, (3, 6, 16, 16))
        self.assertEqual(eps.shape, noisy.shape)
        self.assertTrue(np.all((gamma > 0) & (gamma < 1)))


class TrainToyTests(SimpleTestCase):
    def setUp(self):
        self.dataset = make_toy_dataset(2, size=16, seed=1)
        self.schedule = make_schedule(20)
        self.pist = PistParams(T=20)

    def test_zero_steps_leave_parameters(self):
        model = make_tiny_denoiser(3, seed=0)
        before = [p.detach().clone() for p in model.parameters()]
        model, losses = train_toy(self.dataset, model, self.schedule, self.pist, steps=0, params=QUICK)
        self.assertEqual(losses, [])
        for a, b in zip(before, model.parameters()):
            self.assertTrue(torch.equal(a, b))

    def test_fixed_seed_reproduces_the_loss_trace(self):
        traces = []
        for _ in range(2):
            _, losses = train_toy(self.dataset, make_tiny_denoiser(3, seed=0), self.schedule, self.pist,
                                  steps=3, seed=4, params=QUICK)
            traces.append(losses)
        self.assertEqual(traces[0], traces[1])
        self.assertEqual(len(traces[0]), 3)

    def test_trace_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "loss.csv"
            train_toy(self.dataset, make_tiny_denoiser(3, seed=0), self.schedule, self.pist,
                      steps=2, params=QUICK, trace_path=path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "step,loss")
        self.assertEqual(len(lines), 3)

    def test_empty_dataset(self):
        with self.assertRaises(ParameterError):
            train_toy([], make_tiny_denoiser(3, seed=0), self.schedule, self.pist, steps=1)

    @skipUnless(settings.DEHAZE_SLOW_TESTS, "set DEHAZE_SLOW_TESTS=1 for convergence runs")
    def test_2000_steps_halve_the_loss_and_beat_the_hazy_input(self):
        dataset = make_toy_dataset(16, size=64, seed=0)
        schedule = make_schedule(1000)
        model, losses = train_toy(dataset, make_tiny_denoiser(3, seed=0), schedule, PistParams(), steps=2000, seed=0)
        self.assertLess(np.mean(losses[-100:]), 0.5 * np.mean(losses[:100]))

        cfg = SamplerConfig(patch=32, stride=16, deterministic=True)
        gains = []
        for scene in make_toy_dataset(4, size=64, seed=1000):
            restored = dehaze(scene.hazy, scene.tmap, model, cfg, schedule=schedule)
            gains.append(psnr(scene.clear, restored) - psnr(scene.clear, scene.hazy))
        self.assertGreaterEqual(np.mean(gains), 3.0, gains)


class GradientCheckTests(SimpleTestCase):
    def test_linear_model_is_exact(self):
        error = gradient_check(ScaleModel(), make_probe(channels=3, size=4), n_params=1)
        self.assertLess(error, 1e-6)

    def test_tiny_denoiser_at_init(self):
        model = make_tiny_denoiser(3, seed=0)
        self.assertLess(gradient_check(model, make_probe(channels=3, size=8), n_params=20), 1e-3)

    def test_check_leaves_the_model_untouched(self):
        model = make_tiny_denoiser(3, seed=0)
        before = [p.detach().clone() for p in model.parameters()]
        gradient_check(model, make_probe(channels=3, size=8), n_params=3)
        for a, b in zip(before, model.parameters()):
            self.assertTrue(torch.equal(a, b))
            self.assertEqual(b.dtype, torch.float32)

    def test_zero_batch_gives_zero_output_bias_gradient(self):
        model = TinyDenoiser(zero_init_output=True)
        zeros = torch.zeros(2, 3, 8, 8)
        out = model(zeros, torch.zeros(2, 6, 8, 8), torch.tensor([0.5, 0.5]))
        (out - zeros).abs().mean().backward()
        self.assertEqual(float(model.out.bias.grad.abs().max()), 0.0)
