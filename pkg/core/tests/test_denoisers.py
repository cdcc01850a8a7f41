import tempfile
from pathlib import Path

import numpy as np
import torch
from django.test import SimpleTestCase

from core.config import PistParams
from core.denoisers import (
    OracleDenoiser,
    TinyDenoiser,
    load_external,
    load_model,
    make_tiny_denoiser,
    save_model,
)
from core.exceptions import DehazeError, DimensionMismatchError, ParameterError
from core.hazesynth import make_toy_dataset
from core.pist import forward_sample, intermediate_state, make_schedule


class ZeroDenoiser:
    def __init__(self, scale=0.0):
        self.scale = scale

    def evaluate(self, noisy, condition, gamma, *, origin=None):
        return self.scale * np.asarray(noisy)


def not_a_denoiser():
    return object()


class OracleTests(SimpleTestCase):
    def test_recovers_the_injected_noise(self):
        scene = make_toy_dataset(1, size=32, seed=2)[0]
        schedule = make_schedule(50)
        pist = PistParams(T=50)
        oracle = OracleDenoiser.for_scene(scene, schedule, pist)
        rows, cols = slice(8, 24), slice(4, 20)
        target = intermediate_state(scene.clear, scene.hazy, scene.tmap, 30, pist)[rows, cols]
        noise = np.random.default_rng(0).standard_normal(target.shape)
        noisy = forward_sample(target, 30, schedule, noise)
        eps = oracle.evaluate(noisy, None, schedule.gamma[30], origin=(8, 4))
        np.testing.assert_allclose(eps, noise, atol=1e-9)

    def test_default_interpolation_follows_the_schedule_length(self):
        scene = make_toy_dataset(1, size=16, seed=3)[0]
        schedule = make_schedule(20)
        oracle = OracleDenoiser.for_scene(scene, schedule)
        self.assertEqual(oracle.pist.T, 20)
        # At t = T the target is the hazy image itself.
        noise = np.random.default_rng(1).standard_normal(scene.hazy.shape)
        noisy = forward_sample(scene.hazy, 20, schedule, noise)
        np.testing.assert_allclose(oracle.evaluate(noisy, None, schedule.gamma[20]), noise, atol=1e-9)


class TinyDenoiserTests(SimpleTestCase):
    def test_parameter_count_and_shapes(self):
        model = make_tiny_denoiser(3, seed=0)
        self.assertLess(model.parameter_count(), 100_000)
        out = model(torch.zeros(2, 3, 16, 16), torch.zeros(2, 6, 16, 16), torch.tensor([0.5, 0.1]))
        self.assertEqual(tuple(out.shape), (2, 3, 16, 16))

    def test_evaluate_on_numpy_patches(self):
        rng = np.random.default_rng(1)
        color = make_tiny_denoiser(3, seed=0).evaluate(
            rng.standard_normal((12, 12, 3)), rng.uniform(size=(12, 12, 6)), 0.3)
        self.assertEqual(color.shape, (12, 12, 3))
        gray = make_tiny_denoiser(1, seed=0).evaluate(
            rng.standard_normal((12, 12)), rng.uniform(size=(12, 12, 2)), 0.3)
        self.assertEqual(gray.shape, (12, 12))
        with self.assertRaises(DimensionMismatchError):
            make_tiny_denoiser(3, seed=0).evaluate(np.zeros((8, 8)), np.zeros((8, 8, 2)), 0.3)

    def test_seeded_construction_leaves_global_rng_alone(self):
        torch.manual_seed(123)
        expected = torch.rand(3)
        torch.manual_seed(123)
        first = make_tiny_denoiser(3, seed=7)
        after = torch.rand(3)
        second = make_tiny_denoiser(3, seed=7)
        self.assertTrue(torch.equal(expected, after))
        for a, b in zip(first.parameters(), second.parameters()):
            self.assertTrue(torch.equal(a, b))

    def test_zero_init_output(self):
        model = TinyDenoiser(zero_init_output=True)
        out = model(torch.randn(1, 3, 8, 8), torch.randn(1, 6, 8, 8), torch.tensor([0.5]))
        self.assertEqual(float(out.abs().max()), 0.0)


class SerializationTests(SimpleTestCase):
    def test_saved_model_reproduces_outputs(self):
        model = make_tiny_denoiser(3, seed=4, widths=(8, 16, 24))
        rng = np.random.default_rng(2)
        noisy, condition = rng.standard_normal((16, 16, 3)), rng.uniform(size=(16, 16, 6))
        with tempfile.TemporaryDirectory() as tmp:
            path = save_model(Path(tmp) / "model.rpdt", model)
            raw = path.read_bytes()
            header_length = int.from_bytes(raw[:8], "little")
            self.assertIn(b'"data_offsets"', raw[8:8 + header_length])
            restored = load_model(path)
        self.assertEqual(restored.widths, (8, 16, 24))
        np.testing.assert_array_equal(model.evaluate(noisy, condition, 0.4), restored.evaluate(noisy, condition, 0.4))

    def test_rejects_foreign_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            truncated = Path(tmp) / "short.rpdt"
            truncated.write_bytes(b"\x01\x02")
            with self.assertRaises(DehazeError):
                load_model(truncated)
            foreign = Path(tmp) / "foreign.rpdt"
            header = b'{"__metadata__": {"format": "other"}}'
            foreign.write_bytes(len(header).to_bytes(8, "little") + header)
            with self.assertRaises(DehazeError):
                load_model(foreign)


class ExternalTests(SimpleTestCase):
    def test_dotted_factory(self):
        denoiser = load_external("core.tests.test_denoisers.ZeroDenoiser", scale=2.0)
        np.testing.assert_array_equal(denoiser.evaluate(np.ones((2, 2)), None, 0.5), 2.0)

    def test_bad_paths(self):
        with self.assertRaises(ParameterError):
            load_external("core.tests.test_denoisers.Missing")
        with self.assertRaises(ParameterError):
            load_external("core.tests.test_denoisers.not_a_denoiser")
