import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from core.config import HadtpParams, PistParams, SamplerConfig
from core.denoisers import OracleDenoiser, make_tiny_denoiser
from core.exceptions import DenoiserError, DimensionMismatchError, ParameterError
from core.hazesynth import HazeScene, make_toy_dataset
from core.metrics import psnr
from core.pist import intermediate_state, make_schedule
from core.sampler import ABLATION_ARMS, dehaze, run_ablation


def small_config(T=20, **kwargs):
    return SamplerConfig(patch=16, stride=8, T=T, pist=PistParams(T=T), **kwargs)


class ShapeBreaker:
    def evaluate(self, noisy, condition, gamma, *, origin=None):
        return np.zeros(noisy.shape[:2] + (7,))


class NanMaker:
    def evaluate(self, noisy, condition, gamma, *, origin=None):
        return np.full(noisy.shape, np.nan)


class OracleSamplingTests(SimpleTestCase):
    def setUp(self):
        self.scene = make_toy_dataset(1, size=32, seed=3)[0]

    def oracle(self, cfg, schedule):
        return OracleDenoiser.for_scene(self.scene, schedule, cfg.pist)

    def test_five_scene_closed_loop_at_200_steps(self):
        # The last reverse step with exact noise lands on the t=1 target, which is the frozen baseline.
        cfg = SamplerConfig(T=200, pist=PistParams(T=200), deterministic=True)
        schedule = make_schedule(200)
        for scene in make_toy_dataset(5, size=64, seed=1):
            out = dehaze(scene.hazy, scene.tmap, OracleDenoiser.for_scene(scene, schedule, cfg.pist), cfg,
                         schedule=schedule)
            baseline = np.clip(intermediate_state(scene.clear, scene.hazy, scene.tmap, 1, cfg.pist), 0.0, 1.0)
            np.testing.assert_allclose(out, baseline, atol=1e-9)
            self.assertGreaterEqual(psnr(scene.clear, out), 30.0)
            self.assertAlmostEqual(psnr(scene.clear, out), psnr(scene.clear, baseline), places=6)

    def test_single_strided_step_jumps_from_the_start(self):
        cfg = small_config(T=20, steps=1, deterministic=True)
        cfg = replace(cfg, pist=replace(cfg.pist, enabled=False))
        schedule = make_schedule(cfg.T)
        trace = []
        out = dehaze(self.scene.hazy, self.scene.tmap, self.oracle(cfg, schedule), cfg,
                     schedule=schedule, trace=trace)
        self.assertEqual({row[1] for row in trace}, {20})
        np.testing.assert_allclose(out, self.scene.clear, atol=1e-9)

    def test_overlapping_patches_with_retargeting(self):
        cfg = small_config(deterministic=True)
        schedule = make_schedule(cfg.T)
        trace = []
        out = dehaze(self.scene.hazy, self.scene.tmap, self.oracle(cfg, schedule), cfg,
                     schedule=schedule, trace=trace)
        self.assertGreaterEqual(psnr(self.scene.clear, out), 30.0)
        self.assertEqual(len(trace), 9 * cfg.T)
        self.assertTrue(any(row[2] != 0 for row in trace))

    def test_stochastic_and_strided_runs_still_converge(self):
        cfg = small_config(T=50, steps=10)
        schedule = make_schedule(cfg.T)
        out = dehaze(self.scene.hazy, self.scene.tmap, self.oracle(cfg, schedule), cfg, schedule=schedule)
        self.assertGreaterEqual(psnr(self.scene.clear, out), 30.0)

    def test_uniform_transmission_makes_retargeting_a_no_op(self):
        scene = HazeScene(clear=self.scene.clear, tmap=np.full((32, 32), 0.4), airlight=0.8)
        schedule = make_schedule(20)
        outputs = []
        for enabled in (True, False):
            cfg = replace(small_config(), hadtp=HadtpParams(enabled=enabled))
            outputs.append(dehaze(scene.hazy, scene.tmap, OracleDenoiser.for_scene(scene, schedule, cfg.pist),
                                  cfg, schedule=schedule))
        np.testing.assert_array_equal(outputs[0], outputs[1])

    def test_single_step_matches_reverse_formula(self):
        rng = np.random.default_rng(4)
        clear = rng.uniform(size=(2, 2))
        tmap = rng.uniform(0.2, 0.9, size=(2, 2))
        scene = HazeScene(clear=clear, tmap=tmap, airlight=0.7)
        cfg = SamplerConfig(patch=2, stride=1, T=1, pist=PistParams(T=1), deterministic=True, seed=9)
        schedule = make_schedule(1)
        out = dehaze(scene.hazy, tmap, OracleDenoiser.for_scene(scene, schedule, cfg.pist), cfg, schedule=schedule)

        noise = np.random.default_rng(9).standard_normal((2, 2))
        a = schedule.alpha[1]
        state = math.sqrt(a) * scene.hazy + math.sqrt(1 - a) * noise
        expected = (state - (1 - a) / math.sqrt(1 - a) * noise) / math.sqrt(a)
        np.testing.assert_allclose(out, np.clip(expected, 0, 1), atol=1e-12)

    def test_bit_identical_across_workers_and_runs(self):
        schedule = make_schedule(20)
        results = []
        for workers in (1, 3, 3):
            cfg = small_config(workers=workers, seed=5)
            results.append(dehaze(self.scene.hazy, self.scene.tmap, self.oracle(cfg, schedule), cfg,
                                  schedule=schedule))
        np.testing.assert_array_equal(results[0], results[1])
        np.testing.assert_array_equal(results[1], results[2])

    def test_tiny_denoiser_runs_end_to_end(self):
        cfg = small_config(T=5, deterministic=True)
        out = dehaze(self.scene.hazy, self.scene.tmap, make_tiny_denoiser(3, seed=0), cfg)
        self.assertEqual(out.shape, self.scene.hazy.shape)
        self.assertTrue(np.all((out >= 0) & (out <= 1)))


class FinitenessTests(SimpleTestCase):
    def test_outputs_stay_finite_on_random_scenes(self):
        rng = np.random.default_rng(21)
        schedule = make_schedule(10)
        tiny = make_tiny_denoiser(3, seed=0)
        for index in range(6):
            clear = rng.uniform(size=(24, 24, 3))
            tmap = rng.uniform(0.05, 1.0, size=(24, 24))
            scene = HazeScene(clear=clear, tmap=tmap, airlight=float(rng.uniform(0.6, 1.0)))
            for deterministic in (True, False):
                cfg = small_config(T=10, deterministic=deterministic, seed=index)
                for denoiser in (OracleDenoiser.for_scene(scene, schedule, cfg.pist), tiny):
                    out = dehaze(scene.hazy, tmap, denoiser, cfg, schedule=schedule)
                    self.assertTrue(np.all(np.isfinite(out)))
                    self.assertTrue(np.all((out >= 0.0) & (out <= 1.0)))


class ContractTests(SimpleTestCase):
    def setUp(self):
        self.scene = make_toy_dataset(1, size=16, seed=0)[0]
        self.cfg = SamplerConfig(patch=8, stride=4, T=3, pist=PistParams(T=3))

    def test_mismatched_map(self):
        with self.assertRaises(DimensionMismatchError):
            dehaze(self.scene.hazy, np.ones((16, 15)), ShapeBreaker(), self.cfg)

    def test_color_map_is_rejected(self):
        color_map = np.stack([self.scene.tmap] * 3, axis=-1)
        with self.assertRaisesMessage(DimensionMismatchError, "dimension mismatch"):
            dehaze(self.scene.hazy, color_map, ShapeBreaker(), self.cfg)
        with self.assertRaises(DimensionMismatchError):
            OracleDenoiser(self.scene.clear, self.scene.hazy, color_map, make_schedule(3))

    def test_denoiser_output_checked(self):
        with self.assertRaises(DenoiserError):
            dehaze(self.scene.hazy, self.scene.tmap, ShapeBreaker(), self.cfg)
        with self.assertRaises(DenoiserError):
            dehaze(self.scene.hazy, self.scene.tmap, NanMaker(), self.cfg)

    def test_schedule_length_must_match(self):
        with self.assertRaises(ParameterError):
            dehaze(self.scene.hazy, self.scene.tmap, NanMaker(), self.cfg, schedule=make_schedule(4))


class AblationTests(SimpleTestCase):
    def test_four_arms_with_the_oracle(self):
        scenes = make_toy_dataset(2, size=32, seed=8)
        cfg = small_config(T=10, deterministic=True)
        schedule = make_schedule(cfg.T)
        reports = run_ablation(scenes, lambda s, c: OracleDenoiser.for_scene(s, schedule, c.pist), cfg,
                               schedule=schedule)
        self.assertEqual(list(reports), [arm for arm, _, _ in ABLATION_ARMS])
        for report in reports.values():
            self.assertEqual(len(report.rows), 2)
            self.assertGreaterEqual(report.mean_psnr, 30.0)
