import logging
from pathlib import Path

from core.denoisers import OracleDenoiser, load_external, load_model, make_tiny_denoiser
from core.hadtp import write_offset_trace
from core.imageio import read_image, write_image, write_json
from core.imaging import channels
from core.management.base import DehazeCommand
from core.metrics import psnr, ssim
from core.patches import load_weights, plan_patches
from core.pist import schedule_from_params
from core.sampler import dehaze
from core.transmission import estimate_transmission

logger = logging.getLogger(__name__)

BACKENDS = ("oracle", "tiny", "external")


class Command(DehazeCommand):
    help = "Dehaze an image by patch-wise reverse diffusion"

    def add_arguments(self, parser):
        parser.add_argument("--input", required=True, help="hazy image")
        parser.add_argument("--tmap", help="transmission map (PGM) (default: estimated from the input)")
        parser.add_argument("--clear", help="ground truth; required by the oracle backend, reported against otherwise")
        parser.add_argument("--backend", choices=BACKENDS, default="oracle", help="noise estimator")
        parser.add_argument("--model", help="tiny denoiser weights (default: freshly initialized from --seed)")
        parser.add_argument("--denoiser", help="dotted path to a factory for the external backend")
        parser.add_argument("--weights", help="per-pixel patch weight table (.npy) (default: uniform)")
        self.config_flag(parser, "--T", "schedule", "T", type=int, help="number of diffusion steps")
        self.config_flag(parser, "--steps", "sampler", "steps", type=int, help="visited timesteps, 0 for all T")
        self.config_flag(parser, "--patch", "sampler", "patch", type=int, help="patch side")
        self.config_flag(parser, "--stride", "sampler", "stride", type=int, help="patch stride")
        self.config_flag(parser, "--workers", "sampler", "workers", type=int, help="threads evaluating patches")
        self.config_flag(parser, "--pist-a", "pist", "a", type=float, help="interpolation curvature")
        self.config_flag(parser, "--pist", "pist", "enabled", help="physics-guided interpolation")
        self.config_flag(parser, "--hadtp", "hadtp", "enabled", help="haze-aware timestep retargeting")
        self.config_flag(parser, "--kappa", "hadtp", "kappa", type=float, help="retargeting gain")
        parser.add_argument("--deterministic", action="store_const", const=True, dest="sampler__deterministic",
                            help="no injected noise during reverse steps (default: False)")
        parser.add_argument("--output", help="restored image path (default: <run dir>/result.png)")
        parser.add_argument("--trace-dir", help="directory for offsets.csv (default: <run dir>/trace)")
        self.add_run_arguments(parser)

    def make_denoiser(self, backend, options, config, schedule, hazy, tmap):
        if backend == "oracle":
            if not options["clear"]:
                raise self.usage_error("the oracle backend needs --clear")
            return OracleDenoiser(read_image(options["clear"]), hazy, tmap, schedule, config.pist)
        if backend == "tiny":
            if options["model"]:
                return load_model(options["model"])
            logger.warning("No --model given: the tiny denoiser is untrained")
            return make_tiny_denoiser(channels(hazy), seed=config.seed)
        if not options["denoiser"]:
            raise self.usage_error("the external backend needs --denoiser")
        return load_external(options["denoiser"])

    def run(self, *args, **options):
        config = self.load_config(options)
        source = Path(options["input"])
        hazy = read_image(source)
        if options["tmap"]:
            tmap = read_image(options["tmap"])
        else:
            tmap = estimate_transmission(hazy, config.dcp).tmap

        schedule = schedule_from_params(config.schedule)
        denoiser = self.make_denoiser(options["backend"], options, config, schedule, hazy, tmap)
        weights = None
        if options["weights"]:
            grid = plan_patches(*tmap.shape[:2], config.sampler.patch, config.sampler.stride)
            weights = load_weights(options["weights"], grid)

        trace = []
        restored = dehaze(hazy, tmap, denoiser, config.sampler, schedule=schedule, weights=weights, trace=trace)

        run_dir = self.run_dir(config, options, source.resolve(), options["tmap"], options["backend"],
                               options["model"], options["denoiser"], options["weights"])
        output = Path(options["output"]) if options["output"] else run_dir / "result.png"
        write_image(output, restored)
        write_image(run_dir / "tmap.pgm", tmap)
        trace_dir = Path(options["trace_dir"]) if options["trace_dir"] else run_dir / "trace"
        write_offset_trace(trace_dir / "offsets.csv", trace)

        if options["clear"]:
            clear = read_image(options["clear"])
            report = {"psnr": psnr(clear, restored), "ssim": ssim(clear, restored)}
            write_json(run_dir / "report.json", report)
            self.success(f"Restored image written to {output} (PSNR {report['psnr']:.2f} dB)")
        else:
            self.success(f"Restored image written to {output}")
