from pathlib import Path

from core.denoisers import make_tiny_denoiser, save_model
from core.hazesynth import make_toy_dataset
from core.management.base import DehazeCommand
from core.pist import schedule_from_params
from core.training import train_toy


class Command(DehazeCommand):
    help = "Train the tiny denoiser on generated toy scenes"

    def add_arguments(self, parser):
        self.config_flag(parser, "--scenes", "train", "scenes", type=int, help="toy scenes to generate")
        self.config_flag(parser, "--size", "train", "size", type=int, help="toy scene side in pixels")
        self.config_flag(parser, "--steps", "train", "steps", type=int, help="optimizer steps")
        self.config_flag(parser, "--batch-size", "train", "batch_size", type=int, help="crops per step")
        self.config_flag(parser, "--patch", "train", "patch", type=int, help="crop side")
        self.config_flag(parser, "--lr", "train", "lr", type=float, help="Adam learning rate")
        self.config_flag(parser, "--T", "schedule", "T", type=int, help="number of diffusion steps")
        self.config_flag(parser, "--pist-a", "pist", "a", type=float, help="interpolation curvature")
        self.config_flag(parser, "--pist", "pist", "enabled", help="physics-guided interpolation")
        parser.add_argument("--out-model", help="weights file (default: <run dir>/model.rpdt)")
        parser.add_argument("--trace", help="loss CSV (default: <run dir>/trace/loss.csv)")
        self.add_run_arguments(parser)

    def run(self, *args, **options):
        config = self.load_config(options)
        params = config.train
        run_dir = self.run_dir(config, options)

        dataset = make_toy_dataset(params.scenes, params.size, config.seed)
        model = make_tiny_denoiser(3, seed=config.seed)
        trace = Path(options["trace"]) if options["trace"] else run_dir / "trace" / "loss.csv"
        model, losses = train_toy(dataset, model, schedule_from_params(config.schedule), config.pist,
                                  steps=params.steps, seed=config.seed, params=params, trace_path=trace)

        out_model = Path(options["out_model"]) if options["out_model"] else run_dir / "model.rpdt"
        save_model(out_model, model)
        final = f", final loss {losses[-1]:.4f}" if losses else ""
        self.success(f"Trained {params.steps} steps on {params.scenes} scenes{final}; weights in {out_model}")
