from pathlib import Path

from core.denoisers import OracleDenoiser, load_model, make_tiny_denoiser
from core.hazesynth import make_toy_dataset
from core.imageio import dumps_json, write_json
from core.management.base import DehazeCommand
from core.metrics import evaluate_files, pair_directories
from core.pist import schedule_from_params
from core.sampler import run_ablation


class Command(DehazeCommand):
    help = "Score restored images against references, or run the PIST x HADTP ablation"

    def add_arguments(self, parser):
        parser.add_argument("--ref", help="reference image or directory")
        parser.add_argument("--test", help="restored image or directory, paired by file name")
        parser.add_argument("--ablation", action="store_true", help="run the four-arm ablation on toy scenes")
        parser.add_argument("--scenes", type=int, default=3, help="toy scenes for the ablation")
        parser.add_argument("--size", type=int, default=64, help="toy scene side for the ablation")
        parser.add_argument("--backend", choices=("oracle", "tiny"), default="oracle", help="ablation denoiser")
        parser.add_argument("--model", help="tiny denoiser weights for the ablation")
        self.config_flag(parser, "--T", "schedule", "T", type=int, help="number of diffusion steps")
        self.config_flag(parser, "--steps", "sampler", "steps", type=int, help="visited timesteps, 0 for all T")
        self.config_flag(parser, "--patch", "sampler", "patch", type=int, help="patch side")
        self.config_flag(parser, "--stride", "sampler", "stride", type=int, help="patch stride")
        parser.add_argument("--deterministic", action="store_const", const=True, dest="sampler__deterministic",
                            help="no injected noise during reverse steps (default: False)")
        parser.add_argument("--output", help="report JSON (default: <run dir>/report.json)")
        self.add_run_arguments(parser)

    def run(self, *args, **options):
        if options["ablation"]:
            return self.ablation(options)
        if not (options["ref"] and options["test"]):
            raise self.usage_error("--ref and --test are required unless --ablation is given")

        ref, test = Path(options["ref"]), Path(options["test"])
        pairs = pair_directories(ref, test) if ref.is_dir() else [(test.name, ref, test)]
        report = evaluate_files(pairs).to_dict()
        self.write_report(report, options, self.load_config(options), ref.resolve(), test.resolve())

    def ablation(self, options):
        config = self.load_config(options)
        schedule = schedule_from_params(config.schedule)
        scenes = make_toy_dataset(options["scenes"], options["size"], config.seed)
        if options["backend"] == "tiny":
            model = load_model(options["model"]) if options["model"] else make_tiny_denoiser(3, seed=config.seed)

            def make_denoiser(scene, cfg):
                return model
        else:
            def make_denoiser(scene, cfg):
                return OracleDenoiser.for_scene(scene, schedule, cfg.pist)

        reports = run_ablation(scenes, make_denoiser, config.sampler, schedule=schedule)
        report = {arm: r.to_dict() for arm, r in reports.items()}
        self.write_report(report, options, config, "ablation", options["scenes"], options["size"],
                          options["backend"], options["model"])

    def write_report(self, report, options, config, *extra):
        if options["output"]:
            path = write_json(Path(options["output"]), report)
        else:
            path = write_json(self.run_dir(config, options, *extra) / "report.json", report)
        self.stdout.write(dumps_json(report), ending="")
        self.success(f"Report written to {path}")
