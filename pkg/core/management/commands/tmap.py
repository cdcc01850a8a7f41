from pathlib import Path

from core.imageio import read_image, write_image, write_json
from core.management.base import DehazeCommand
from core.transmission import SKY, estimate_transmission


class Command(DehazeCommand):
    help = "Estimate the transmission map of a hazy image with sky-region preservation"

    def add_arguments(self, parser):
        parser.add_argument("--input", required=True, help="hazy color image (PNG/PPM)")
        parser.add_argument("--output", help="PGM path for the map (default: <run dir>/tmap.pgm)")
        parser.add_argument("--intermediates", action="store_true",
                            help="also write dark channel, initial map and sky mask")
        parser.add_argument("--airlight", type=float, help="fixed airlight instead of the estimate (default: estimated)")
        self.config_flag(parser, "--omega", "dcp", "omega", type=float, help="haze retention factor")
        self.config_flag(parser, "--window", "dcp", "window", type=int, help="dark channel window (odd)")
        self.config_flag(parser, "--guided-radius", "dcp", "guided_radius", type=int, help="guided filter radius")
        self.config_flag(parser, "--guided-reg", "dcp", "guided_reg", type=float, help="guided filter regularizer")
        self.config_flag(parser, "--t0", "dcp", "t0", type=float, help="transmission floor")
        self.config_flag(parser, "--tau-g", "dcp", "tau_g", type=float, help="sky gradient threshold")
        self.config_flag(parser, "--tau-b", "dcp", "tau_b", type=float, help="sky brightness threshold")
        self.config_flag(parser, "--feather-sigma", "dcp", "feather_sigma", type=float, help="sky mask feathering")
        self.config_flag(parser, "--grad-filter", "dcp", "grad_filter", choices=("gaussian", "bilateral"),
                         help="gradient smoothing filter")
        self.config_flag(parser, "--gray-method", "dcp", "gray_method", choices=("rec601", "pca"),
                         help="grayscale conversion")
        self.add_run_arguments(parser)

    def run(self, *args, **options):
        config = self.load_config(options)
        source = Path(options["input"])
        hazy = read_image(source)
        estimate = estimate_transmission(hazy, config.dcp, airlight=options["airlight"])

        run_dir = self.run_dir(config, options, source.resolve(), options["airlight"])
        output = Path(options["output"]) if options["output"] else run_dir / "tmap.pgm"
        write_image(output, estimate.tmap)
        if options["intermediates"]:
            write_image(run_dir / "dark.pgm", estimate.dark)
            write_image(run_dir / "initial.pgm", estimate.initial)
            write_image(run_dir / "sky.pgm", estimate.sky_mask / SKY)
        write_json(output.with_suffix(".json"), {
            "input": str(source),
            "airlight": estimate.airlight,
            "tmap_mean": float(estimate.tmap.mean()),
            "params": config.to_dict()["dcp"],
        })
        self.success(f"Transmission map written to {output} (A={estimate.airlight:.4f})")
