from pathlib import Path

from core.imageio import dumps_json, write_json
from core.management.base import DehazeCommand
from core.patches import cover_count, load_weights, make_uniform_weights, plan_patches


class Command(DehazeCommand):
    help = "Plan the overlapping patch grid for an image size and dump it as JSON"

    def add_arguments(self, parser):
        parser.add_argument("action", choices=("plan",), help="what to do with the grid")
        parser.add_argument("--height", type=int, required=True, help="image height in pixels")
        parser.add_argument("--width", type=int, required=True, help="image width in pixels")
        self.config_flag(parser, "--patch", "sampler", "patch", type=int, help="patch side")
        self.config_flag(parser, "--stride", "sampler", "stride", type=int, help="patch stride")
        parser.add_argument("--weights", help="per-pixel weight table (.npy) instead of uniform weights")
        parser.add_argument("--include-weights", action="store_true", help="dump the full weight table")
        parser.add_argument("--output", help="JSON path (default: standard output)")
        self.add_run_arguments(parser)

    def run(self, action, **options):
        config = self.load_config(options)
        grid = plan_patches(options["height"], options["width"], config.sampler.patch, config.sampler.stride)
        weights = load_weights(options["weights"], grid) if options["weights"] else make_uniform_weights(grid)
        cover = cover_count(grid)

        data = {
            "grid": grid.to_dict(),
            "cover": {"min": int(cover.min()), "max": int(cover.max())},
            "weights": {
                "source": options["weights"] or "uniform",
                "sum_min": float(weights.full(grid).min()),
                "sum_max": float(weights.full(grid).max()),
            },
        }
        if options["include_weights"]:
            data["weights"]["table"] = weights.table.tolist()

        if options["output"]:
            path = write_json(Path(options["output"]), data)
            self.success(f"Patch plan with {len(grid)} patches written to {path}")
        else:
            self.stdout.write(dumps_json(data), ending="")
