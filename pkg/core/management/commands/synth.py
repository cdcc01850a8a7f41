from pathlib import Path

from core.hazesynth import HazeScene, make_toy_dataset
from core.imageio import read_image, write_image, write_json
from core.management.base import DehazeCommand


def write_scene(directory, scene, hazy_path=None):
    directory.mkdir(parents=True, exist_ok=True)
    hazy_path = hazy_path or directory / "hazy.png"
    write_image(directory / "clear.png", scene.clear)
    write_image(directory / "tmap.pgm", scene.tmap)
    write_image(hazy_path, scene.hazy)
    write_json(directory / "scene.json", scene.to_dict())
    return hazy_path


class Command(DehazeCommand):
    help = "Synthesize hazy images with the scattering model, from files or generated toy scenes"

    def add_arguments(self, parser):
        parser.add_argument("--clear", help="clear image; with --tmap, hazes this pair instead of generating")
        parser.add_argument("--tmap", help="transmission map (PGM) matching --clear")
        parser.add_argument("--airlight", type=float, default=0.8, help="airlight for file input")
        parser.add_argument("--count", type=int, default=1, help="number of generated scenes")
        parser.add_argument("--size", type=int, default=64, help="side of generated scenes in pixels")
        parser.add_argument("--smooth", action="store_true", help="generated scenes without shapes")
        parser.add_argument("--output", help="hazy image path for a single scene (default: <run dir>/hazy.png)")
        self.add_run_arguments(parser)

    def run(self, *args, **options):
        if bool(options["clear"]) != bool(options["tmap"]):
            raise self.usage_error("--clear and --tmap must be given together")
        config = self.load_config(options)
        output = Path(options["output"]) if options["output"] else None

        if options["clear"]:
            scene = HazeScene(
                clear=read_image(options["clear"]),
                tmap=read_image(options["tmap"]),
                airlight=options["airlight"],
                layout="file",
                seed=config.seed,
            )
            run_dir = self.run_dir(config, options, Path(options["clear"]).resolve(),
                                   Path(options["tmap"]).resolve(), options["airlight"])
            hazy_path = output or run_dir / "hazy.png"
            write_image(hazy_path, scene.hazy)
            write_json(run_dir / "scene.json", scene.to_dict())
            self.success(f"Hazy image written to {hazy_path}")
            return

        scenes = make_toy_dataset(options["count"], options["size"], config.seed, shapes=not options["smooth"])
        run_dir = self.run_dir(config, options, options["count"], options["size"], options["smooth"])
        if len(scenes) == 1:
            hazy_path = write_scene(run_dir, scenes[0], output)
            self.success(f"Toy scene ({scenes[0].layout}) written to {run_dir}, hazy image {hazy_path}")
            return
        for index, scene in enumerate(scenes):
            write_scene(run_dir / f"scene-{index:03d}", scene)
        self.success(f"{len(scenes)} toy scenes written to {run_dir}")
