import io
from pathlib import Path

from core.imageio import write_csv, write_csv_rows
from core.management.base import DehazeCommand
from core.pist import schedule_from_params, schedule_rows


class Command(DehazeCommand):
    help = "Dump the noise schedule and physics-guided interpolation weights as CSV"

    def add_arguments(self, parser):
        parser.add_argument("action", choices=("dump",), help="what to do with the schedule")
        self.config_flag(parser, "--T", "schedule", "T", type=int, help="number of diffusion steps")
        self.config_flag(parser, "--beta-start", "schedule", "beta_start", type=float, help="first beta")
        self.config_flag(parser, "--beta-end", "schedule", "beta_end", type=float, help="last beta")
        self.config_flag(parser, "--pist-a", "pist", "a", type=float, help="interpolation curvature")
        self.config_flag(parser, "--pist", "pist", "enabled", help="physics-guided interpolation")
        parser.add_argument("--tau", type=float, nargs="+", default=[0.1, 0.5, 1.0],
                            help="transmission values for the W(t, tau) columns")
        parser.add_argument("--output", help="CSV path (default: standard output)")
        self.add_run_arguments(parser)

    def run(self, action, **options):
        config = self.load_config(options)
        sched = schedule_from_params(config.schedule)
        header = ["t", "beta", "alpha", "gamma", *(f"W_tau={tau:g}" for tau in options["tau"])]
        rows = schedule_rows(sched, options["tau"], config.pist)

        if options["output"]:
            path = write_csv(Path(options["output"]), header, rows)
            self.success(f"Schedule with T={sched.T} written to {path}")
        else:
            buffer = io.StringIO()
            write_csv_rows(buffer, header, rows)
            self.stdout.write(buffer.getvalue(), ending="")
