"""Shared plumbing for the dehazing management commands."""
import argparse
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, DjangoHelpFormatter

from core.config import SECTIONS, RunConfig
from core.exceptions import DehazeError
from core.imageio import write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

ON_OFF = ("on", "off")


class DefaultsHelpFormatter(DjangoHelpFormatter):
    """Django's layout with every option's default appended to its help."""

    def _get_help_string(self, action):
        text = action.help or ""
        if "(default:" in text or "%(default)" in text:
            return text
        if action.option_strings and action.default is not argparse.SUPPRESS:
            return f"{text} (default: %(default)s)"
        return text


class DehazeCommand(BaseCommand):
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.formatter_class = DefaultsHelpFormatter
        return parser

    # ============= ARGUMENTS =============
    def add_run_arguments(self, parser):
        parser.add_argument("--config", help="JSON config file with nested sections; flags override it")
        parser.add_argument("--out-dir", help=f"root of run directories (default: {settings.DEHAZE_OUTPUT_ROOT})")
        parser.add_argument("--run-id", help="run directory name (default: hash of the effective config)")
        parser.add_argument("--seed", type=int, help="seed for every randomized path (default: 0)")

    def config_flag(self, parser, flag, section, name, **kwargs):
        """A flag that overrides ``section.name`` of the run config when given."""
        default = getattr(SECTIONS[section](), name)
        if isinstance(default, bool):
            kwargs.setdefault("choices", ON_OFF)
            default = "on" if default else "off"
        if "choices" not in kwargs:
            kwargs.setdefault("metavar", flag.lstrip("-").replace("-", "_").upper())
        text = kwargs.pop("help", name.replace("_", " "))
        parser.add_argument(flag, dest=f"{section}__{name}", default=None,
                            help=f"{text} (default: {default})", **kwargs)

    # ============= CONFIG & OUTPUT =============
    def load_config(self, options):
        path = options.get("config") or settings.DEHAZE_CONFIG
        config = RunConfig.load(path) if path else RunConfig()

        overrides = {}
        for key, value in options.items():
            if "__" not in key or value is None:
                continue
            section, name = key.split("__", 1)
            if value in ON_OFF:
                value = value == "on"
            overrides.setdefault(section, {})[name] = value
        if "workers" not in overrides.get("sampler", {}) and settings.DEHAZE_WORKERS != 1:
            overrides.setdefault("sampler", {})["workers"] = settings.DEHAZE_WORKERS

        # T first: other sections derive from it.
        for section in sorted(overrides, key=lambda s: s != "schedule"):
            config = config.with_overrides(section, **overrides[section])
        return config.with_overrides(seed=options.get("seed"))

    def run_dir(self, config, options, *extra):
        root = Path(options.get("out_dir") or settings.DEHAZE_OUTPUT_ROOT)
        name = self.__module__.rsplit(".", 1)[-1]
        run_id = options.get("run_id") or f"{name}-{config.run_id(name, *extra)}"
        path = root / run_id
        path.mkdir(parents=True, exist_ok=True)
        write_json(path / "config.json", config.to_dict())
        return path

    # ============= EXECUTION =============
    def handle(self, *args, **options):
        try:
            self.run(*args, **options)
        except DehazeError as exc:
            logger.debug(f"{type(exc).__name__}: {exc}", exc_info=True)
            raise CommandError(str(exc), returncode=EXIT_RUNTIME) from exc
        except OSError as exc:
            raise CommandError(f"I/O error: {exc}", returncode=EXIT_RUNTIME) from exc

    def run(self, *args, **options):
        raise NotImplementedError

    def usage_error(self, message):
        return CommandError(message, returncode=EXIT_USAGE)

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
