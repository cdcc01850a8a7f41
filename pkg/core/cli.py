"""Entry point with the exit-code contract: 0 ok, 1 usage error, 2 runtime error."""
import os
import sys
from pathlib import Path

COMMANDS = ("tmap", "synth", "schedule", "patches", "dehaze", "train_toy", "eval")
ALIASES = {"train-toy": "train_toy"}

EXIT_OK = 0
EXIT_USAGE = 1


def is_dehaze_command(name):
    return ALIASES.get(name, name) in COMMANDS


def usage(prog):
    names = ", ".join(sorted({ALIASES.get(c, c) for c in COMMANDS} | set(ALIASES)))
    return (
        f"usage: {prog} <subcommand> [options]\n"
        f"subcommands: {names}\n"
        f"run '{prog} <subcommand> --help' for the options of one subcommand\n"
    )


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    prog = Path(argv[0]).name if argv else "rpd-diff"
    args = argv[1:]

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "rpd_diff.settings")
    import django
    from django.core.management import load_command_class
    from django.core.management.base import CommandError

    django.setup()

    if not args or args[0] in ("-h", "--help", "help"):
        (sys.stdout if args else sys.stderr).write(usage(prog))
        return EXIT_OK if args else EXIT_USAGE
    name = ALIASES.get(args[0], args[0])
    if name not in COMMANDS:
        sys.stderr.write(f"{prog}: unknown subcommand {args[0]!r}\n{usage(prog)}")
        return EXIT_USAGE

    command = load_command_class("core", name)
    parser = command.create_parser(prog, args[0])
    try:
        options = parser.parse_args(args[1:])
    except CommandError as exc:
        sys.stderr.write(f"{parser.format_usage()}{prog} {args[0]}: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    options = vars(options)
    positional = options.pop("args", ())
    try:
        command.execute(*positional, **options)
    except CommandError as exc:
        sys.stderr.write(f"{prog} {args[0]}: error: {exc}\n")
        return exc.returncode
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
