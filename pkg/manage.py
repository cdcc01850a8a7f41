#!/usr/bin/env python
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'rpd_diff.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError:
        raise

    # Dehazing subcommands go through the exit-code contract of core.cli;
    # everything else (test, check, shell) is plain Django.
    from core.cli import is_dehaze_command, main as dehaze_main

    if len(sys.argv) > 1 and is_dehaze_command(sys.argv[1]):
        sys.exit(dehaze_main(sys.argv))
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
