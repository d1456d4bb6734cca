#!/usr/bin/env python
"""Command-line entry point: experiment subcommands and the test runner."""
import os
import sys


def main():
    """Run administrative tasks."""

    running_env = os.getenv("RUNNING_ENV", "local").lower()
    if len(sys.argv) > 1 and sys.argv[1] == "test":
        running_env = "test"
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", f"config.settings.{running_env}")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
