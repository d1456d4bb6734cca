"""Shared option handling for the experiment management commands."""
from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path

import yaml
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from pydantic import ValidationError

from core_apps.common.exceptions import LabError
from core_apps.common.logging import run_log

from .config import ExperimentConfig, load_experiment_config


def comma_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def comma_ints(value: str) -> list[int]:
    return [int(item) for item in comma_list(value)]


@contextmanager
def lab_errors():
    """Turn domain, validation, YAML and IO failures into a clean ``CommandError``."""
    try:
        yield
    except LabError as err:
        raise CommandError(str(err)) from err
    except ValidationError as err:
        raise CommandError(f"invalid experiment config:\n{err}") from err
    except yaml.YAMLError as err:
        raise CommandError(f"could not read experiment config: {err}") from err
    except OSError as err:
        raise CommandError(f"{err.strerror or err}: {err.filename or ''}".rstrip(": ")) from err


class ExperimentCommand(BaseCommand):
    """``--config`` and ``--out`` plus the grid filters a command opts into."""

    grid_options = ("strategies", "updates", "seeds", "sizes", "workers")

    def add_arguments(self, parser):
        parser.add_argument("--config", default=str(settings.EXPERIMENT_CONFIG), help="experiment YAML file")
        parser.add_argument("--out", default=str(settings.OUTPUT_DIR), help="output directory")
        if "strategies" in self.grid_options:
            parser.add_argument("--strategies", type=comma_list, help="comma-separated strategy names")
        if "updates" in self.grid_options:
            parser.add_argument("--updates", type=comma_list, help="comma-separated update keys, e.g. A,C")
        if "seeds" in self.grid_options:
            parser.add_argument("--seeds", type=comma_ints, help="comma-separated seeds")
        if "sizes" in self.grid_options:
            parser.add_argument("--sizes", type=comma_ints, help="comma-separated V2 sizes for the curve")
        if "workers" in self.grid_options:
            parser.add_argument("--workers", type=int, help=f"worker processes (default {settings.DEFAULT_WORKERS})")

    def load_config(self, options) -> ExperimentConfig:
        config = load_experiment_config(options["config"])
        return config.narrowed(
            strategies=options.get("strategies"),
            updates=options.get("updates"),
            seeds=options.get("seeds"),
            sizes=options.get("sizes"),
            workers=options.get("workers") or (settings.DEFAULT_WORKERS if config.workers == 1 else None),
        )

    def handle(self, *args, **options):
        out_dir = Path(options["out"])
        with lab_errors():
            out_dir.mkdir(parents=True, exist_ok=True)
            with run_log(out_dir):
                return self.run(out_dir, options)

    def run(self, out_dir: Path, options):
        raise NotImplementedError
