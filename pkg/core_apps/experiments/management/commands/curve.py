from core_apps.evaluation import render_curve
from core_apps.experiments.cli import ExperimentCommand
from core_apps.experiments.runner import run_curve


class Command(ExperimentCommand):
    help = "Changed-partition accuracy against V2 size, with and without conflicting V1 data"
    grid_options = ("updates", "seeds", "sizes", "workers")

    def run(self, out_dir, options):
        config = self.load_config(options)
        table = run_curve(config, out_dir)
        self.stdout.write(render_curve(table))
        self.stdout.write(self.style.SUCCESS(f"Curve written under {out_dir / 'curve'}"))
