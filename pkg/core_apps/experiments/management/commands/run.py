from core_apps.experiments.cli import ExperimentCommand
from core_apps.experiments.runner import grid_reports, run_grid, summarize


class Command(ExperimentCommand):
    help = "Train and evaluate every strategy x update x seed cell, resuming finished cells"
    grid_options = ("strategies", "updates", "seeds", "workers")

    def run(self, out_dir, options):
        config = self.load_config(options)
        outcome = run_grid(config, out_dir)
        self.stdout.write(
            f"{len(outcome.completed)} cell(s) run, {len(outcome.skipped)} skipped as already finished"
        )
        summary = summarize(grid_reports(config, out_dir), out_dir, config)
        self.stdout.write((out_dir / "summary.txt").read_text())
        headline = summary.headline()
        if headline:
            self.stdout.write(self.style.SUCCESS(f"{headline[0]} closes {headline[1]:.1f}% of the gap"))
