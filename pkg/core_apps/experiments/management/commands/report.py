from core_apps.evaluation import load_reports
from core_apps.experiments.cli import ExperimentCommand
from core_apps.experiments.runner import summarize


class Command(ExperimentCommand):
    help = "Render the summary tables and gap closure from the reports under --out"
    grid_options = ()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--reports", help="report file or directory to read (default: --out)"
        )

    def run(self, out_dir, options):
        summarize(load_reports(options.get("reports") or out_dir), out_dir)
        self.stdout.write((out_dir / "summary.txt").read_text())
