from core_apps.experiments.cli import ExperimentCommand
from core_apps.experiments.runner import generate_data


class Command(ExperimentCommand):
    help = "Build the corpus and one versioned dataset per update"
    grid_options = ("updates",)

    def run(self, out_dir, options):
        config = self.load_config(options)
        datasets = generate_data(config, out_dir)
        for key, dataset in datasets.items():
            counts = ", ".join(f"{p.value}={n}" for p, n in dataset.counts().items())
            self.stdout.write(f"{key}: {len(dataset)} examples ({counts})")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(datasets)} versioned datasets under {out_dir}"))
