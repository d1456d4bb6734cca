from core_apps.common.exceptions import LabError
from core_apps.evaluation import IncompleteGrid


class ExperimentError(LabError):
    pass


class UnknownSelection(ExperimentError):
    def __init__(self, field: str, unknown, available):
        listed = ", ".join(map(str, available))
        super().__init__(f"unknown {field}: {', '.join(map(str, unknown))} (available: {listed})")
        self.field = field
        self.unknown = list(unknown)


class MissingData(ExperimentError):
    pass


class CellFailures(ExperimentError, IncompleteGrid):
    """Raised after a grid finishes with failed cells; completed cells stay on disk."""

    def __init__(self, failures):
        self.failures = list(failures)
        self.missing = sorted(tuple(failure.key.split("/")) for failure in self.failures)
        lines = [f"  {failure.key}: {failure.message}" for failure in self.failures]
        LabError.__init__(self, f"{len(self.failures)} cell(s) failed, grid incomplete:\n" + "\n".join(lines))
