from core_apps.common.exceptions import LabError


class EvaluationError(LabError):
    pass


class IncompleteGrid(EvaluationError):
    def __init__(self, missing):
        missing = sorted(missing)
        preview = ", ".join("/".join(str(part) for part in cell) for cell in missing[:5])
        more = f" and {len(missing) - 5} more" if len(missing) > 5 else ""
        super().__init__(f"{len(missing)} grid cell(s) have no report: {preview}{more}")
        self.missing = missing


class DegenerateGap(EvaluationError):
    pass


class NoReportsFound(EvaluationError):
    pass
