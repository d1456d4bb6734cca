from core_apps.common.exceptions import LabError


class DatasetError(LabError):
    pass


class MissingV2Label(DatasetError):
    pass


class AmbiguousRules(DatasetError):
    pass


class InsufficientPartition(DatasetError):
    def __init__(self, partition: str, available: int, requested: int):
        super().__init__(f"partition {partition!r} has {available} examples but {requested} were requested")
        self.partition = partition
        self.available = available
        self.requested = requested


class DegenerateGrammar(DatasetError):
    def __init__(self, message: str, intent: str | None = None):
        super().__init__(message)
        self.intent = intent


class CorpusParseError(DatasetError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
