from core_apps.common.exceptions import LabError


class StrategyError(LabError):
    pass


class MissingClassifier(StrategyError):
    pass


class SingleClassData(StrategyError):
    pass


class MultipleNewIntents(StrategyError):
    def __init__(self, update: str, intents):
        super().__init__(f"update {update!r} introduces {len(intents)} intents ({', '.join(intents)}); "
                         "intent-only relabeling needs exactly one or none")
        self.update = update
        self.intents = list(intents)
