from core_apps.common.exceptions import LabError


class ParseTreeError(LabError):
    pass


class EmptyInput(ParseTreeError):
    pass


class UnbalancedBrackets(ParseTreeError):
    pass


class UnknownSpan(ParseTreeError):
    def __init__(self, span: str):
        super().__init__(f"quoted span {span!r} does not occur in the query")
        self.span = span


class MalformedTree(ParseTreeError):
    pass


class MalformedSequence(ParseTreeError):
    pass
