from core_apps.common.exceptions import LabError


class ParserError(LabError):
    pass


class EmptyData(ParserError):
    pass


class DuplicateHead(ParserError):
    pass


class UnknownHead(ParserError):
    pass
