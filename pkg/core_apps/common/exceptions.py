class LabError(Exception):
    """
    Base class for every domain error raised by the lab's apps.

    Management commands catch this family and turn it into a ``CommandError``.
    """
