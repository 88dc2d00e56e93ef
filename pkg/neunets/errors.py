class NeunetsError(Exception):
    """Base class of all errors raised by neunets

    The CLI maps subclasses to exit codes, everything else is a plain failure.
    """
