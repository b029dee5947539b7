"""Exception types shared by every module."""


class OwlEyeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(OwlEyeError, ValueError):
    pass


class FormatError(OwlEyeError):
    """Malformed input file. Carries the location when one is known."""

    def __init__(self, message, path=None, line=None, offset=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte offset {offset}")
        super().__init__(f"{': '.join(loc)}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.offset = offset


class ConsistencyError(FormatError):
    pass


class NumericalError(OwlEyeError, ArithmeticError):
    pass
