"""Exception types raised across the package."""


class ErnetclError(Exception):
    """Base class; the CLI turns any of these into a one-line diagnostic."""


class ShapeError(ErnetclError, ValueError):
    pass


class ConfigError(ErnetclError, ValueError):
    pass


class LabelError(ErnetclError, ValueError):
    pass


class RangeError(ErnetclError, ValueError):
    pass


class EmptyError(ErnetclError, ValueError):
    pass


class FormatError(ErnetclError, ValueError):
    pass


class ParseError(FormatError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DeterminismError(ErnetclError, RuntimeError):
    pass
