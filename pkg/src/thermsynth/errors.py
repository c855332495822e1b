"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class ThermsynthError(Exception):
    exit_code = 2


class ConfigError(ThermsynthError):
    exit_code = 1


class DataError(ThermsynthError):
    exit_code = 2


class ParseError(DataError):
    """Malformed label or metadata content.

    ``line`` is the 1-based line (or row) number when known.
    """

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.detail = message
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class SerializationError(DataError):
    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message if index is None else f"annotation {index}: {message}")


class ImageFormatError(DataError):
    pass


class MeshError(DataError):
    pass


class MergeError(DataError):
    pass


class GenerationError(ThermsynthError):
    """A per-image failure during generation; names the background."""

    def __init__(self, background_id: str, cause: BaseException):
        self.background_id = background_id
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3 if isinstance(cause, OSError) else 2)
        super().__init__(f"background {background_id!r}: {cause}")
