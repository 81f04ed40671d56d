class ConfigError(ValueError):
    """Invalid scenario or configuration; ``line`` points into the source file when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            loc = f"line {line}: "
        super().__init__(loc + message)


class NumericalAbort(RuntimeError):
    """A run produced a non-finite state. ``record`` holds the rows written so far."""

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record
