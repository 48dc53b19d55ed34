__all__ = [
    "ReidException",
    "ConfigError",
    "DataFormatError",
    "NumericalError",
    "ShapeError",
    "GraphError",
    "BankStateError",
]


class ReidException(Exception):
    exit_code: int = 1

    def __init__(self, *args):
        super().__init__(*args)


class ConfigError(ReidException):
    exit_code = 2


class DataFormatError(ReidException):
    exit_code = 3

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(ReidException):
    exit_code = 4


class ShapeError(NumericalError):
    """Operand shapes a primitive cannot combine."""


class GraphError(NumericalError):
    """Misuse of the differentiation tape (e.g. backward before evaluation)."""


class BankStateError(NumericalError):
    """Memory bank accessed in a state its discipline forbids."""
