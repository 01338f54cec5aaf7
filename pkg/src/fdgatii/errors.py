"""Exception hierarchy shared by the library and the command line."""


class FDGATIIError(Exception):
    exit_code = 1


class ConfigError(FDGATIIError, ValueError):
    exit_code = 2


class DataError(FDGATIIError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class IntegrityError(DataError):
    pass


class NumericError(FDGATIIError, ArithmeticError):
    exit_code = 4


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""
