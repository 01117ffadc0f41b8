"""Exception hierarchy shared by every module.

Each class carries a short machine-parsable ``code`` that the command-line
front end prints on the diagnostic stream.
"""


class XrlError(Exception):
    code = "E_XRL"


class FormatError(XrlError, ValueError):
    code = "E_FORMAT"


class RowError(FormatError):
    """A single CSV row could not be parsed."""

    code = "E_ROW"

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DataError(XrlError, ValueError):
    code = "E_DATA"


class ConfigError(XrlError, ValueError):
    code = "E_CONFIG"


class UsageError(XrlError, ValueError):
    code = "E_USAGE"


class CapacityError(XrlError, ValueError):
    code = "E_CAPACITY"


class NumericError(XrlError, ArithmeticError):
    code = "E_NUMERIC"


class DimensionError(XrlError, ValueError):
    code = "E_DIMENSION"
