"""Exception types raised across the package."""


class DDCMError(Exception):
    pass


class InvalidArgument(DDCMError, ValueError):
    pass


class InvalidConfig(DDCMError, ValueError):
    pass


class ParseError(DDCMError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedDegree(DDCMError, ValueError):
    pass


class SingularElement(DDCMError, ArithmeticError):
    pass


class SingularSystem(DDCMError, ArithmeticError):
    def __init__(self, message, pivot=None):
        self.pivot = pivot
        super().__init__(message)


class InconsistentBC(DDCMError, ValueError):
    pass


class LocationError(DDCMError, ValueError):
    pass


class DomainError(DDCMError, ValueError):
    pass


class ConfigWarning(UserWarning):
    pass
