"""Exception types raised across the package."""


class MSDCRError(Exception):
    """Base class for all package errors."""


class ParseError(MSDCRError, ValueError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class IntegrityError(MSDCRError, ValueError):
    pass


class EmptyOverlapError(MSDCRError, ValueError):
    pass


class ConfigError(MSDCRError, ValueError):
    pass


class ProtocolError(MSDCRError, ValueError):
    """The evaluation protocol cannot be applied to the given data."""


class TrainingError(MSDCRError, RuntimeError):
    pass
