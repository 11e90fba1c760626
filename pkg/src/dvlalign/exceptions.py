class AlignmentError(Exception):
    """Base class for alignment failures."""


class UnderdeterminedError(AlignmentError):
    """The accumulated vector pairs do not fix a unique attitude."""


class StreamError(AlignmentError, ValueError):
    """Sensor stream is empty, out of order, or at the wrong rate."""


class NumericalError(AlignmentError, ArithmeticError):
    pass


class ConfigError(ValueError):
    pass
