import warnings


class TimestampOrderWarning(Warning):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return repr(self.message)


class OutOfSensorWarning(Warning):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return repr(self.message)


class SeedRejectedWarning(Warning):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return repr(self.message)


class TemplateClipWarning(Warning):
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return repr(self.message)


def filter_warnings(wfilter):
    """
    wfilter: {string}
    - "ignore": never print matching warnings;
    - "always": always print matching warnings

    """
    warnings.simplefilter(wfilter)


class EECCError(Exception):
    """Base class of the errors raised by `eecc`"""


class ShapeError(EECCError):
    """
    Exception class for handling shape mismatch errors.

    Raised when arrays handed to the solver do not share the window size.

    """

    def __init__(self, value):
        super(ShapeError, self).__init__(value)
        self.value = value

    def __str__(self):
        return repr(self.value)


class DegenerateWindowError(EECCError):
    """A density window has zero norm, e.g. every splat fell outside it."""


class SolverDegenerateError(EECCError):
    """The closed-form step is undefined for the current cache."""


class InitStarvedError(EECCError):
    """The stream ended before the initial event buffer could be filled."""


class EventOrderError(EECCError):
    """An event older than the newest buffered event was pushed."""


class ContractViolationError(EECCError):
    """A `ChangeSet` is inconsistent with the template it refers to."""


class EmptyOverlapError(EECCError):
    """A track and its ground truth share no time interval."""


class ConfigError(EECCError):
    """Invalid configuration or scenario text."""


class StreamParseError(EECCError):
    """Malformed line in a text stream.

    Parameters
    ----------
    line_number : int
        1-based line number of the offending line
    message : str
        What is wrong with the line
    """

    def __init__(self, line_number: int, message: str):
        super(StreamParseError, self).__init__(f"line {line_number}: {message}")
        self.line_number = line_number
