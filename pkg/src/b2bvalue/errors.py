"""Exception types shared across the toolkit."""


class B2BValueError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(B2BValueError):
    """An input violates a documented invariant (shape, sign, finiteness)."""


class ProfileParseError(B2BValueError):
    """A profile CSV row could not be parsed."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ResolutionError(B2BValueError):
    """Timestamp spacing does not match the expected step length."""


class GenerationError(B2BValueError):
    """Scenario generation cannot proceed (e.g. empty profile pool)."""


class DegenerateInputError(GenerationError):
    """Inputs make the requested quantity undefined (e.g. zero class peak)."""


class EvaluationError(B2BValueError):
    """A scenario evaluation failed; the message names set/subset/rep."""


class ModelError(B2BValueError):
    """The network model is malformed (not a tree, unknown bus, ...)."""


class SingularSensitivityError(B2BValueError):
    """A self-sensitivity of zero makes the hosting formula singular."""


class AggregationError(B2BValueError):
    """No defined samples were available to aggregate."""


class ConfigError(B2BValueError):
    """A study configuration file is invalid."""
