"""
Exception hierarchy for cramerlab.

Every error raised on purpose by the library derives from CramerLabError,
and also from the builtin (ValueError or RuntimeError) that best matches it
so callers can catch either.
"""


class CramerLabError(Exception):
    """Base class for all cramerlab errors."""


class SupportMismatchError(CramerLabError, ValueError):
    """Two categorical objects that must share a support do not."""


class SpacingError(CramerLabError, ValueError):
    """An operation needs a c-spaced support and got an irregular one."""


class MassError(CramerLabError, ValueError):
    """A distribution that must be proper has total mass away from 1."""


class SupportOverflowError(CramerLabError, RuntimeError):
    """An unprojected distribution grew past the configured atom cap."""


class BracketError(CramerLabError, ValueError):
    """The support does not bracket the attainable returns."""


class TerminalStateError(CramerLabError, RuntimeError):
    """An episode that has ended was stepped without a reset."""


class DimensionError(CramerLabError, ValueError):
    """Feature or parameter dimensions disagree."""


class ConfigError(CramerLabError, ValueError):
    """A configuration document is invalid."""


class EnvFailure(CramerLabError, RuntimeError):
    """An environment could not be built or stepped."""


class StreamMisalignmentError(CramerLabError, RuntimeError):
    """Coupled learners stopped consuming the same sample stream."""


class UnknownPropositionError(CramerLabError, ValueError):
    """A verification id does not name a known proposition."""


class DivergenceError(CramerLabError, RuntimeError):
    """A learner's predictions or loss stopped being finite."""
