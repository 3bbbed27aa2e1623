"""Exception hierarchy shared by all pipeline stages.

Every error raised on bad input derives from :class:`ValidationError`; the
command-line front-end maps those to exit status 1.
"""


class PulseGridError(Exception):
    pass


class ValidationError(PulseGridError, ValueError):
    pass


# signalio
class MalformedRecord(ValidationError):
    pass


class UnsupportedRate(ValidationError):
    pass


class TooShort(ValidationError):
    pass


class ImplausibleLabel(ValidationError):
    pass


# dsp
class NyquistViolation(ValidationError):
    pass


class EmptySignal(ValidationError):
    pass


class DegenerateSignal(ValidationError):
    pass


class BadLength(ValidationError):
    pass


# ampd
class SignalTooShort(ValidationError):
    pass


class TooFewPeaks(ValidationError):
    pass


# features
class NoValidBeats(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


# pca
class TooFewRows(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NumericalFailure(PulseGridError, ArithmeticError):
    pass


# boost
class EmptyTrainingSet(ValidationError):
    pass


class NoLearnerAccepted(ValidationError):
    pass


class EmptyEnsemble(ValidationError):
    pass


# eval
class TooFewSubjects(ValidationError):
    pass


class DegenerateFold(ValidationError):
    pass


class EmptyPairs(ValidationError):
    pass


class TooFewPairs(ValidationError):
    pass


# synth / cli
class InvalidConfig(ValidationError):
    pass


class IoFailure(PulseGridError, OSError):
    pass


class ConfigError(ValidationError):
    pass


class UnknownSubcommand(ValidationError):
    pass
