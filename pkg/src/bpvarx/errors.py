"""Exception and warning types raised across the toolkit."""


class BpvarxError(Exception):
    """Base class for every error raised by the toolkit."""


# panel data
class DuplicateObservation(BpvarxError):
    pass


class SchemaMismatch(BpvarxError):
    pass


class EmptyDesign(BpvarxError):
    pass


class EmptySubsample(BpvarxError):
    pass


class InvalidRule(BpvarxError):
    pass


# preliminary tests
class InsufficientSeries(BpvarxError):
    def __init__(self, message, firms=()):
        super().__init__(message)
        self.firms = tuple(firms)


class DegenerateSystem(BpvarxError):
    pass


class InvalidOrder(BpvarxError):
    pass


# estimation
class CollinearDesign(BpvarxError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class Underdetermined(BpvarxError):
    pass


class InconsistentInputs(BpvarxError):
    pass


class UnknownEquation(BpvarxError):
    pass


# bayes
class DegenerateScale(BpvarxError):
    pass


# irf
class SingularCovariance(BpvarxError):
    pass


class AlreadyAccumulated(BpvarxError):
    pass


class NoStableDraws(BpvarxError):
    pass


# causality
class UnknownVariable(BpvarxError):
    pass


class InvalidPair(UnknownVariable):
    pass


# switching
class NonConvergent(BpvarxError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# simulation
class RejectedSpec(BpvarxError):
    pass


# cli
class ConfigError(BpvarxError):
    pass


class DataWarning(UserWarning):
    """Cells turned into missing values during ingestion or derivation."""


class UndefinedRatio(DataWarning):
    """A percent ratio whose denominator is zero."""


class ConvergenceWarning(UserWarning):
    pass
