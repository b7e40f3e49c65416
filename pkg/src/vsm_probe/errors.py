"""Exception types raised across the package."""


class VsmProbeError(Exception):
    """Base class for every error raised by vsm_probe."""


# data assets
class MissingLocaleData(VsmProbeError, LookupError):
    pass


class SchemaError(VsmProbeError, ValueError):
    pass


class MissingFile(VsmProbeError, FileNotFoundError):
    pass


# gateway
class TransportError(VsmProbeError):
    pass


class AuthError(TransportError):
    pass


class CacheMiss(VsmProbeError, KeyError):
    pass


class InvalidPolicy(VsmProbeError, ValueError):
    pass


# collection / scoring
class IntegrityError(VsmProbeError):
    pass


class EmptyInput(VsmProbeError, ValueError):
    pass


class IncompleteSet(VsmProbeError, ValueError):
    pass


class DomainError(VsmProbeError, ValueError):
    pass


# metrics
class LengthMismatch(VsmProbeError, ValueError):
    pass


class DegenerateInput(VsmProbeError, ValueError):
    pass


class InsufficientNations(VsmProbeError, ValueError):
    pass


class NationMismatch(VsmProbeError, ValueError):
    pass


class ZeroHumanDispersion(VsmProbeError, ZeroDivisionError):
    pass


class ZeroHumanReference(VsmProbeError, ZeroDivisionError):
    pass


class CoincidentCentroids(VsmProbeError, ZeroDivisionError):
    pass


class TooFewPoints(VsmProbeError, ValueError):
    pass


# reporting
class UnknownModel(VsmProbeError, KeyError):
    pass
