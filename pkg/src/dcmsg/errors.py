"""Exception hierarchy shared across the package."""


class DcmsgError(Exception):
    """Base class for all package errors."""


# --- dataset ---------------------------------------------------------------

class MalformedFile(DcmsgError):
    pass


class EmptyDataset(DcmsgError):
    pass


class UnknownVariable(DcmsgError):
    pass


class AllRowsDeleted(DcmsgError):
    pass


class ZeroVariance(DcmsgError):
    pass


class ArityMismatch(DcmsgError):
    pass


class UnknownTask(DcmsgError):
    pass


class InvalidConfig(DcmsgError):
    pass


# --- model specification / design ------------------------------------------

class InvalidSpec(DcmsgError):
    pass


class IncompleteData(DcmsgError):
    pass


class NonPositiveForLog(DcmsgError):
    pass


# --- estimation -------------------------------------------------------------

class NonFiniteUtility(DcmsgError):
    pass


class SingularHessian(DcmsgError):
    pass


# --- post-estimation --------------------------------------------------------

class NoCostCoefficient(DcmsgError):
    pass


class TooFewModels(DcmsgError):
    pass


class NoLatentClassModels(DcmsgError):
    pass


# --- game session -----------------------------------------------------------

class UnknownDataset(DcmsgError):
    pass


class SessionClosed(DcmsgError):
    pass


class UnknownAction(DcmsgError):
    pass


class UnknownModelId(DcmsgError):
    pass


class EmptyReport(DcmsgError):
    pass


# --- analytics --------------------------------------------------------------

class SchemaMismatch(DcmsgError):
    pass


class NoTransitions(DcmsgError):
    pass


class NoModels(DcmsgError):
    pass


class DegenerateGroups(DcmsgError):
    pass
