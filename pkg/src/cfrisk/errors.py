"""Exception hierarchy.

The CLI maps the three families to exit codes: ``ValidationError`` -> 2,
``NegativeCertificate`` -> 3, ``GuardExceeded`` -> 4.
"""


class CfriskError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CfriskError, ValueError):
    pass


class MissingEntry(ValidationError):
    pass


class DuplicateEntry(ValidationError):
    pass


class MalformedRational(ValidationError):
    pass


class BadDimensions(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class MissingParam(ValidationError):
    pass


class ConstraintViolated(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class OutcomeNotBinary(ValidationError):
    pass


class DecisionNotBinary(ValidationError):
    pass


class DecisionBinary(ValidationError):
    pass


class RestrictionViolated(ValidationError):
    pass


class NeedExtendedView(ValidationError):
    pass


class NeedExactLoss(ValidationError):
    pass


class EmptyPropensityCell(ValidationError):
    pass


class OverlapViolation(ValidationError):
    pass


class NegativeCertificate(CfriskError):
    """A computation finished but produced a negative answer."""


class InfeasibleMarginals(NegativeCertificate):
    pass


class GuardExceeded(CfriskError):
    pass


class TooLarge(GuardExceeded):
    pass


class SearchSpaceTooLarge(GuardExceeded):
    pass
