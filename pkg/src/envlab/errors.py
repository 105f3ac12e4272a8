"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map it
without a lookup table: 1 for invalid input, 2 for numerical failures.
"""


class EnvlabError(Exception):
    exit_code = 1


class ValidationError(EnvlabError, ValueError):
    exit_code = 1


class NumericalError(EnvlabError, ArithmeticError):
    exit_code = 2


class UnknownLabel(ValidationError):
    pass


class UnknownSubsystem(ValidationError):
    pass


class DuplicateSubsystemId(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class EmptyState(ValidationError):
    pass


class TargetMismatch(ValidationError):
    pass


class NonUnitary(ValidationError):
    pass


class TargetKindError(ValidationError):
    pass


class EmptyKeepSet(ValidationError):
    pass


class InvalidBipartition(ValidationError):
    pass


class LayoutMismatch(ValidationError):
    pass


class TargetOverlap(ValidationError):
    pass


class IdenticalLabels(ValidationError):
    pass


class BranchMismatch(ValidationError):
    pass


class EnvNotSeparating(ValidationError):
    pass


class UnknownSourceLabel(ValidationError):
    pass


class UnknownOutcome(ValidationError):
    pass


class ZeroWeightOutcome(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class UsageError(ValidationError):
    pass


class NoPlanWithinBound(NumericalError):
    pass


class IncompleteProjectorFamily(NumericalError):
    pass


class AmbiguousBranch(NumericalError):
    """A projected weight sits between the pruning cutoff and the branch threshold."""


class DegenerateSpectrumUnresolved(RuntimeWarning):
    """Counter-operation construction did not close the envariance residual."""
