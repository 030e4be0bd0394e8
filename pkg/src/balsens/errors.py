"""Exception hierarchy with machine-readable error codes.

Every error carries a short ``code`` string that the CLI maps to exit
codes and emits in its error JSON.
"""


class BalsensError(Exception):
    """Base class for all package errors."""

    code = "ERROR"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class ValidationError(BalsensError):
    code = "VALIDATION"


class EmptyGroupError(ValidationError):
    code = "EMPTY_GROUP"


class NonFiniteError(ValidationError):
    code = "NON_FINITE"


class NonBinaryTreatmentError(ValidationError):
    code = "NON_BINARY_TREATMENT"


class DomainError(BalsensError):
    code = "DOMAIN"


class SchemaError(BalsensError):
    code = "SCHEMA_ERROR"


class SolverError(BalsensError):
    code = "SOLVER"


class NoConvergenceError(SolverError):
    code = "NO_CONVERGENCE"


class InfeasibleError(SolverError):
    code = "INFEASIBLE"


class ZeroWeightSumError(BalsensError):
    code = "ZERO_WEIGHT_SUM"


class HOutOfRangeError(BalsensError):
    code = "H_OUT_OF_RANGE"


class EmptyInputError(BalsensError):
    code = "EMPTY_INPUT"


class DegenerateResamplingError(BalsensError):
    code = "DEGENERATE_RESAMPLING"


class NotBracketedError(BalsensError):
    code = "NOT_BRACKETED"


class RankDeficientError(BalsensError):
    code = "RANK_DEFICIENT"


class NoBenchmarksError(BalsensError):
    code = "NO_BENCHMARKS"


class OddNError(BalsensError):
    code = "ODD_N"
