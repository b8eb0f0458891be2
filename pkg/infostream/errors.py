"""
Exception hierarchy.

Every precondition or contract failure is a ``ContractViolation`` (a
``ValueError``), which the CLI maps to exit code 2.
"""


class ContractViolation(ValueError):
    """An input or call violated an operation's stated contract."""


class InvalidDistribution(ContractViolation):
    """Negative mass, or masses that do not sum to 1 within tolerance."""


class DimensionMismatch(ContractViolation):
    """Two distributions were combined over different base sizes."""


class UnsupportedKind(ContractViolation):
    """A divergence kind lacks a property the operation needs."""


class BudgetExhausted(ContractViolation):
    """An oracle session ran out of calls."""


class IndexOutOfRange(ContractViolation):
    """An item index outside [0, n)."""


class StreamOrderError(ContractViolation):
    """A random-order algorithm was handed a stream not flagged as shuffled,
    or a two-pass algorithm a stream that cannot be replayed."""


class LadderOverflow(ContractViolation):
    """The stream outgrew the largest length guess of an estimator ladder."""


class NoSolution(ContractViolation):
    """An inversion has no solution inside the admissible interval."""


class ProbeOutsideCountedSet(ContractViolation):
    """A simulated oracle was probed at an index it never counted."""


class InternalFault(RuntimeError):
    """An invariant that the algorithm guarantees was observed broken."""
