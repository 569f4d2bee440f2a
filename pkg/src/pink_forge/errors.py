"""Exception hierarchy shared by every module."""


class PinkForgeError(Exception):
    """Base class for all library errors."""


class DomainError(PinkForgeError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class PrecisionMismatch(PinkForgeError, ValueError):
    """Operands carry different (prime, precision) pairs."""


class PreconditionError(PinkForgeError, ValueError):
    """A caller-checked hypothesis does not hold."""


class NonConvergence(PinkForgeError, ArithmeticError):
    """An iteration failed to reach a fixed point within its bound."""


class CapExceeded(PinkForgeError, RuntimeError):
    """An enumeration needed more elements than the configured cap."""

    def __init__(self, cap: int, what: str = "group"):
        super().__init__(f"{what} exceeds element cap {cap}")
        self.cap = cap


class LemmaViolation(PinkForgeError, AssertionError):
    """A computed object contradicts a proven statement (should never happen)."""

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class HypothesisUnmet(PinkForgeError, ValueError):
    """The input does not satisfy the hypotheses of the statement being checked."""


class NotNormalSylow(PinkForgeError, ValueError):
    """The l-power order elements of a group do not form a subgroup."""


class UnclassifiableError(PinkForgeError, RuntimeError):
    """No Dickson type matched."""


class ConstructionFailed(PinkForgeError, RuntimeError):
    """A proof construction found no applicable branch."""
