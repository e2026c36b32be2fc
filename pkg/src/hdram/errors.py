"""Exception hierarchy shared by every hdram module."""


class HdramError(Exception):
    """Base class for all library errors."""


class ValidationError(HdramError, ValueError):
    """An input violates a documented precondition."""


class CapacityError(ValidationError):
    """Requested more codewords than the alphabet product can supply."""


class DuplicateCodewordError(ValidationError):
    """Two codewords are identical (Hamming distance 0)."""


class UndefinedDistanceError(ValidationError):
    """Minimum distance needs at least two codewords."""


class DomainError(ValidationError):
    """A numeric argument lies outside the function's domain."""


class ConfigError(ValidationError):
    """A benchmark configuration is invalid."""


class DuplicateAddressError(ValidationError):
    """The same key codeword was stored twice."""


class DegenerateInputError(HdramError, ValueError):
    """A zero or non-finite vector was given where a direction is required."""


class TokenLookupError(HdramError, KeyError):
    """A token is missing from an embedding table or vocabulary."""


class NullIterateError(HdramError, ArithmeticError):
    """The operator annihilated the current Krylov iterate."""


class InfiniteHorizonError(HdramError, ArithmeticError):
    """A coherence trace shows no decay, so the horizon is unbounded."""


class EmptyMemoryError(HdramError, LookupError):
    """Lookup against a bank with no stored pairs."""


class UnknownQueryError(HdramError, LookupError):
    """The queried codeword or payload was never stored."""


class InsufficientSymbolsError(HdramError):
    """Fewer qualifying hypertoken symbols exist than were requested."""

    def __init__(self, message: str, found: int):
        super().__init__(message)
        self.found = found


class EndpointError(HdramError):
    """The chat-completion endpoint failed in a way the run cannot absorb."""


class EndpointAuthError(EndpointError):
    """The endpoint rejected our credentials."""
