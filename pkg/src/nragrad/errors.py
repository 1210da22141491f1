"""Exception types shared across the package."""


class NragradError(Exception):
    """Base class for all package-specific errors."""


class SmtParseError(NragradError):
    """Malformed or out-of-subset SMT-LIB input."""


class UnsupportedCommand(SmtParseError):
    def __init__(self, command: str):
        super().__init__(f"unsupported command: {command}")
        self.command = command


class NonConstantDivisor(SmtParseError):
    """Division whose denominator is not a nonzero numeric constant."""


class UnknownSymbol(SmtParseError):
    def __init__(self, name: str):
        super().__init__(f"unknown symbol: {name}")
        self.name = name


class SortError(SmtParseError):
    """Declaration or term of an unsupported sort."""


class MissingVariable(NragradError):
    """An assignment does not cover a variable referenced by a term."""


class NonFiniteInput(NragradError):
    """A scalar loss primitive received NaN or infinity."""


class CapExceeded(NragradError):
    """Monomial expansion grew past the configured row cap."""


class ShapeMismatch(NragradError):
    """Batch matrix dimensions do not match the compiled problem."""


class NonFiniteLoss(NragradError):
    """Every sample in the batch produced a non-finite loss."""


class SpawnFailure(NragradError):
    """The external verifier command could not be started."""


class ProtocolError(NragradError):
    """The external verifier produced unparseable output."""


class NotEligible(NragradError):
    """The problem does not have the shape required by the transformation."""
