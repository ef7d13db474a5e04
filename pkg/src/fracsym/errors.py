"""Exception hierarchy shared by all fracsym modules."""


class FracsymError(Exception):
    """Base class for every error raised by the library."""


class ParseError(FracsymError):
    """Malformed expression source.

    ``line`` is 1-based, ``column`` is a 0-based offset into that line.
    """

    def __init__(self, message, line=1, column=0, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{message} (line {line}, column {column})")

    def diagnostic(self):
        if self.source is None:
            return str(self)
        text = self.source.splitlines()[self.line - 1] if self.source else ""
        return f"{self}\n  {text}\n  {' ' * self.column}^"


class EvaluationError(FracsymError):
    pass


class UnboundVariableError(EvaluationError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unbound variable {name!r}")


class DomainError(EvaluationError, ValueError):
    pass


class DifferentiationError(FracsymError):
    pass


class TerminalError(FracsymError, ValueError):
    """Evaluation point on or below a lower terminal, or a field that moves it."""


class SeriesDivergenceError(FracsymError):
    pass


class TruncationError(FracsymError):
    """A jet expression needs coordinates beyond the stored truncation order."""


class CertificationError(FracsymError):
    """A solution sample does not satisfy its equation to the required tolerance."""


class PreconditionError(FracsymError, ValueError):
    pass
