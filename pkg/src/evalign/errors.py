"""Exception types shared across the package."""


class EvalignError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EvalignError):
    """Input file is syntactically malformed (bad XML/JSON/TSV)."""


class ValidationError(EvalignError):
    """Input is well-formed but violates a data-model invariant."""


class CoverageError(ValidationError):
    """An external score table does not cover exactly the expected (case, sentence) pairs."""
