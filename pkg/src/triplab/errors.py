"""Exception types shared across the toolkit.

Plain ``ValueError`` is used for ordinary precondition violations; the classes
here exist where callers need to tell failure modes apart.
"""


class TriplabError(Exception):
    """Base class for toolkit-specific errors."""


class ParseError(TriplabError):
    """A delimited input file could not be parsed.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TieError(TriplabError):
    """A majority vote over an answer group came out exactly even."""


class DivergenceError(TriplabError):
    """An optimization run produced a non-finite loss or gradient."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class IterationLimitError(TriplabError):
    """An iterative solver hit its iteration cap before converging."""


class ConfigError(TriplabError):
    """An experiment or study configuration document is invalid."""
