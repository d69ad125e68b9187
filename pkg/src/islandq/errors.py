"""Exception types shared across the package."""


class IslandqError(Exception):
    """Base class for all errors raised by islandq."""


class DslSyntaxError(IslandqError):
    """Malformed line in one of the line-oriented input formats."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.message = message


class GrammarValidationError(IslandqError):
    """Grammar failed validation; carries the error diagnostics."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = list(diagnostics)


class EdgeBudgetExceeded(IslandqError):
    """Parsing hit the edge cap; the grammar/input combination is pathological."""


class InputLenZero(IslandqError):
    """Coverage ratio requested over a zero-length input."""


class CycleError(IslandqError):
    """Inheritance graph contains a cycle."""


class DanglingParent(IslandqError):
    """A theory names a parent that is not defined."""


class UnmappedCategory(IslandqError):
    """A chunk category has no slot in the frame schema."""


class InconsistentFrame(IslandqError):
    """A frame that failed consistency checking cannot be turned into a query."""


class UnknownAttribute(IslandqError):
    """Query predicate names an attribute the table does not have."""


class RaggedRow(IslandqError):
    """Table row with a cell count different from the header."""

    def __init__(self, line_no: int):
        super().__init__(f"line {line_no}: wrong number of cells")
        self.line_no = line_no


class MisalignedCorpus(IslandqError):
    """Gold corpus and pipeline output do not line up utterance by utterance."""
