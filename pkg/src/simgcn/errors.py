"""Structured error vocabulary shared by all modules and the CLI.

The CLI prints ``type(exc).__name__`` on stderr, so class names are part of
the interface.
"""


class SimgcnError(Exception):
    """Base class for every structured error this package raises."""


class ParseError(SimgcnError):
    """Malformed or unreadable input file (bad cell, ragged row, gap, missing file)."""


class EmptyInput(SimgcnError):
    """An input file contained no rows."""


class DegenerateLabels(SimgcnError):
    """Fewer than two distinct classes in a label file."""


class InsufficientClassSize(SimgcnError):
    """A class has too few members for the requested split."""


class InvalidConfig(SimgcnError):
    """Argument or configuration violates a documented constraint."""


class DegenerateGeometry(SimgcnError):
    """All pairwise distances are zero; no similarity bandwidth can be inferred."""


class DegenerateGraph(SimgcnError):
    """Too few nodes to build a graph."""


class ShapeError(SimgcnError):
    """Array dimensions do not line up."""


class EmptyMask(SimgcnError):
    """A label mask with no visible labels."""


class DivergenceError(SimgcnError):
    """Training loss became NaN."""


class InvalidSplit(SimgcnError):
    """Train/test index sets overlap or are otherwise unusable."""


class EmptyEvaluation(SimgcnError):
    """No nodes left to evaluate."""


class IoError(SimgcnError):
    """Output path could not be written."""


INPUT_ERRORS = (
    ParseError,
    EmptyInput,
    DegenerateLabels,
    InsufficientClassSize,
    InvalidConfig,
    DegenerateGeometry,
    DegenerateGraph,
    ShapeError,
    EmptyMask,
    InvalidSplit,
    EmptyEvaluation,
    IoError,
)
