"""Exception hierarchy shared across the package."""


class CausalPoolError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CausalPoolError):
    """A cell in a data file could not be parsed as a finite number."""

    def __init__(self, row, col, message=None):
        self.row = row
        self.col = col
        super().__init__(message or f"unparseable value at row {row}, column {col}")


class ShapeError(CausalPoolError):
    """Ragged rows or otherwise malformed array shape."""


class SchemaError(CausalPoolError):
    """Variable names or windows of two objects do not line up."""


class DegenerateColumn(CausalPoolError):
    """A column is constant where variation is required."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} has zero variance")


class DuplicateTarget(CausalPoolError):
    """Two intervention runs address the same target variable."""


class UnknownTarget(CausalPoolError):
    """An intervention targets a variable absent from the observational data."""


class EmptyGraph(CausalPoolError):
    """A graph was requested over an empty variable list."""


class EdgeNotFound(CausalPoolError):
    """An edge locator does not match any edge in the graph."""


class IllegalOrientation(CausalPoolError):
    """A mark assignment violates time order or another edge invariant."""


class SampleError(CausalPoolError):
    """Not enough effective samples to run a conditional-independence test."""


class SingularCondSet(CausalPoolError):
    """Conditioning covariance stayed singular even after regularization."""


class HiddenConditioning(CausalPoolError):
    """A d-separation query conditioned on a hidden variable."""


class BackgroundConflict(CausalPoolError):
    """Background knowledge contradicts the graph or another rule."""


class ConfigError(CausalPoolError):
    """A generator or benchmark configuration is infeasible."""


class DivergenceError(CausalPoolError):
    """Simulation repeatedly produced values beyond the divergence guard.

    ``variable`` names the equation that tripped the guard last, so callers
    can regenerate it.
    """

    def __init__(self, message, variable=None):
        self.variable = variable
        super().__init__(message)


class RangeError(CausalPoolError):
    """An input lies outside its physically admissible range."""


class NoAmbiguity(CausalPoolError):
    """Target selection found no ambiguous edge to intervene on."""


class EmptyInput(CausalPoolError):
    """An aggregate operation received an empty collection."""
