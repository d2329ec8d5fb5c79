"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class BeliefError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(BeliefError, ValueError):
    """Invalid configuration or usage (bad flags, inconsistent settings)."""

    exit_code = 2


class DataError(BeliefError, ValueError):
    """Input data does not match the declared schema."""

    exit_code = 3


class DegeneracyError(BeliefError, ArithmeticError):
    """A numerical procedure was refused because the data are degenerate."""

    exit_code = 4


class SingularDesignError(DegeneracyError):
    """The least squares design is singular because some cells are empty."""

    def __init__(self, empty_cells):
        self.empty_cells = list(empty_cells)
        shown = ", ".join(str(t) for t in self.empty_cells[:10])
        more = "" if len(self.empty_cells) <= 10 else f", ... ({len(self.empty_cells)} total)"
        super().__init__(
            f"singular design: empty cells [{shown}{more}]; "
            "use the Moore-Penrose (mp) or ridge estimator instead"
        )


class SeparationError(DegeneracyError):
    """Some cell expectation is exactly +-1, so no finite GLM coefficients exist."""
