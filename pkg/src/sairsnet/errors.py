"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the command line
front end can emit it as JSON without parsing messages.
"""

from __future__ import annotations


class SairsError(Exception):
    """Base class for all library errors."""

    code = "ERROR"

    def __init__(self, message: str, code: str | None = None, **context):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.context = context

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        if self.context:
            out["context"] = self.context
        return out


class ParameterError(SairsError, ValueError):
    code = "INVALID_PARAMETERS"


class IrreducibilityError(ParameterError):
    code = "IRREDUCIBILITY"


class DimensionError(SairsError, ValueError):
    code = "DIMENSION_MISMATCH"


class StateError(SairsError, ValueError):
    code = "INVALID_STATE"


class ConvergenceError(SairsError, RuntimeError):
    code = "NON_CONVERGENCE"


class IntegrationError(SairsError, RuntimeError):
    code = "INTEGRATION_FAILURE"


class EquilibriumError(SairsError, RuntimeError):
    code = "R0_NOT_ABOVE_ONE"


class PreconditionError(SairsError, ValueError):
    code = "PRECONDITION"


class ConfigError(SairsError, ValueError):
    code = "SCHEMA"
