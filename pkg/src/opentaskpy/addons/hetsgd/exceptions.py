"""Exceptions raised by the hetsgd addon.

Configuration problems raise ``opentaskpy.exceptions.InvalidConfigError``.
Everything else derives from ``HetSGDError``.
"""


class HetSGDError(Exception):
    """Base class for simulation and analysis errors."""


class ContractViolationError(HetSGDError, ValueError):
    """An argument does not satisfy the calling contract (shape, weights)."""


class ParameterRangeError(HetSGDError, ValueError):
    """A numeric parameter is outside its documented range."""


class MissingParameterError(HetSGDError, KeyError):
    """A rate expression needs a parameter that was not supplied."""

    def __init__(self, name: str, bound: str):
        """Record which parameter and which bound.

        Args:
            name: The missing parameter name
            bound: The bound that asked for it
        """
        self.name = name
        self.bound = bound
        super().__init__(f"Missing parameter '{name}' for bound '{bound}'")

    def __str__(self) -> str:
        """Return the plain message rather than KeyError's quoted repr."""
        return str(self.args[0])


class MinimizerRequiredError(HetSGDError):
    """The operation needs x* and none is known or supplied."""

    def __init__(self, operation: str):
        """Build the message.

        Args:
            operation: Name of the operation that needed the minimizer
        """
        super().__init__(f"minimizer required for {operation}")


class ConvergenceError(HetSGDError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, gradient_norm: float):
        """Keep the last gradient norm for the caller.

        Args:
            message: Description of the failure
            gradient_norm: Norm of the gradient at the last iterate
        """
        self.gradient_norm = gradient_norm
        super().__init__(f"{message} (last gradient norm {gradient_norm:.3e})")


class IdxFormatError(HetSGDError):
    """The buffer is not a well formed IDX container."""


class CacheFormatError(HetSGDError):
    """The buffer is not a binary dataset cache this version can read."""


class ParameterMismatchError(HetSGDError):
    """Results and bounds do not describe the same parameter set."""


class AcceptanceCheckError(HetSGDError):
    """A verification suite found a violation."""


class StorageError(HetSGDError):
    """An artifact could not be read or written."""


class SweepCancelledError(HetSGDError):
    """A sweep was asked to stop before all cells ran."""
