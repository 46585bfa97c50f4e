"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific failures."""


class InputError(ToolkitError):
    """Malformed or out-of-contract input data."""


class SchemaError(InputError):
    """JSON input failed validation; carries the full diagnostic list."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DegenerateLoopError(ToolkitError):
    """Asymptotic loop is degenerate (its symplectic path has eigenvalue 1 at t=1)."""


class GapError(ToolkitError):
    """No clear spectral gap in the singular values; the discretization is under-resolved."""


class RefinementError(ToolkitError):
    """Sampling or parameter grid too coarse for a certified answer."""


class TransportError(ToolkitError):
    """Orientation transport left its admissible stratum (kernel dimension jump or
    ill-conditioned frame alignment)."""
