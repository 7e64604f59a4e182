"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons (CLI exit code 2)."""


class NotSPDError(NumericalError):
    """A matrix expected to be symmetric positive definite is not."""


class DegenerateMeshError(NumericalError):
    """A mesh contains an element with non-positive or near-zero area."""
